"""Composite Gauss-Legendre rules on graded meshes.

Integrands in this package typically carry algebraic endpoint singularities
(fractional kernels, singular input curves), so every rule here avoids
evaluating at the endpoints themselves.
"""
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def gauss_legendre(order):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def composite_rule(edges, order=8):
    """Nodes and weights of a composite Gauss-Legendre rule over ``edges``."""
    edges = np.asarray(edges, dtype=float)
    x, w = gauss_legendre(order)
    a = edges[:-1, None]
    half = 0.5 * np.diff(edges)[:, None]
    nodes = a + half * (x[None, :] + 1.0)
    weights = half * w[None, :]
    return nodes.ravel(), weights.ravel()


def power_graded_edges(a, b, n_cells, grading):
    """Edges ``a + (b - a) (i/n)^q`` clustering cells towards ``a``."""
    s = np.linspace(0.0, 1.0, n_cells + 1) ** grading
    return a + (b - a) * s


def geometric_edges(a, b, levels=48, ratio=2.0, uniform_cells=4):
    """Edges clustering geometrically towards ``a``.

    The coarse part ``[a + L/ratio, b]`` is split into ``uniform_cells`` cells,
    below that each cell shrinks by ``ratio`` down to ``L * ratio**-levels``.
    """
    length = b - a
    if length <= 0:
        return np.array([a, b], dtype=float)
    tiny = length * ratio ** -np.arange(levels, 0, -1)
    upper = np.linspace(length / ratio, length, uniform_cells + 1)
    return a + np.concatenate([[0.0], tiny, upper])


def graded_rule(a, b, toward="left", order=10, levels=48):
    """Composite rule on ``[a, b]`` geometrically graded towards one or both ends."""
    if toward == "left":
        return composite_rule(geometric_edges(a, b, levels), order)
    if toward == "right":
        nodes, weights = composite_rule(geometric_edges(0.0, b - a, levels), order)
        return (b - nodes)[::-1], weights[::-1]
    if toward == "both":
        mid = 0.5 * (a + b)
        n1, w1 = graded_rule(a, mid, "left", order, levels)
        n2, w2 = graded_rule(mid, b, "right", order, levels)
        return np.concatenate([n1, n2]), np.concatenate([w1, w2])
    raise ValueError(f"unknown grading direction {toward!r}")


def integrate(f, a, b, toward="left", order=10, levels=48):
    """Integrate a vectorised ``f`` over ``[a, b]`` with a graded rule."""
    if b <= a:
        return 0.0
    nodes, weights = graded_rule(a, b, toward, order, levels)
    return float(np.dot(weights, f(nodes)))
