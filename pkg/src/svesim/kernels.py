"""Volterra convolution kernels.

Four structural variants are supported:

* :class:`FractionalKernel` -- the Riemann-Liouville kernel ``t^(alpha-1)/Gamma(alpha)``;
* :class:`ExpSumKernel` -- a finite sum of decaying exponentials (a discrete
  Bernstein measure), completely monotone by construction;
* :class:`ShiftedKernel` -- ``t -> base(t + eps)``, which regularises a kernel at 0;
* :class:`TabulatedKernel` -- linear interpolation of sampled values.

Kernels are immutable and evaluate vectorised over numpy arrays.
"""
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from ._quadrature import composite_rule, power_graded_edges
from .errors import DomainError, ParameterError, PreconditionError, RangeError

DEFAULT_ETA = 1.0


@dataclass(frozen=True)
class KernelMeta:
    """Regularity metadata of a kernel.

    Attributes
    ----------
    k0 : float
        ``K(0+)``, possibly ``inf``.
    gamma : float
        Hoelder exponent of the L^(2+eta) moduli, in ``(0, 1/2]``.
    eta : float
        Integrability margin used to compute ``gamma``.
    nonincreasing : bool
    completely_monotone : bool
    """

    k0: float
    gamma: float
    eta: float
    nonincreasing: bool
    completely_monotone: bool


class Kernel:
    """Base class; subclasses implement ``_eval`` on strictly positive arrays."""

    def __call__(self, t):
        arr = np.asarray(t, dtype=float)
        if np.any(arr < 0):
            raise DomainError(f"{self.label()}: kernel evaluated at negative time")
        zero = arr == 0
        if np.any(zero) and not math.isfinite(self.k0):
            raise DomainError(f"{self.label()}: K(0+) is infinite, evaluate at t > 0 only")
        out = self._eval(np.where(zero, 1.0, arr))
        if np.any(zero):
            out = np.where(zero, self.k0, out)
        return float(out) if out.ndim == 0 else out

    def _eval(self, t):
        raise NotImplementedError

    @property
    def k0(self):
        raise NotImplementedError

    @property
    def meta(self):
        raise NotImplementedError

    def label(self):
        return type(self).__name__

    def describe(self):
        """Tagged record suitable for config files and metadata sidecars."""
        raise NotImplementedError


@dataclass(frozen=True)
class FractionalKernel(Kernel):
    alpha: float

    def __post_init__(self):
        if not 0.5 < self.alpha < 2.0:
            raise ParameterError(f"fractional kernel needs alpha in (1/2, 2), got {self.alpha}")

    def _eval(self, t):
        return t ** (self.alpha - 1.0) / math.gamma(self.alpha)

    @property
    def k0(self):
        if self.alpha < 1.0:
            return math.inf
        return 1.0 if self.alpha == 1.0 else 0.0

    @property
    def meta(self):
        a = self.alpha
        eta = 0.5 * (2 * a - 1) / (1 - a) if a < 1 else DEFAULT_ETA
        gamma, eta = holder_params(self, eta)
        return KernelMeta(self.k0, gamma, eta, nonincreasing=a <= 1.0, completely_monotone=a <= 1.0)

    def label(self):
        return f"Fractional(alpha={self.alpha:g})"

    def describe(self):
        return {"type": "fractional", "alpha": self.alpha}


@dataclass(frozen=True)
class ExpSumKernel(Kernel):
    """``K(t) = sum_j w_j exp(-r_j t)`` with nonnegative weights and rates.

    An empty kernel (no atoms) is allowed; it arises from truncating every
    atom away and evaluates to zero.
    """

    weights: tuple
    rates: tuple
    _w: np.ndarray = field(init=False, repr=False, compare=False)
    _r: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).ravel()
        r = np.array(self.rates, dtype=float).ravel()
        if w.shape != r.shape:
            raise ParameterError("weights and rates must have equal length")
        if np.any(w < 0) or np.any(r < 0) or not (np.all(np.isfinite(w)) and np.all(np.isfinite(r))):
            raise ParameterError("weights and rates must be finite and nonnegative")
        if w.size and not np.any(w > 0):
            raise ParameterError("at least one weight must be positive")
        object.__setattr__(self, "weights", tuple(w.tolist()))
        object.__setattr__(self, "rates", tuple(r.tolist()))
        object.__setattr__(self, "_w", w)
        object.__setattr__(self, "_r", r)

    def _eval(self, t):
        t = np.asarray(t, dtype=float)
        if not self._w.size:
            return np.zeros_like(t)
        return np.exp(-t[..., None] * self._r) @ self._w

    @property
    def k0(self):
        return float(self._w.sum())

    @property
    def meta(self):
        gamma, eta = holder_params(self, DEFAULT_ETA)
        return KernelMeta(self.k0, gamma, eta, nonincreasing=True, completely_monotone=True)

    def label(self):
        return f"ExpSum(n={len(self.weights)})"

    def describe(self):
        return {"type": "expsum", "weights": list(self.weights), "rates": list(self.rates)}


@dataclass(frozen=True)
class ShiftedKernel(Kernel):
    base: Kernel
    eps: float

    def __post_init__(self):
        if not self.eps > 0:
            raise ParameterError(f"shift needs eps > 0, got {self.eps}")

    def _eval(self, t):
        return np.asarray(self.base(np.asarray(t) + self.eps), dtype=float)

    @property
    def k0(self):
        return float(self.base(self.eps))

    @property
    def meta(self):
        bm = self.base.meta
        gamma, eta = holder_params(self, DEFAULT_ETA)
        return KernelMeta(self.k0, gamma, eta, bm.nonincreasing, bm.completely_monotone)

    def label(self):
        return f"Shifted({self.base.label()}, eps={self.eps:g})"

    def describe(self):
        return {"type": "shifted", "eps": self.eps, "base": self.base.describe()}


@dataclass(frozen=True)
class TabulatedKernel(Kernel):
    """Piecewise-linear interpolation of ``values`` on a strictly increasing ``grid``.

    ``K(0+)`` is the first tabulated value when the grid starts at 0.
    """

    grid: tuple
    values: tuple
    _g: np.ndarray = field(init=False, repr=False, compare=False)
    _v: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        g = np.array(self.grid, dtype=float).ravel()
        v = np.array(self.values, dtype=float).ravel()
        if g.shape != v.shape or g.size < 2:
            raise ParameterError("grid and values must have equal length >= 2")
        if np.any(np.diff(g) <= 0):
            raise ParameterError("tabulation grid must be strictly increasing")
        if g[0] < 0:
            raise ParameterError("tabulation grid must be nonnegative")
        object.__setattr__(self, "grid", tuple(g.tolist()))
        object.__setattr__(self, "values", tuple(v.tolist()))
        object.__setattr__(self, "_g", g)
        object.__setattr__(self, "_v", v)

    def __call__(self, t):
        arr = np.asarray(t, dtype=float)
        if np.any(arr < self._g[0]) or np.any(arr > self._g[-1]):
            raise RangeError(
                f"tabulated kernel queried outside [{self._g[0]:g}, {self._g[-1]:g}]")
        out = np.interp(arr, self._g, self._v)
        return float(out) if out.ndim == 0 else out

    def _eval(self, t):
        return np.interp(t, self._g, self._v)

    @property
    def k0(self):
        return float(self._v[0]) if self._g[0] == 0 else math.nan

    @property
    def meta(self):
        gamma, eta = holder_params(self, DEFAULT_ETA)
        return KernelMeta(self.k0, gamma, eta,
                          nonincreasing=bool(np.all(np.diff(self._v) <= 0)),
                          completely_monotone=False)

    @property
    def t_max(self):
        return float(self._g[-1])

    def label(self):
        return f"Tabulated(n={len(self.grid)})"

    def describe(self):
        return {"type": "tabulated", "grid": list(self.grid), "values": list(self.values)}


def eval_kernel(k, t):
    """Evaluate ``k`` at ``t`` (scalar or array)."""
    return k(t)


def holder_params(k, eta_choice):
    """Return ``(gamma, eta)`` for the L^(2+eta) modulus bound of ``k``.

    For ``Fractional(alpha)`` this is ``gamma = min(1/2, alpha - 1 + 1/(2+eta))``,
    which requires ``eta < (2 alpha - 1)/(1 - alpha)`` when ``alpha < 1``.
    Bounded kernels (finite ``K(0+)``) get ``gamma = 1/(2+eta)``.
    """
    eta = float(eta_choice)
    if not eta > 0:
        raise ParameterError(f"eta must be positive, got {eta}")
    if isinstance(k, FractionalKernel):
        a = k.alpha
        if a < 1:
            bound = (2 * a - 1) / (1 - a)
            if eta >= bound:
                raise ParameterError(
                    f"eta={eta} not admissible for alpha={a}: need eta < {bound:.6g}")
        return min(0.5, a - 1 + 1 / (2 + eta)), eta
    return 1 / (2 + eta), eta


def _grading(k):
    if isinstance(k, FractionalKernel) and k.alpha < 1:
        return min(2 / (2 * k.alpha - 1), 12.0)
    return 1.0


def modulus_l2(k, T, h, p=2.0, n_grid=400, order=8):
    """Return ``(||K||_{L^p[0,h]}, ||K(.+h) - K||_{L^p[0,T]})``.

    Both integrals use composite Gauss-Legendre cells on a mesh graded with
    exponent ``2/(2 alpha - 1)`` towards the origin for singular fractional
    kernels, so ``t = 0`` is never evaluated.
    """
    if not (0 < h <= 1 and T > 0):
        raise ParameterError("need 0 < h <= 1 and T > 0")
    if p < 2:
        raise ParameterError("need p >= 2")
    if n_grid < 100:
        raise ParameterError("need n_grid >= 100")
    q = _grading(k)
    nodes, weights = composite_rule(power_graded_edges(0.0, h, n_grid, q), order)
    head = float(np.dot(weights, np.abs(k(nodes)) ** p)) ** (1 / p)
    nodes, weights = composite_rule(power_graded_edges(0.0, T, n_grid, q), order)
    diff = np.abs(k(nodes + h) - k(nodes))
    shift_norm = float(np.dot(weights, diff ** p)) ** (1 / p)
    return head, shift_norm


def _cell_weights(alpha, rho):
    # cells: [0, e_1], [e_j, e_{j+1}] at geometric midpoints, top cell mirrored
    r = rho[1] / rho[0]
    edges = np.concatenate([[0.0], np.sqrt(rho[1:] * rho[:-1]), [rho[-1] * math.sqrt(r)]])
    prim = edges ** (1 - alpha) / (1 - alpha)
    return np.diff(prim) / (math.gamma(alpha) * math.gamma(1 - alpha))


def _minimax_weights(alpha, rho, t):
    target = t ** (alpha - 1) / math.gamma(alpha)
    A = np.exp(-np.outer(t, rho)) / target[:, None]
    n = rho.size
    ones = np.ones((t.size, 1))
    A_ub = np.vstack([np.hstack([A, -ones]), np.hstack([-A, -ones])])
    b_ub = np.concatenate([np.ones(t.size), -np.ones(t.size)])
    c = np.zeros(n + 1)
    c[-1] = 1.0
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=[(0, None)] * (n + 1), method="highs")
    if res.status != 0:
        return None
    return np.clip(res.x[:-1], 0.0, None)


def soe_from_fractional(alpha, n_nodes, rho_min, rho_max, refine=True):
    """Sum-of-exponentials approximation of ``Fractional(alpha)``, ``alpha in (1/2, 1)``.

    Nodes are geometric on ``[rho_min, rho_max]``. Each node first receives the
    exact mass of the Bernstein density ``rho^(-alpha) / (Gamma(alpha) Gamma(1-alpha))``
    over its cell (cells split at geometric midpoints, the lowest reaching 0).
    With ``refine`` the weights are then re-fitted by a nonnegative minimax
    linear program on the relative error over ``[10/rho_max, 0.1/rho_min]``,
    which repairs the O(rho_min t) bias of the lowest cell. If that window is
    empty or the program fails, the cell weights are kept.
    """
    if not 0.5 < alpha < 1:
        raise ParameterError(f"soe_from_fractional needs alpha in (1/2, 1), got {alpha}")
    if n_nodes < 2:
        raise ParameterError("need at least two nodes")
    if not 0 < rho_min < rho_max:
        raise ParameterError("need 0 < rho_min < rho_max")
    rho = np.geomspace(rho_min, rho_max, n_nodes)
    w = _cell_weights(alpha, rho)
    lo, hi = 10.0 / rho_max, 0.1 / rho_min
    if refine and hi > lo:
        n_t = max(200, int(40 * math.log10(hi / lo)))
        fitted = _minimax_weights(alpha, rho, np.geomspace(lo, hi, n_t))
        if fitted is None:
            warnings.warn("minimax refinement failed; using cell weights", RuntimeWarning)
        else:
            w = fitted
    keep = w > 0
    return ExpSumKernel(tuple(w[keep]), tuple(rho[keep]))


def bernstein_truncate(k, H):
    """Drop every exponential atom with rate above ``H``."""
    if not isinstance(k, ExpSumKernel):
        raise ParameterError("bernstein_truncate needs an ExpSum kernel")
    if not H > 0:
        raise ParameterError("H must be positive")
    keep = k._r <= H
    return ExpSumKernel(tuple(k._w[keep]), tuple(k._r[keep]))


def shift(k, eps):
    """Return ``t -> k(t + eps)``; nested shifts are flattened."""
    if isinstance(k, ShiftedKernel):
        return ShiftedKernel(k.base, k.eps + eps)
    return ShiftedKernel(k, eps)


def expsum_shift(k, eps):
    """Closed form of ``shift`` for ExpSum kernels: weights scale by ``exp(-r eps)``."""
    if not isinstance(k, ExpSumKernel):
        raise ParameterError("expsum_shift needs an ExpSum kernel")
    return ExpSumKernel(tuple(k._w * np.exp(-k._r * eps)), k.rates)


def kernel_from_record(rec):
    """Build a kernel from a tagged record such as ``{"type": "fractional", "alpha": 0.7}``."""
    kind = rec.get("type")
    if kind == "fractional":
        return FractionalKernel(float(rec["alpha"]))
    if kind == "expsum":
        return ExpSumKernel(tuple(rec["weights"]), tuple(rec["rates"]))
    if kind == "shifted":
        return shift(kernel_from_record(rec["base"]), float(rec["eps"]))
    if kind == "tabulated":
        return TabulatedKernel(tuple(rec["grid"]), tuple(rec["values"]))
    raise ParameterError(f"unknown kernel type {kind!r}")


# -- non-negativity preservation -------------------------------------------------

@dataclass
class PropertyReport:
    """Outcome of a randomised falsification test.

    A finite test can only falsify; ``verdict`` is either
    ``"no violation found"`` or ``"violation found"``.
    """

    n_trials: int
    n_checks: int
    n_violations: int
    worst_value: float
    counterexample: dict = None

    @property
    def verdict(self):
        return "violation found" if self.n_violations else "no violation found"


def _kernel_horizon(k):
    if isinstance(k, TabulatedKernel):
        return k.t_max - k.grid[0]
    if isinstance(k, ShiftedKernel):
        return _kernel_horizon(k.base)
    return 1.0


def _sample_times(rng, n, t_max):
    # mix uniform and log-uniform spacing so several time scales are exercised
    if rng.random() < 0.5:
        t = rng.uniform(0.0, t_max, n)
    else:
        t = t_max * 10.0 ** rng.uniform(-4, 0, n)
    t = np.unique(t)
    return t[t > 0]


def _premise_weights(k, t, f_vals, slack, k0):
    """Solve ``f(t_k) + sum_{l<=k} x_l K(t_k - t_l) = slack_k`` forward in k."""
    n = t.size
    x = np.empty(n)
    for i in range(n):
        acc = f_vals[i]
        if i:
            acc += np.dot(x[:i], k(t[i] - t[:i]))
        x[i] = (slack[i] - acc) / k0
    return x


def _probe_times(rng, t, n_probes, t_max):
    gaps = np.concatenate([t[1:] - 1e-9 * np.maximum(t[1:], 1e-12), t])
    rand = rng.uniform(t[0], t_max, n_probes)
    probes = np.concatenate([gaps, rand])
    return np.sort(probes[probes > 0])


def check_nonneg_preserving(k, n_points=8, n_trials=1000, t_probes=16, seed=0, tol=1e-12):
    """Randomised test of the discrete non-negativity preservation property.

    Each trial draws ``0 < t_1 < ... < t_N`` and weights ``x`` that satisfy the
    premise ``f(t_k) + sum_{l<=k} x_l K(t_k - t_l) >= 0`` with random slack
    (zero slack on a random subset, i.e. equality). Half of the trials use
    ``f = 0``; the other half a random nonnegative nondecreasing step
    function ``f``. The conclusion ``f(t) + sum_{t_l<=t} x_l K(t - t_l) >= 0``
    is probed just before every atom and at random times. Roundoff is
    absorbed by the threshold ``tol * (1 + sum |x_l K(t - t_l)|)``.
    """
    k0 = k.k0
    if not (math.isfinite(k0) and k0 > 0):
        raise PreconditionError(
            f"{k.label()}: K(0+) = {k0}; non-negativity check needs a finite positive K(0+) "
            "(truncate a completely monotone kernel first)")
    rng = np.random.default_rng(seed)
    t_max = _kernel_horizon(k)
    worst = math.inf
    violations = 0
    checks = 0
    example = None
    for trial in range(n_trials):
        n = int(rng.integers(1, n_points + 1))
        t = _sample_times(rng, n, 0.5 * t_max) if n > 1 else rng.uniform(0, 0.5 * t_max, 1)
        n = t.size
        use_f = trial % 2 == 1
        if use_f:
            jumps = np.sort(rng.uniform(0, t_max, 3))
            sizes = rng.exponential(1.0, 3) * (rng.random(3) < 0.7)
            f0 = rng.exponential(1.0) * (rng.random() < 0.5)

            def f(s, jumps=jumps, sizes=sizes, f0=f0):
                s = np.asarray(s, dtype=float)
                return f0 + (s[..., None] >= jumps).astype(float) @ sizes
        else:
            def f(s):
                return np.zeros_like(np.asarray(s, dtype=float))
        slack = rng.exponential(1.0, n) * (rng.random(n) < 0.5)
        x = _premise_weights(k, t, f(t), slack, k0)
        probes = _probe_times(rng, t, t_probes, t_max)
        active = probes[:, None] >= t[None, :]
        lags = np.where(active, probes[:, None] - t[None, :], 0.0)
        terms = np.where(active, x[None, :] * k(lags), 0.0)
        vals = f(probes) + terms.sum(axis=1)
        scale = 1.0 + np.abs(terms).sum(axis=1)
        rel = vals / scale
        checks += probes.size
        i = int(np.argmin(rel))
        worst = min(worst, float(vals[i]))
        bad = vals < -tol * scale
        if np.any(bad):
            violations += 1
            if example is None:
                example = {"times": t.tolist(), "x": x.tolist(), "t": float(probes[i]),
                           "value": float(vals[i]), "with_f": use_f}
    return PropertyReport(n_trials, checks, violations, worst, example)
