"""Statistics and analytic oracles for simulated ensembles.

Ordering reports for coupled pairs, strong-error studies, error-bound
components, Hoelder exponents, the resolvent of the second kind, and the
negative-kernel counterexample for increasing fractional kernels.
"""
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ._quadrature import composite_rule, gauss_legendre, graded_rule, integrate
from .errors import DomainError, EstimationError, ParameterError, PreconditionError, RegularityWarning
from .kernels import FractionalKernel
from .mittag_leffler import ml
from .model import InputCurve, SveProblem, constant, eval_g, linear
from .schemes import BrownianDriver, simulate_coupled, simulate_euler, simulate_splitting


# -- ordering ----------------------------------------------------------------------

@dataclass
class ComparisonReport:
    """Ordering statistics of a coupled pair ``(X1, X2)``.

    A path violates the ordering when ``max_k (X1 - X2)(t_k) > delta``.
    """

    n_paths: int
    violation_fraction: float
    max_exceedance: float
    per_time_means: np.ndarray
    delta: float
    per_time_se: np.ndarray = None
    grid: np.ndarray = None

    @property
    def n_violations(self):
        return int(round(self.violation_fraction * self.n_paths))


def _check_aligned(e1, e2):
    if e1.values.shape != e2.values.shape or not np.array_equal(e1.grid, e2.grid):
        raise PreconditionError("ensembles are not aligned (grid or path count differ)")


def _mean_se(d):
    n = d.shape[0]
    mean = d.mean(axis=0)
    se = d.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.full(d.shape[1], np.nan)
    return mean, se


def comparison_report(e1, e2, delta=0.0):
    """Summarise how often ``X1 <= X2 + delta`` fails along coupled paths."""
    if delta < 0:
        raise ParameterError("delta must be nonnegative")
    _check_aligned(e1, e2)
    worst = np.max(e1.values - e2.values, axis=1)
    n = e1.n_paths
    viol = int(np.count_nonzero(worst > delta))
    mean, se = _mean_se(e2.values - e1.values)
    return ComparisonReport(n, viol / n, float(max(0.0, worst.max())), mean, float(delta),
                            se, e1.grid.copy())


# -- error bound components and strong error ------------------------------------

def modulus_of_continuity(values, window):
    """``max |f(s) - f(t)|`` over mesh points at most ``window`` steps apart."""
    v = np.asarray(values, dtype=float)
    if window < 1 or v.size < 2:
        return 0.0
    win = sliding_window_view(v, min(window + 1, v.size))
    return float(np.max(win.max(axis=1) - win.min(axis=1)))


def bound_components(g, k, C_fn, T, N, n_grid=2000):
    """Components of the strong error bound at step ``T/N``.

    Returns ``(omega_g, omega_K, sup_C2)``: moduli of continuity of ``g`` and
    of ``K`` at ``delta = T/N`` on a mesh that resolves ``delta`` exactly, and
    ``max_k int_{t_{k-1}}^{t_k} C(s)^2 ds``. For singular ``g`` the modulus is
    taken on ``[t_1, T]``; a kernel with ``K(0+) = inf`` has ``omega_K = inf``.
    """
    if N < 1:
        raise ParameterError("N must be >= 1")
    delta = T / N
    per = max(1, math.ceil(n_grid / N))
    lo = delta if (isinstance(g, InputCurve) and g.is_singular) else 0.0
    n_cells = int(round((T - lo) / delta)) * per
    mesh = lo + (T - lo) * np.arange(n_cells + 1) / max(n_cells, 1)
    omega_g = modulus_of_continuity(eval_g(g, k, mesh), per) if n_cells else 0.0
    if not math.isfinite(k.k0):
        omega_k = math.inf
    else:
        kmesh = T * np.arange(N * per + 1) / (N * per)
        omega_k = modulus_of_continuity(k(kmesh), per)
    if C_fn is None:
        sup_c2 = 0.0
    else:
        edges = T * np.arange(N + 1) / N
        nodes, weights = composite_rule(edges, 8)
        cell = (weights * np.asarray(C_fn(nodes), dtype=float) ** 2).reshape(N, -1).sum(axis=1)
        sup_c2 = float(cell.max())
    return float(omega_g), float(omega_k), sup_c2


@dataclass
class ConvergenceReport:
    """Self-convergence study against a fine reference run with shared noise."""

    Ns: list
    errors: list
    fitted_rate: float
    bound_components: list
    n_ref: int = None
    t_eval: float = None
    error_se: list = field(default_factory=list)


def strong_error(p, c_base, Ns, ref_factor=4, t_eval=None, scheme="splitting", C_fn=None):
    """Mean-square difference to a reference run with ``N_ref = ref_factor * max(Ns)``.

    All runs use a driver at the reference resolution, so every coarse
    increment is a sum of reference increments. ``fitted_rate`` is minus the
    least-squares slope of ``log error`` against ``log N`` (positive when the
    error decays); it is ``nan`` when some error is exactly zero.
    """
    Ns = [int(n) for n in Ns]
    if sorted(set(Ns)) != Ns:
        raise ParameterError("Ns must be strictly increasing")
    n_ref = int(ref_factor) * max(Ns)
    if any(n_ref % n for n in Ns):
        raise PreconditionError(f"every N must divide the reference size {n_ref}")
    T = p.T
    t_eval = T if t_eval is None else float(t_eval)
    run = {"splitting": simulate_splitting, "euler": simulate_euler}[scheme]
    drv = BrownianDriver(c_base.seed, resolution=n_ref * c_base.M)

    def at(n):
        pos = t_eval / T * n
        idx = int(round(pos))
        if abs(pos - idx) > 1e-9 or idx < 1:
            raise PreconditionError(f"t_eval={t_eval} is not a grid point for N={n}")
        return idx - 1

    ref = run(p, c_base.replace(N=n_ref, T=T), drv).values[:, at(n_ref)]
    errors, ses, comps = [], [], []
    for n in Ns:
        x = run(p, c_base.replace(N=n, T=T), drv).values[:, at(n)]
        sq = (x - ref) ** 2
        errors.append(float(sq.mean()))
        ses.append(float(sq.std(ddof=1) / math.sqrt(sq.size)) if sq.size > 1 else math.nan)
        comps.append(bound_components(p.g, p.k, C_fn, T, n))
    errs = np.array(errors)
    if np.all(errs > 0):
        rate = -float(np.polyfit(np.log(Ns), np.log(errs), 1)[0])
    else:
        rate = math.nan
    return ConvergenceReport(Ns, errors, rate, comps, n_ref, t_eval, ses)


# -- regularity --------------------------------------------------------------------

def theta_formula(gamma, eta, xi, q):
    """Hoelder exponent ``gamma + eta/(2(2+eta)) - (2 xi / q)(1 + 1/eta)``.

    A nonpositive value is returned unchanged with a :class:`RegularityWarning`.
    """
    theta = gamma + 0.5 * eta / (2 + eta) - (2 * xi / q) * (1 + 1 / eta)
    if theta <= 0:
        warnings.warn(f"theta = {theta:.4g} <= 0: no Hoelder regularity guaranteed",
                      RegularityWarning, stacklevel=2)
    return theta


def empirical_holder(e, g_values, p=4.0, lag_set=(1, 2, 4, 8, 16)):
    """Kolmogorov-type exponent of ``Y = X - g`` from its ``p``-th moments.

    For each lag ``L`` (in grid steps), ``m(L) = mean |Y(t + L dt) - Y(t)|^p``
    over all paths and start times. The exponent is the least-squares slope
    of ``log m`` against ``log(L dt)`` divided by ``p``.
    """
    if p < 2:
        raise ParameterError("p must be >= 2")
    y = e.values - np.asarray(g_values, dtype=float)[None, :]
    n = y.shape[1]
    lags = [int(v) for v in lag_set]
    if min(lags) < 1 or max(lags) >= n:
        raise ParameterError(f"lags must lie in [1, {n - 1}]")
    dt = float(e.grid[1] - e.grid[0]) if n > 1 else float(e.grid[0])
    moments = np.array([np.mean(np.abs(y[:, lag:] - y[:, :-lag]) ** p) for lag in lags])
    if not np.all(moments > 0) or not np.all(np.isfinite(moments)):
        raise EstimationError("degenerate ensemble: some lagged moment is zero or not finite")
    slope = np.polyfit(np.log(np.array(lags) * dt), np.log(moments), 1)[0]
    return float(slope / p)


# -- resolvent ---------------------------------------------------------------------

def _cell_moments(F, h, n, singular):
    """``P_m = int F(u)(u - m h)/h``, ``Q_m = int F(u)((m+1)h - u)/h`` over cell ``m``."""
    edges = h * np.arange(n + 1)
    x, w = gauss_legendre(10)
    a = edges[:-1, None]
    nodes = a + 0.5 * h * (x + 1)
    wts = 0.5 * h * w
    fv = np.asarray(F(nodes), dtype=float)
    frac = (nodes - a) / h
    P = (fv * frac) @ wts
    Q = (fv * (1 - frac)) @ wts
    if singular:
        un, uw = graded_rule(0.0, h, "left", order=10, levels=60)
        fu = np.asarray(F(un), dtype=float)
        P[0] = float(np.dot(uw, fu * un / h))
        Q[0] = float(np.dot(uw, fu * (1 - un / h)))
    return P, Q


def resolvent_second_kind(F, T, n_grid):
    """Solve ``R(t) = F(t) + int_0^t F(t-s) R(s) ds`` on ``t_i = i T / n_grid``.

    Product trapezoidal rule: ``R`` is linear between nodes and the weights
    ``int F(u) (linear hat)`` are integrated per cell by Gauss-Legendre, so
    a smooth ``F`` gives the classical trapezoidal scheme. For ``F`` singular
    but integrable at 0, ``R(0) = inf`` is returned and the first cell uses
    ``R ~ F`` there; a nonintegrable ``F`` raises :class:`DomainError`.
    """
    if n_grid < 16:
        raise ParameterError("n_grid must be >= 16")
    if not T > 0:
        raise ParameterError("T must be positive")
    h = T / n_grid
    t = h * np.arange(n_grid + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        f0 = float(np.asarray(F(np.array([0.0])), dtype=float)[0])
    singular = not math.isfinite(f0)
    if singular:
        coarse = integrate(F, 0.0, h, levels=30)
        fine = integrate(F, 0.0, h, levels=60)
        if not (math.isfinite(fine) and abs(fine - coarse) <= 1e-3 * abs(fine) + 1e-300):
            raise DomainError("F is not integrable at 0")
    P, Q = _cell_moments(F, h, n_grid, singular)
    fv = np.empty(n_grid + 1)
    fv[0] = f0
    fv[1:] = np.asarray(F(t[1:]), dtype=float)
    R = np.zeros(n_grid + 1)
    R[0] = f0
    first = np.zeros(n_grid + 1)
    if singular:
        # contribution of (0, h) with R ~ F there: int_0^h F(t_i - s) F(s) ds
        sn, sw = graded_rule(0.0, h, "left", order=10, levels=60)
        fs = np.asarray(F(sn), dtype=float)
        for i in range(2, n_grid + 1):
            first[i] = np.dot(sw, np.asarray(F(t[i] - sn), dtype=float) * fs)
        # i = 1: both factors are singular, split at h/2 and grade each half toward its own end
        un, uw = graded_rule(0.0, 0.5 * h, "left", order=10, levels=60)
        first[1] = 2.0 * np.dot(uw, np.asarray(F(un), dtype=float) * np.asarray(F(h - un), dtype=float))
    denom = 1.0 - Q[0]
    # cell [t_j, t_j+1] in s maps to cell m = i-j-1 in u = t_i - s; R_j takes P_m, R_j+1 takes Q_m
    start = 1 if singular else 0
    for i in range(1, n_grid + 1):
        jp = np.arange(start, i)
        jq = np.arange(start + 1, i)
        acc = fv[i] + first[i] + np.dot(P[i - 1 - jp], R[jp]) + np.dot(Q[i - jq], R[jq])
        # for singular F the whole of (0, t_1) is already in first[1]
        R[i] = acc if (singular and i == 1) else acc / denom
    return R


# -- counterexample ----------------------------------------------------------------

@dataclass
class CounterexampleReport:
    grid: np.ndarray
    analytic_diff: np.ndarray
    mc_diff_mean: np.ndarray
    mc_diff_se: np.ndarray

    def agreement_fraction(self, n_se=3.0):
        return float(np.mean(np.abs(self.mc_diff_mean - self.analytic_diff) <= n_se * self.mc_diff_se))


def counterexample_problems(alpha, beta0, x1, x2, T, sigma=1.0):
    """Coupled fractional OU pair with drift ``-x`` and power input curves."""
    k = FractionalKernel(alpha)
    drift, diff = linear(0.0, -1.0), constant(sigma)
    p1 = SveProblem(InputCurve.power(x1, beta0), k, drift, diff, T)
    p2 = SveProblem(InputCurve.power(x2, beta0), k, drift, diff, T)
    return p1, p2


def counterexample_report(alpha, beta0, x1, x2, c, drv=None, sigma=1.0):
    """Analytic and Monte Carlo difference ``X2 - X1`` for an increasing fractional kernel.

    ``analytic_diff(t) = (x2 - x1) t^(beta0-1) E_{alpha,beta0}(-t^alpha)``; the
    Monte Carlo side runs the Euler scheme on both problems with shared noise.
    """
    if not 1 < alpha < 2:
        raise ParameterError("alpha must lie in (1, 2)")
    if not beta0 > 0:
        raise ParameterError("beta0 must be positive")
    if x2 < x1:
        raise ParameterError("need x1 <= x2")
    drv = BrownianDriver(c.seed) if drv is None else drv
    p1, p2 = counterexample_problems(alpha, beta0, x1, x2, c.T, sigma)
    e1, e2 = simulate_coupled(p1, p2, c, drv, "euler")
    t = e1.grid
    analytic = (x2 - x1) * t ** (beta0 - 1) * ml(alpha, beta0, -t ** alpha)
    mean, se = _mean_se(e2.values - e1.values)
    return CounterexampleReport(t, np.asarray(analytic, dtype=float), mean, se)
