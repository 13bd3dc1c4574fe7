"""Problem data for one-dimensional stochastic Volterra equations.

``X_t = g(t) + int_0^t K(t-s) b(s, X_s) ds + int_0^t K(t-s) sigma(s, X_s) dB_s``

This module holds the input curve ``g``, the coefficients ``b`` and
``sigma``, their regularisation by mollification, the Lipschitz
approximants of square-root type coefficients, and report-only checks of
the standing integrability assumption and of comparability of two data sets.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import rgamma

from ._quadrature import gauss_legendre, graded_rule, integrate
from .errors import DomainError, ParameterError, PreconditionError
from .kernels import FractionalKernel, holder_params, modulus_l2

TOL = 1e-12


class Coefficient:
    """A drift or diffusion coefficient ``(t, x) -> value`` with metadata.

    Parameters
    ----------
    func : callable
        Vectorised ``func(t, x)``; ``t`` and ``x`` broadcast against each other.
    lipschitz_const : float, optional
        Global Lipschitz constant in ``x`` when known.
    growth_const, growth_xi : float
        ``|func(t, x)| <= growth_const * (1 + |x|)^growth_xi``.
    monotone_nondecreasing_in_x : bool, optional
    time_lipschitz_l2 : callable, optional
        ``C(t)`` in ``|f(t,x) - f(t,y)| <= C(t) |x - y|`` for time-dependent constants.
    key : tuple, optional
        Identifies a named family with its parameters; two coefficients with
        equal keys compare equal.
    """

    def __init__(self, func, lipschitz_const=None, growth_const=None, growth_xi=1.0,
                 monotone_nondecreasing_in_x=None, time_lipschitz_l2=None, key=None, label=None):
        if not 0 <= growth_xi <= 1:
            raise ParameterError(f"growth exponent must lie in [0, 1], got {growth_xi}")
        self.func = func
        self.lipschitz_const = lipschitz_const
        self.growth_const = growth_const
        self.growth_xi = float(growth_xi)
        self.monotone_nondecreasing_in_x = monotone_nondecreasing_in_x
        self.time_lipschitz_l2 = time_lipschitz_l2
        self.key = key
        self.label = label or (key[0] if key else "custom")

    def __call__(self, t, x):
        return self.func(t, x)

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Coefficient) or self.key is None:
            return False
        return self.key == other.key

    def __hash__(self):
        return hash(self.key) if self.key is not None else id(self)

    def __repr__(self):
        return f"Coefficient({self.key or self.label})"

    def describe(self):
        if self.key is None:
            return {"family": self.label}
        name, *params = self.key
        return {"family": name, "params": list(params)}


def linear(a=0.0, beta=0.0):
    """``b(t, x) = a + beta x`` (Ornstein-Uhlenbeck drift)."""
    a, beta = float(a), float(beta)
    return Coefficient(lambda t, x: a + beta * np.asarray(x, dtype=float),
                       lipschitz_const=abs(beta), growth_const=max(abs(a), abs(beta)),
                       growth_xi=1.0 if beta else 0.0,
                       monotone_nondecreasing_in_x=beta >= 0, key=("linear", a, beta))


def constant(c=0.0):
    """``f(t, x) = c``."""
    c = float(c)
    return Coefficient(lambda t, x: np.zeros(np.broadcast(t, x).shape) + c,
                       lipschitz_const=0.0, growth_const=abs(c), growth_xi=0.0,
                       monotone_nondecreasing_in_x=True, key=("constant", c))


def _power_branch(d, gamma_, n):
    """``|d|^gamma`` with the linear piece ``n^(1-gamma) |d|`` on ``|d| <= 1/n`` when ``n`` is given."""
    ad = np.abs(d)
    if n is None:
        return ad ** gamma_
    return np.where(ad <= 1.0 / n, n ** (1 - gamma_) * ad, ad ** gamma_)


def cir_coefficients(lam, theta, sigma0, gamma1, gamma2, n=None):
    """Drift and diffusion of the rough square-root (CIR-type) model.

    Without ``n`` these are ``b(x) = lam sign(theta - x) |theta - x|^gamma1`` and
    ``sigma(x) = sigma0 |x|^gamma2``. With ``n`` each power ``|d|^g`` is replaced on
    ``|d| <= 1/n`` by the chord ``n^(1-g) |d|``, giving globally Lipschitz
    approximants with ``sigma_n(0) = 0`` and ``b_n(0) >= 0``.
    """
    if not (lam > 0 and theta > 0 and sigma0 > 0):
        raise ParameterError("lam, theta and sigma0 must be positive")
    if not (0 < gamma1 <= 1 and 0 < gamma2 <= 1):
        raise ParameterError("gamma1 and gamma2 must lie in (0, 1]")
    if n is not None and not n >= 1:
        raise ParameterError("n must be >= 1")
    lam, theta, sigma0 = float(lam), float(theta), float(sigma0)

    def b(t, x):
        d = theta - np.asarray(x, dtype=float)
        return lam * np.sign(d) * _power_branch(d, gamma1, n)

    def sig(t, x):
        return sigma0 * _power_branch(np.asarray(x, dtype=float), gamma2, n)

    tag = "cir_exact" if n is None else "cir_n"
    params = (lam, theta, sigma0, gamma1, gamma2) + (() if n is None else (n,))
    lip_b = None if n is None else lam * n ** (1 - gamma1)
    lip_s = None if n is None else sigma0 * n ** (1 - gamma2)
    # |theta - x|^g1 <= (theta + |x|)^g1 <= max(1, theta) (1 + |x|); chords stay below max(1, n^(1-g)) |d|
    gb = lam * max(1.0, theta) * (1.0 if n is None else max(1.0, n ** (1 - gamma1)))
    gs = sigma0 * (1.0 if n is None else max(1.0, n ** (1 - gamma2)))
    b_coef = Coefficient(b, lipschitz_const=lip_b, growth_const=gb, growth_xi=1.0,
                         monotone_nondecreasing_in_x=False, key=(tag + "_drift",) + params)
    s_coef = Coefficient(sig, lipschitz_const=lip_s, growth_const=gs, growth_xi=1.0,
                         key=(tag + "_diffusion",) + params)
    return b_coef, s_coef


def coefficient_from_record(rec):
    """Build a coefficient from ``{family = "linear", a = .., beta = ..}`` style records."""
    fam = rec.get("family")
    if fam == "linear":
        return linear(rec.get("a", 0.0), rec.get("beta", 0.0))
    if fam == "constant":
        return constant(rec.get("c", 0.0))
    if fam in ("cir_exact", "cir_n"):
        args = [rec[k] for k in ("lam", "theta", "sigma0", "gamma1", "gamma2")]
        n = rec.get("n") if fam == "cir_n" else None
        if fam == "cir_n" and n is None:
            raise ParameterError("cir_n needs n")
        part = rec.get("part", "drift")
        return cir_coefficients(*args, n=n)[0 if part == "drift" else 1]
    raise ParameterError(f"unknown coefficient family {fam!r}")


# -- mollification ---------------------------------------------------------------

def mollifier_norm(n):
    """``c_n = int_{-1}^1 (1 - y^2)^n dy`` via ``c_n = c_{n-1} 2n/(2n+1)``, ``c_0 = 2``."""
    c = 2.0
    for j in range(1, n + 1):
        c *= 2 * j / (2 * j + 1)
    return c


def cutoff(x, n):
    """C^2 bump equal to 1 on ``[-n, n]`` and 0 outside ``[-(n+1), n+1]``.

    The transition is the quintic ``1 - (10 s^3 - 15 s^4 + 6 s^5)`` in ``s = |x| - n``.
    """
    s = np.clip(np.abs(np.asarray(x, dtype=float)) - n, 0.0, 1.0)
    return 1.0 - s ** 3 * (10.0 - 15.0 * s + 6.0 * s * s)


def _probe_lipschitz(func, radius, n_x=4001, times=(0.0, 0.5, 1.0)):
    x = np.linspace(-radius, radius, n_x)
    worst = 0.0
    for t in times:
        v = np.asarray(func(t, x), dtype=float)
        worst = max(worst, float(np.max(np.abs(np.diff(v)) / np.diff(x))))
    return worst


def mollify(f, n, n_quad=None):
    """Regularise ``f`` in ``x``: ``f_n(t, x) = psi_n(x) int f(t, x - y) phi_n(y) dy``.

    ``phi_n(y) = (1 - y^2)^n / c_n`` on ``[-1, 1]`` and ``psi_n`` is :func:`cutoff`.
    The integral uses an ``n_quad``-point Gauss-Legendre rule (default
    ``max(64, n + 2)``, exact for polynomial ``f`` of degree below
    ``2 (n_quad - n)``). Nonnegative weights make the map order preserving.

    The result's growth constant is ``2^xi C``: ``(1 + |x - y|)^xi <= 2^xi (1 + |x|)^xi``
    for ``|y| <= 1``, and no smaller factor works for every ``f``. Its Lipschitz
    constant is estimated by finite differences on ``[-(n+1.5), n+1.5]``.
    """
    if not (isinstance(n, (int, np.integer)) and n >= 1):
        raise ParameterError("n must be an integer >= 1")
    q = max(64, n + 2) if n_quad is None else int(n_quad)
    y, w = gauss_legendre(q)
    weights = w * (1.0 - y * y) ** n / mollifier_norm(n)

    def fn(t, x):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        vals = np.asarray(f(t[..., None], x[..., None] - y), dtype=float)
        vals = np.broadcast_to(vals, np.broadcast(t[..., None], x[..., None] - y).shape)
        return cutoff(x, n) * (vals @ weights)

    growth = None if f.growth_const is None else 2.0 ** f.growth_xi * f.growth_const
    lip = _probe_lipschitz(fn, n + 1.5)
    key = None if f.key is None else ("mollified", f.key, n, q)
    return Coefficient(fn, lipschitz_const=lip, growth_const=growth, growth_xi=f.growth_xi,
                       key=key, label=f"mollified({f.label}, n={n})")


# -- input curves --------------------------------------------------------------------

def _zero(t):
    return np.zeros_like(np.asarray(t, dtype=float))


@dataclass(frozen=True)
class InputCurve:
    """Forcing term ``g = x t^(g0-1)/Gamma(g0) + g_tilde + K * h``.

    Attributes
    ----------
    singular : (x, gamma0) or None
    g_tilde : callable or None
        Treated as 0 when None.
    g_tilde_nondecreasing : bool
    h : callable or None
    delta_growth : float or None
        ``delta`` with ``sup t^delta |g(t)| < inf``.
    raw : callable or None
        An opaque ``g`` without decomposition; excludes the other parts.
    """

    singular: tuple = None
    g_tilde: object = None
    g_tilde_nondecreasing: bool = True
    h: object = None
    delta_growth: float = None
    raw: object = None
    label: str = field(default="custom", compare=False)

    def __post_init__(self):
        if self.singular is not None:
            x, g0 = self.singular
            if not g0 > 0:
                raise ParameterError("gamma0 must be positive")
            object.__setattr__(self, "singular", (float(x), float(g0)))
        if self.raw is not None and (self.singular or self.g_tilde or self.h):
            raise ParameterError("raw curves cannot carry a decomposition")
        if self.delta_growth is not None and not 0 < self.delta_growth < 0.5:
            raise ParameterError("delta_growth must lie in (0, 1/2)")

    @property
    def decomposed(self):
        return self.raw is None

    @property
    def is_singular(self):
        return self.singular is not None and self.singular[1] < 1 and self.singular[0] != 0

    @classmethod
    def constant(cls, x):
        x = float(x)
        return cls(g_tilde=lambda t: np.full_like(np.asarray(t, dtype=float), x),
                   label=f"constant({x:g})")

    @classmethod
    def power(cls, x, gamma0):
        return cls(singular=(x, gamma0), label=f"power(x={x:g}, gamma0={gamma0:g})")

    def describe(self):
        return {"label": self.label, "singular": list(self.singular) if self.singular else None}


def singular_part(g, t):
    if g.singular is None:
        return np.zeros_like(np.asarray(t, dtype=float))
    x, g0 = g.singular
    t = np.asarray(t, dtype=float)
    if g0 < 1 and x != 0 and np.any(t <= 0):
        raise DomainError("singular input curve evaluated at t <= 0")
    with np.errstate(divide="ignore"):
        return x * t ** (g0 - 1) * rgamma(g0)


def eval_g(g, k, t, n_quad=10):
    """Evaluate ``g(t)`` as singular part plus ``g_tilde(t)`` plus ``(K * h)(t)``.

    The convolution is split at ``t/2``; each half uses a composite
    Gauss-Legendre rule of order ``n_quad`` graded geometrically towards its
    own singular end, so neither ``K`` at lag 0 nor ``h`` at 0 is sampled.
    """
    t_arr = np.asarray(t, dtype=float)
    if g.raw is not None:
        out = np.asarray(g.raw(t_arr), dtype=float)
        return float(out) if out.ndim == 0 else out
    out = singular_part(g, t_arr)
    if g.g_tilde is not None:
        out = out + np.asarray(g.g_tilde(t_arr), dtype=float)
    if g.h is not None:
        conv = np.array([_convolve(k, g.h, float(s), n_quad) for s in t_arr.ravel()])
        out = out + conv.reshape(t_arr.shape)
    return float(out) if np.ndim(out) == 0 else out


def _convolve(k, h, t, order):
    if t <= 0:
        return 0.0
    # halves graded in their own variable so small lags and small times stay exact
    u, w = graded_rule(0.0, 0.5 * t, "left", order=order)
    near = np.dot(w, k(u) * h(t - u))
    far = np.dot(w, k(t - u) * h(u))
    return float(near + far)


# -- fractional Ornstein-Uhlenbeck data ----------------------------------------------

def fractional_ou_data(x, alpha, gamma0, beta, b_const=0.0):
    """Input curve and drift of a fractional OU equation with singular start.

    The curve is ``g(t) = x t^(g0-1)/Gamma(g0)`` with the formal decomposition
    ``g_tilde = 0``, ``h(t) = x t^(g0-alpha-1)/Gamma(g0-alpha)``: indeed
    ``K * h = g`` for ``Fractional(alpha)``. ``h`` is locally square integrable
    only for ``g0 > alpha + 1/2``; for ``g0 < alpha`` the factor ``1/Gamma``
    is negative and ``h`` is a formal (distributional) object.
    """
    if not 0.5 < alpha < 2:
        raise ParameterError("alpha must lie in (1/2, 2)")
    curve = InputCurve(singular=(x, gamma0), g_tilde=_zero,
                       label=f"frac_ou(x={x:g}, gamma0={gamma0:g})")
    return curve, linear(b_const, beta)


# -- assumption check ------------------------------------------------------------------

@dataclass
class Clause:
    name: str
    passed: bool
    margin: float
    detail: str = ""


@dataclass
class AssumptionReport:
    """Per-clause outcome of :func:`check_assumption`."""

    clauses: list

    @property
    def passed(self):
        return all(c.passed for c in self.clauses)

    def clause(self, name):
        for c in self.clauses:
            if c.name == name:
                return c
        raise KeyError(name)


def q_bound(gamma, eta, xi):
    """Right-hand side ``2 xi (1 + 1/eta) / (gamma + eta / (2 (2 + eta)))``."""
    return 2 * xi * (1 + 1 / eta) / (gamma + eta / (2 * (2 + eta)))


def fractional_q_bound(alpha, xi):
    """``xi alpha / (alpha - 1/2)^2``, the integrability bound for fractional kernels."""
    return xi * alpha / (alpha - 0.5) ** 2


def _lq_clause(g, k, T, q):
    if g.singular is not None and g.singular[0] != 0:
        g0 = g.singular[1]
        if g0 < 1:
            margin = 1 - q * (1 - g0)
            if margin <= 0:
                return Clause("g_in_Lq", False, margin,
                              f"t^({g0:g}-1) is not q-integrable at 0 for q={q:g}")
    rest = InputCurve(g_tilde=g.g_tilde, h=g.h, raw=g.raw) if g.raw is None else g

    def f(t):
        return np.abs(eval_g(rest, k, t)) ** q

    coarse = integrate(f, 0.0, T, levels=30)
    fine = integrate(f, 0.0, T, levels=60)
    stable = math.isfinite(fine) and abs(fine - coarse) <= 1e-3 * (1 + abs(fine))
    return Clause("g_in_Lq", bool(stable), float(fine), "quadrature of |g|^q (regular part)")


def check_assumption(p, q, eta):
    """Report-only check of the standing assumption for ``p`` with exponents ``q, eta``.

    Clauses
    -------
    ``g_in_Lq``
        ``int_0^T |g|^q`` finite (exact for the power part, quadrature otherwise).
    ``kernel_modulus``
        log-log slope of ``||K||_{L^2[0,h]} + ||K(.+h) - K||_{L^2[0,T]}`` over
        ``h in {0.2, 0.1, 0.05, 0.025}`` is at least ``gamma - 0.05``.
    ``q_condition``
        ``q > 2 xi (1 + 1/eta) / (gamma + eta / (2 (2 + eta)))``.
    ``fractional_q``
        ``q > xi alpha / (alpha - 1/2)^2`` for fractional kernels with ``alpha < 1``.
    ``growth``
        ``|b| + |sigma| <= C (1 + |x|)^xi`` on probes, when constants are declared.
    """
    if not q > 2:
        raise ParameterError("q must exceed 2")
    if not eta > 0:
        raise ParameterError("eta must be positive")
    clauses = [_lq_clause(p.g, p.k, p.T, q)]
    xi = max(p.b.growth_xi, p.sigma.growth_xi)
    try:
        gamma, _ = holder_params(p.k, eta)
    except ParameterError as exc:
        clauses.append(Clause("kernel_modulus", False, -math.inf, str(exc)))
        gamma = None
    if gamma is not None:
        hs = np.array([0.2, 0.1, 0.05, 0.025])
        tot = [sum(modulus_l2(p.k, p.T, h)) for h in hs]
        if min(tot) == 0:
            slope = math.inf
        else:
            slope = float(np.polyfit(np.log(hs), np.log(tot), 1)[0])
        clauses.append(Clause("kernel_modulus", slope >= gamma - 0.05, slope - (gamma - 0.05),
                              f"slope {slope:.4g} vs gamma {gamma:.4g}"))
        rhs = q_bound(gamma, eta, xi)
        clauses.append(Clause("q_condition", q > rhs, q - rhs, f"q > {rhs:.6g}"))
    if isinstance(p.k, FractionalKernel) and p.k.alpha < 1:
        rhs = fractional_q_bound(p.k.alpha, xi)
        clauses.append(Clause("fractional_q", q > rhs, q - rhs, f"q > {rhs:.6g}"))
    cb, cs = p.b.growth_const, p.sigma.growth_const
    if cb is not None and cs is not None:
        rng = np.random.default_rng(0)
        x = rng.uniform(-50, 50, 400)
        t = rng.uniform(0, p.T, 400)
        lhs = np.abs(p.b(t, x)) + np.abs(p.sigma(t, x))
        bound = (cb + cs) * (1 + np.abs(x)) ** xi
        margin = float(np.min(bound - lhs))
        clauses.append(Clause("growth", margin >= -TOL, margin, "probe check"))
    return AssumptionReport(clauses)


# -- comparability -----------------------------------------------------------------

@dataclass
class ComparabilityReport:
    comparable: bool
    clause_i: bool
    clause_ii: bool
    min_gap_i: float
    min_gap_ii: float
    notes: list


def _h_of(curve, k):
    h = curve.h
    formal = None
    notes = []
    if curve.singular is not None and curve.singular[0] != 0:
        if not isinstance(k, FractionalKernel):
            raise PreconditionError("a singular part needs a fractional kernel to be written as K * h")
        x, g0 = curve.singular
        c = float(rgamma(g0 - k.alpha))

        def power_h(t, x=x, c=c, e=g0 - k.alpha - 1):
            return x * c * np.asarray(t, dtype=float) ** e
        formal = power_h
        if g0 <= k.alpha + 0.5:
            notes.append(f"h from the power part is not locally square integrable (gamma0={g0:g})")
    parts = [f for f in (h, formal) if f is not None]
    if not parts:
        return _zero, notes
    return (lambda t: sum(np.asarray(f(t), dtype=float) for f in parts)), notes


def comparable_check(d1, d2, k, probes=200, seed=0, T=1.0, x_range=(-10.0, 10.0)):
    """Probe both comparability conditions for ``(g_i, b_i)``, ``i = 1, 2``.

    (i) ``g_tilde_2 - g_tilde_1 >= -tol`` and nondecreasing on sorted random times;
    (ii) ``b_1(t, x) + h_1(t) <= b_2(t, x) + h_2(t) + tol`` on random ``(t, x)``.
    A power part ``x t^(g0-1)/Gamma(g0)`` of a curve is mapped to
    ``h = x t^(g0-a-1)/Gamma(g0-a)`` for ``Fractional(a)``.
    """
    (g1, b1), (g2, b2) = d1, d2
    if not (g1.decomposed and g2.decomposed):
        raise PreconditionError("both input curves must supply the (g_tilde, h) decomposition")
    rng = np.random.default_rng(seed)
    t = np.sort(rng.uniform(0.0, T, probes))
    t = t[t > 0]
    gt1 = np.asarray(g1.g_tilde(t), dtype=float) if g1.g_tilde else np.zeros_like(t)
    gt2 = np.asarray(g2.g_tilde(t), dtype=float) if g2.g_tilde else np.zeros_like(t)
    diff = gt2 - gt1
    gap_i = float(min(diff.min(), np.diff(diff).min() if diff.size > 1 else 0.0))
    ok_i = gap_i >= -TOL
    h1, n1 = _h_of(g1, k)
    h2, n2 = _h_of(g2, k)
    ts = rng.uniform(0.0, T, probes)
    ts = np.where(ts > 0, ts, T)
    xs = rng.uniform(*x_range, probes)
    lhs = np.asarray(b1(ts, xs), dtype=float) + h1(ts)
    rhs = np.asarray(b2(ts, xs), dtype=float) + h2(ts)
    gap_ii = float(np.min(rhs - lhs))
    ok_ii = gap_ii >= -TOL
    return ComparabilityReport(bool(ok_i and ok_ii), bool(ok_i), bool(ok_ii), gap_i, gap_ii, n1 + n2)


@dataclass
class SveProblem:
    """Full problem instance ``(g, K, b, sigma, T)``."""

    g: InputCurve
    k: object
    b: Coefficient
    sigma: Coefficient
    T: float = 1.0

    def __post_init__(self):
        if not self.T > 0:
            raise ParameterError("T must be positive")

    def g_at(self, t):
        return eval_g(self.g, self.k, t)
