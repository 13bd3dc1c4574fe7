"""Two-parameter Mittag-Leffler function and fractional Ornstein-Uhlenbeck formulas.

``E_{a,b}(z) = sum_n z^n / Gamma(a n + b)`` is evaluated for real ``z`` and
``a in (0, 2]`` by one of three methods:

* a double-precision power series when ``z >= 0`` (no cancellation) or when
  the largest term is small;
* the algebraic asymptotic expansion ``-sum_k z^(-k) / Gamma(b - a k)``,
  optimally truncated, plus the exponentially small or oscillating saddle
  contributions for ``a in (1, 2]``, once ``z <= -asymptotic_threshold(a, b)``;
* an mpmath power series whose working precision covers the cancellation
  between the largest term and the result, in between.
"""
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import mpmath as mp
import numpy as np
from scipy import integrate
from scipy.special import gammaln, rgamma

from .errors import AccuracyWarning, ParameterError

_LN10 = math.log(10.0)
# largest term magnitude for which the double-precision series is trusted at z < 0
_FLOAT_SERIES_MAX_TERM = 10.0
_ASYM_TOL = 1e-15
_ASYM_TERMS = 80


@dataclass(frozen=True)
class MlQuery:
    alpha: float
    beta: float
    z: float

    def __post_init__(self):
        _validate(self.alpha, self.beta)

    def evaluate(self):
        return ml(self.alpha, self.beta, self.z)


@dataclass(frozen=True)
class SignReport:
    """Result of scanning ``E_{a,b}(-lam t^a)`` on a geometric grid."""

    first_negative_t: float | None
    min_value: float
    argmin_t: float
    threshold: float = -1e-6

    @property
    def negative_found(self):
        return self.first_negative_t is not None


def _validate(alpha, beta):
    if not 0 < alpha <= 2:
        raise ParameterError(f"alpha must lie in (0, 2], got {alpha}")
    if not beta > 0:
        raise ParameterError(f"beta must be positive, got {beta}")


def _log_terms(alpha, beta, x):
    """``log |z^n / Gamma(a n + b)|`` for ``|z| = x`` over enough ``n`` to pass the peak."""
    lx = math.log(x)
    n_end = 64
    while True:
        n = np.arange(n_end, dtype=float)
        lt = n * lx - gammaln(alpha * n + beta)
        peak = int(np.argmax(lt))
        if peak < n_end - 2 and lt[-1] < lt[peak] - 90.0:
            return lt
        n_end *= 2


def _float_series(alpha, beta, z, lt):
    n = np.arange(lt.size)
    sign = np.where((n % 2 == 1) & (z < 0), -1.0, 1.0)
    peak = float(lt.max())
    if z > 0 and peak > 700:
        scaled = math.fsum(np.exp(lt - peak))
        return math.inf if peak + math.log(scaled) > 709.7 else math.exp(peak) * scaled
    return math.fsum(sign * np.exp(lt))


def _mp_series(alpha, beta, z, peak_log):
    dps = int(25 + max(peak_log, 0.0) / _LN10)
    with mp.workdps(dps):
        a, b, zz = mp.mpf(alpha), mp.mpf(beta), mp.mpf(z)
        total = mp.mpf(0)
        power = mp.mpf(1)
        n = 0
        small = mp.mpf(10) ** -22
        past_peak = False
        prev = None
        while True:
            term = power * mp.rgamma(a * n + b)
            total += term
            mag = abs(term)
            if prev is not None and mag < prev:
                past_peak = True
            if past_peak and mag < small:
                break
            prev = mag
            power *= zz
            n += 1
        return float(total)


@lru_cache(maxsize=256)
def _asym_coeffs(alpha, beta):
    # exact arguments: beta - alpha k formed in extended precision, then 1/Gamma
    with mp.workdps(40):
        a, b = mp.mpf(alpha), mp.mpf(beta)
        return np.array([float(mp.rgamma(b - a * k)) for k in range(1, _ASYM_TERMS + 1)])


def _asymptotic(alpha, beta, x):
    """Return ``(value, error_estimate)`` of ``E_{a,b}(-x)`` for large ``x > 0``."""
    c = _asym_coeffs(alpha, beta)
    k = np.arange(1, c.size + 1)
    if not np.any(c):
        # every coefficient sits exactly on a pole of Gamma: no algebraic part
        value, err = 0.0, 0.0
    else:
        # |1/Gamma(-y)| <= Gamma(1+y)/pi; the smooth envelope avoids being fooled
        # by coefficients that vanish near poles
        y = alpha * k - beta
        # 1/Gamma is at most 1.13 on [0, inf)
        env_log = np.where(y > 0, gammaln(1 + np.maximum(y, 0)) - math.log(math.pi),
                           math.log(1.13)) - k * math.log(x)
        cut = int(np.argmin(env_log))
        err = float(math.exp(env_log[cut]))
        terms = -c[:cut] * (-1.0) ** k[:cut] * np.exp(-k[:cut] * math.log(x))
        value = math.fsum(terms)
    if alpha > 1:
        zeta = x ** (1 / alpha) * complex(math.cos(math.pi / alpha), math.sin(math.pi / alpha))
        value += (2 / alpha) * (zeta ** (1 - beta) * np.exp(zeta)).real
    elif alpha == 1:
        # Stokes line: the exp(-x) contribution is not represented, so count it as error
        err += math.exp(-x) * x ** (1 - beta)
    return value, err


@lru_cache(maxsize=256)
def asymptotic_threshold(alpha, beta):
    """Smallest ``x`` from which ``E_{a,b}(-x)`` is taken from the asymptotic expansion.

    It is the point where the estimated truncation error first drops below
    1e-15, located by bisection; ``inf`` when no such point exists below 1e8.
    """
    _validate(alpha, beta)
    grid = np.geomspace(1.0, 1e8, 161)
    ok = [_asymptotic(alpha, beta, x)[1] <= _ASYM_TOL for x in grid]
    if not any(ok):
        return math.inf
    i = ok.index(True)
    if i == 0:
        return float(grid[0])
    lo, hi = grid[i - 1], grid[i]
    for _ in range(60):
        mid = math.sqrt(lo * hi)
        if _asymptotic(alpha, beta, mid)[1] <= _ASYM_TOL:
            hi = mid
        else:
            lo = mid
    return float(hi)


def _ml_scalar(alpha, beta, z):
    if z == 0:
        return float(rgamma(beta))
    if not math.isfinite(z):
        if z > 0:
            return math.inf
        return 0.0
    x = abs(z)
    if z < 0 and x >= asymptotic_threshold(alpha, beta):
        value, err = _asymptotic(alpha, beta, x)
        if err > 1e-10:
            warnings.warn(f"asymptotic Mittag-Leffler error estimate {err:.2e} at z={z}",
                          AccuracyWarning, stacklevel=3)
        return value
    lt = _log_terms(alpha, beta, x)
    peak = float(lt.max())
    if z > 0 or peak <= math.log(_FLOAT_SERIES_MAX_TERM):
        return _float_series(alpha, beta, z, lt)
    return _mp_series(alpha, beta, z, peak)


def ml(alpha, beta, z):
    """Evaluate the Mittag-Leffler function ``E_{alpha,beta}(z)`` for real ``z``.

    Parameters
    ----------
    alpha : float
        In ``(0, 2]``.
    beta : float
        Positive.
    z : float or array_like

    Returns
    -------
    float or ndarray
        Same shape as ``z``. Overflow for large positive ``z`` yields ``inf``.

    Notes
    -----
    The absolute error is below 1e-10 for ``|z| <= 50``; beyond the asymptotic
    threshold the truncation error estimate is below 1e-15, and an
    :class:`AccuracyWarning` is emitted should it ever exceed 1e-10.
    """
    _validate(alpha, beta)
    alpha, beta = float(alpha), float(beta)
    zs = np.asarray(z, dtype=float)
    if zs.ndim == 0:
        return _ml_scalar(alpha, beta, float(zs))
    out = np.array([_ml_scalar(alpha, beta, float(v)) for v in zs.ravel()])
    return out.reshape(zs.shape)


def ml_sign_scan(alpha, beta, t_max, n_grid=400, lam=1.0, t_min=None, threshold=-1e-6):
    """Scan ``E_{a,b}(-lam t^a)`` on a geometric grid over ``(0, t_max]``.

    The grid runs from ``t_min`` (default ``t_max * 1e-4``) to ``t_max``. A value
    counts as negative when it is below ``threshold``.
    """
    _validate(alpha, beta)
    if not t_max > 0 or n_grid < 2:
        raise ParameterError("need t_max > 0 and n_grid >= 2")
    t_lo = t_max * 1e-4 if t_min is None else t_min
    t = np.geomspace(t_lo, t_max, n_grid)
    vals = ml(alpha, beta, -lam * t ** alpha)
    neg = np.flatnonzero(vals < threshold)
    i = int(np.argmin(vals))
    first = float(t[neg[0]]) if neg.size else None
    return SignReport(first, float(vals[i]), float(t[i]), threshold)


def laplace_identity_check(alpha, gamma, lam, s, T_trunc=200.0, tol=1e-8):
    """Compare a quadrature of ``int_0^T t^(g-1) E_{a,g}(-lam t^a) e^(-s t) dt`` with ``s^(a-g)/(s^a+lam)``.

    The substitution ``t = u^(1/g)`` removes the ``t^(g-1)`` singularity. An
    :class:`AccuracyWarning` is issued when the neglected tail beyond
    ``T_trunc`` may exceed ``tol``.

    Returns
    -------
    (numeric, analytic) : tuple of float
    """
    _validate(alpha, gamma)
    if not gamma < alpha:
        raise ParameterError("need gamma < alpha")
    if not (s > 0 and lam > 0 and T_trunc > 0):
        raise ParameterError("need s > 0, lam > 0 and T_trunc > 0")

    def integrand(u):
        t = u ** (1 / gamma)
        return _ml_scalar(alpha, gamma, -lam * t ** alpha) * math.exp(-s * t) / gamma

    u_max = T_trunc ** gamma
    # breakpoints on the natural time scales 1/s and 1 keep quad from missing the bulk
    marks = sorted({min(v, T_trunc) ** gamma for v in (0.1 / s, 1.0 / s, 1.0, 5.0 / s, 20.0 / s)})
    edges = [0.0] + [m for m in marks if 0 < m < u_max] + [u_max]
    numeric = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(integrand, a, b, limit=200, epsabs=1e-13, epsrel=1e-12)
        numeric += val
    # integrand decays at least like exp(-s t); bound the tail by its endpoint value / s
    tail = abs(T_trunc ** (gamma - 1) * _ml_scalar(alpha, gamma, -lam * T_trunc ** alpha)) \
        * math.exp(-s * T_trunc) / s
    if tail > tol:
        warnings.warn(f"truncation at T={T_trunc} leaves a tail of about {tail:.2e}",
                      AccuracyWarning, stacklevel=2)
    analytic = s ** (alpha - gamma) / (s ** alpha + lam)
    return numeric, analytic


def frac_ou_mean(x, alpha, gamma0, beta, b, t):
    """Mean of the fractional Ornstein-Uhlenbeck solution.

    ``x t^(g0-1) E_{a,g0}(beta t^a) + b int_0^t s^(a-1) E_{a,a}(beta s^a) ds``.
    The integral is computed after the substitution ``s = u^(1/a)``, which
    turns it into ``(1/a) int_0^(t^a) E_{a,a}(beta u) du`` with a smooth integrand.
    """
    if not t > 0:
        raise ParameterError("t must be positive")
    if not 0.5 < alpha < 2:
        raise ParameterError("alpha must lie in (1/2, 2)")
    if not gamma0 > 0:
        raise ParameterError("gamma0 must be positive")
    homog = x * t ** (gamma0 - 1) * ml(alpha, gamma0, beta * t ** alpha) if x else 0.0
    if not b:
        return float(homog)
    forced, _ = integrate.quad(lambda u: _ml_scalar(alpha, alpha, beta * u), 0.0, t ** alpha,
                               limit=200, epsabs=1e-13, epsrel=1e-12)
    return float(homog + b * forced / alpha)
