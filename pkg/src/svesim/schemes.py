"""Path simulation: splitting scheme, left-point Euler baseline, coupled runs.

All schemes live on the outer grid ``t_k = k T / N`` and consume Brownian
noise on the inner grid of ``N M`` sub-steps of width ``h = T / (N M)``.
Noise comes from a :class:`BrownianDriver`, which makes every increment a
pure function of ``(seed, path_id, index)``. Paths are processed in
fixed-size chunks; every reduction runs along a single path, so results are
bitwise independent of chunking and of the number of worker threads.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ParameterError, PreconditionError
from .model import SveProblem, eval_g

BLOCK = 4096
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class SimConfig:
    """Discretisation and Monte Carlo size.

    Attributes
    ----------
    T : float
        Horizon.
    N : int
        Outer grid steps.
    M : int
        Inner Euler-Maruyama sub-steps per outer step.
    n_paths : int
    seed : int
        64-bit seed of the counter-based generator.
    chunk_size : int
        Paths simulated together; affects speed only.
    threads : int
        Worker threads; affects speed only.
    """

    T: float
    N: int
    M: int = 1
    n_paths: int = 1
    seed: int = 0
    chunk_size: int = 512
    threads: int = 1

    def __post_init__(self):
        if not self.T > 0:
            raise ParameterError("T must be positive")
        for name in ("N", "M", "n_paths", "chunk_size", "threads"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ParameterError(f"{name} must be a positive integer, got {v}")
        if not 0 <= int(self.seed) <= _MASK64:
            raise ParameterError("seed must be a 64-bit unsigned integer")

    @property
    def dt(self):
        return self.T / self.N

    @property
    def grid(self):
        return self.T * np.arange(1, self.N + 1) / self.N

    def replace(self, **changes):
        fields = dict(T=self.T, N=self.N, M=self.M, n_paths=self.n_paths, seed=self.seed,
                      chunk_size=self.chunk_size, threads=self.threads)
        fields.update(changes)
        return SimConfig(**fields)


@dataclass
class PathEnsemble:
    """Simulated values ``values[path, k] = X(t_{k+1})``."""

    grid: np.ndarray
    values: np.ndarray
    scheme_tag: str
    left_limits: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[1] != self.grid.size:
            raise ParameterError("values must be (n_paths, len(grid))")
        if np.any(np.diff(self.grid) <= 0):
            raise ParameterError("grid must be strictly increasing")
        if self.left_limits is not None and np.shape(self.left_limits) != self.values.shape:
            raise ParameterError("left_limits must match values")

    @property
    def n_paths(self):
        return self.values.shape[0]


class BrownianDriver:
    """Counter-based source of Gaussian increments.

    Standard normal number ``i`` of path ``p`` is drawn from block
    ``i // 4096`` of a Philox stream keyed by ``(seed, p)``, with the block
    index placed in the counter. Any ``(seed, p, i)`` therefore maps to one
    fixed variate regardless of evaluation order.

    Parameters
    ----------
    seed : int
    resolution : int, optional
        Number of finest sub-steps on ``[0, T]``. When set, coarser
        increments are sums of consecutive finest increments, so runs at
        different resolutions share one Brownian path.
    """

    def __init__(self, seed, resolution=None):
        seed = int(seed)
        if not 0 <= seed <= _MASK64:
            raise ParameterError("seed must be a 64-bit unsigned integer")
        if resolution is not None and int(resolution) < 1:
            raise ParameterError("resolution must be positive")
        self.seed = seed
        self.resolution = None if resolution is None else int(resolution)

    def _block(self, path_id, b):
        bitgen = np.random.Philox(key=np.array([self.seed, path_id], dtype=np.uint64),
                                  counter=np.array([0, 0, b, 0], dtype=np.uint64))
        return np.random.Generator(bitgen).standard_normal(BLOCK)

    def normals(self, path_id, start, n):
        """Standard normals with global indices ``start .. start + n - 1`` of one path."""
        if n <= 0:
            return np.empty(0)
        first, last = start // BLOCK, (start + n - 1) // BLOCK
        data = np.concatenate([self._block(path_id, b) for b in range(first, last + 1)])
        off = start - first * BLOCK
        return data[off:off + n]

    def increments(self, path_ids, n, T):
        """Brownian increments over ``n`` equal steps of ``[0, T]``, one row per path."""
        res = n if self.resolution is None else self.resolution
        if res % n:
            raise PreconditionError(f"{n} steps do not divide the driver resolution {res}")
        dt = T / res
        scale = math.sqrt(dt)
        out = np.empty((len(path_ids), n))
        for row, pid in enumerate(path_ids):
            fine = self.normals(int(pid), 0, res) * scale
            out[row] = fine if res == n else fine.reshape(n, res // n).sum(axis=1)
        return out


def brownian_increments(drv, path_id, n, dt, start=0):
    """``n`` independent ``N(0, dt)`` variates starting at global index ``start``."""
    if not dt > 0:
        raise ParameterError("dt must be positive")
    return drv.normals(int(path_id), int(start), int(n)) * math.sqrt(dt)


# -- helpers ---------------------------------------------------------------------

def _chunks(n_paths, size):
    return [(a, min(a + size, n_paths)) for a in range(0, n_paths, size)]


def _run_chunks(c, worker):
    ranges = _chunks(c.n_paths, c.chunk_size)
    if c.threads > 1 and len(ranges) > 1:
        with ThreadPoolExecutor(max_workers=c.threads) as pool:
            parts = list(pool.map(worker, ranges))
    else:
        parts = [worker(r) for r in ranges]
    return parts


def _g_grid(p, c):
    return np.asarray(eval_g(p.g, p.k, c.grid), dtype=float)


def _meta(p, c, tag, drv):
    return {"scheme": tag, "seed": drv.seed, "T": c.T, "N": c.N, "M": c.M,
            "n_paths": c.n_paths, "kernel": p.k.describe(),
            "b": p.b.describe(), "sigma": p.sigma.describe(), "g": p.g.describe()}


# -- splitting scheme ------------------------------------------------------------

def simulate_splitting(p: SveProblem, c: SimConfig, drv: BrownianDriver) -> PathEnsemble:
    """Splitting scheme with an inner Euler-Maruyama solve on each outer step.

    For ``k = 1..N`` the left limit ``X(t_k-) = g(t_k) + sum_{l<k} K(t_k - t_l) I_l``
    starts an SDE with drift ``K(0+) b`` and diffusion ``K(0+) sigma``, solved by
    ``M`` Euler-Maruyama sub-steps over ``[t_{k-1}, t_k]``. Its end value is
    ``X(t_k)`` and ``I_k = (X(t_k) - X(t_k-)) / K(0+)``.

    Left limits are accumulated in telescoped form,
    ``X(t_k-) = X(t_{k-1}) + g(t_k) - g(t_{k-1}) + sum_{l<k} (K(t_k - t_l) - K(t_{k-1} - t_l)) I_l``,
    which is algebraically the same sum; for a constant kernel the correction
    vanishes exactly and the scheme is Euler-Maruyama on ``N M`` steps.

    Raises
    ------
    PreconditionError
        ``K(0+)`` infinite or not positive; truncate a completely monotone
        kernel (sum-of-exponentials, Bernstein truncation) first.
    """
    k0 = p.k.k0
    if not (math.isfinite(k0) and k0 > 0):
        raise PreconditionError(
            f"splitting needs 0 < K(0+) < inf, got K(0+) = {k0} for {p.k.label()}; "
            "approximate the kernel by soe_from_fractional and/or bernstein_truncate first")
    N, M = c.N, c.M
    h = c.T / (N * M)
    g = _g_grid(p, c)
    lags = c.dt * np.arange(1, N)
    kv = np.concatenate([[k0], np.asarray(p.k(lags), dtype=float)]) if N > 1 else np.array([k0])
    # diff[j] = K((j+1) dt) - K(j dt), the weight of I_l at lag j = k-1-l
    diff = kv[1:] - kv[:-1]
    # constant kernels carry no memory: skip the all-zero correction sums
    memory = bool(np.any(diff))
    b, sig = p.b, p.sigma

    def worker(rng_):
        a, z = rng_
        dw = drv.increments(range(a, z), N * M, c.T)
        n = z - a
        incr = np.zeros((n, N))
        left = np.empty((n, N))
        vals = np.empty((n, N))
        prev = None
        for k in range(N):
            if k == 0:
                xl = np.full(n, g[0])
            else:
                xl = prev + (g[k] - g[k - 1])
                if memory:
                    xl = xl + np.sum(incr[:, :k] * diff[k - 1::-1], axis=1)
            xi = xl.copy()
            base = k * M
            for j in range(M):
                s = (base + j) * h
                xi = xi + (k0 * b(s, xi)) * h + (k0 * sig(s, xi)) * dw[:, base + j]
            left[:, k] = xl
            vals[:, k] = xi
            incr[:, k] = (xi - xl) / k0
            prev = xi
        return vals, left

    parts = _run_chunks(c, worker)
    values = np.concatenate([v for v, _ in parts])
    left = np.concatenate([lft for _, lft in parts])
    return PathEnsemble(c.grid, values, "Splitting", left, _meta(p, c, "Splitting", drv))


# -- Euler baseline ----------------------------------------------------------------

def _euler_weights(k, N, dt):
    lags = dt * np.arange(1, N + 1)
    if math.isfinite(k.k0):
        return np.asarray(k(lags), dtype=float)
    w = np.empty(N)
    w[0] = k(0.5 * dt)
    if N > 1:
        w[1:] = k(lags[1:])
    return w


def simulate_euler(p: SveProblem, c: SimConfig, drv: BrownianDriver) -> PathEnsemble:
    """Left-point Euler discretisation of the Volterra equation.

    ``X(t_k) = g(t_k) + sum_{l=0}^{k-1} K(t_k - t_l) [b(t_l, X_l) dt + sigma(t_l, X_l) dB_l]``
    where ``dB_l`` is the sum of the ``M`` sub-increments of ``[t_l, t_{l+1}]``
    (so the noise matches :func:`simulate_splitting`). For a kernel singular
    at 0 the ``l = k-1`` weight is ``K(dt/2)``. The starting value ``X_0`` is
    ``g(0)`` when finite and ``g(t_1)`` for a singular ``g``.
    """
    N, M = c.N, c.M
    dt = c.dt
    g = _g_grid(p, c)
    try:
        g0 = float(eval_g(p.g, p.k, 0.0))
    except DomainError:
        g0 = math.nan
    if not math.isfinite(g0):
        g0 = g[0]
    w = _euler_weights(p.k, N, dt)
    times = dt * np.arange(N)
    b, sig = p.b, p.sigma

    def worker(rng_):
        a, z = rng_
        dw = drv.increments(range(a, z), N * M, c.T)
        db = dw.reshape(z - a, N, M).sum(axis=2) if M > 1 else dw
        n = z - a
        jumps = np.empty((n, N))
        vals = np.empty((n, N))
        x = np.full(n, g0)
        for k in range(N):
            jumps[:, k] = b(times[k], x) * dt + sig(times[k], x) * db[:, k]
            x = g[k] + np.sum(jumps[:, :k + 1] * w[k::-1], axis=1)
            vals[:, k] = x
        return vals

    values = np.concatenate(_run_chunks(c, worker))
    return PathEnsemble(c.grid, values, "Euler", None, _meta(p, c, "Euler", drv))


SCHEMES = {"splitting": simulate_splitting, "euler": simulate_euler}


def simulate_coupled(p1, p2, c, drv, scheme="splitting"):
    """Run one scheme on two problems with the same Brownian paths.

    Raises
    ------
    PreconditionError
        The problems differ in kernel or diffusion coefficient.
    """
    if p1.k != p2.k:
        raise PreconditionError("coupled problems must share the kernel")
    if p1.sigma != p2.sigma:
        raise PreconditionError("coupled problems must share the diffusion coefficient")
    if p1.T != p2.T:
        raise PreconditionError("coupled problems must share the horizon")
    try:
        run = SCHEMES[scheme.lower()]
    except KeyError:
        raise ParameterError(f"unknown scheme {scheme!r}") from None
    return run(p1, c, drv), run(p2, c, drv)


def euler_maruyama(b, sigma, x0, T, n_steps, drv, path_ids, scale=1.0):
    """Classical Euler-Maruyama for ``dX = scale b dt + scale sigma dB``.

    Uses the driver's increments on ``n_steps`` steps, with the same update
    expression as the splitting inner solver.
    """
    h = T / n_steps
    dw = drv.increments(path_ids, n_steps, T)
    x = np.full(len(path_ids), float(x0))
    out = np.empty((len(path_ids), n_steps))
    for i in range(n_steps):
        s = i * h
        x = x + (scale * b(s, x)) * h + (scale * sigma(s, x)) * dw[:, i]
        out[:, i] = x
    return out
