"""Squared Bessel bridges: Karlin-McGregor densities, free and
non-intersecting bridge sampling, Monte Carlo normalizing constants and the
Gibbs resampling move.

Free bridges are sampled sequentially: given the current value v at time u and
the pinned exit value y at time b, the value at the next grid time s is drawn
from the density proportional to q_{s-u}(v, z) q_{b-s}(z, y) by inverse CDF on
an adaptive grid.  Non-intersection is enforced at grid times only (grid
spacing <= (b-a)/256 by default for ensembles meant to approximate the
continuum event).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ._accel import USE_NUMBA, maybe_njit
from .density import _log_q
from .specfun import AlphaIndex, _log_h

DEFAULT_CDF_GRID = 2048
_LOG2 = math.log(2.0)


class AcceptanceFailure(RuntimeError):
    """Raised when acceptance sampling exhausts its attempt budget."""

    def __init__(self, attempts):
        super().__init__(f"no accepted sample after {attempts} attempts")
        self.attempts = attempts


def constant_barrier(c):
    c = float(c)
    return lambda t: c + 0.0 * np.asarray(t)


ZERO_BARRIER = constant_barrier(0.0)
INF_BARRIER = constant_barrier(np.inf)


def piecewise_linear_barrier(times, values):
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    return lambda t: np.interp(t, times, values)


@dataclass(frozen=True)
class BridgeBoundary:
    """Boundary data of a non-intersecting bridge ensemble on (a, b)."""

    k: int
    a: float
    b: float
    x: np.ndarray
    y: np.ndarray
    f: object = ZERO_BARRIER
    g: object = INF_BARRIER

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))
        if self.k < 1 or len(self.x) != self.k or len(self.y) != self.k:
            raise ValueError("entrance/exit data must have length k")
        if not self.a < self.b:
            raise ValueError("need a < b")
        if np.any(self.x < 0.0) or np.any(self.y < 0.0):
            raise ValueError("entrance/exit data must be >= 0")
        if self.k > 1 and (np.any(np.diff(self.x) <= 0.0) or np.any(np.diff(self.y) <= 0.0)):
            raise ValueError("entrance and exit data must be strictly increasing")


@dataclass
class LineEnsemble:
    """k curves sampled on a common strictly increasing time grid."""

    k: int
    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.k, len(self.grid)):
            raise ValueError("values must have shape (k, len(grid))")
        if np.any(np.diff(self.grid) <= 0.0):
            raise ValueError("grid must be strictly increasing")

    def is_ordered(self):
        if self.k == 1:
            return True
        return bool(np.all(np.diff(self.values, axis=0) > 0.0))


# ---------------------------------------------------------------------------
# free bridge sampling kernel


@maybe_njit(cache=True)
def _bridge_paths_njit(alpha, tgrid, x0, y0, uniforms, ngrid):
    nsamp = uniforms.shape[0]
    m = tgrid.shape[0]
    out = np.empty((nsamp, m))
    cdf = np.empty(ngrid)
    zg = np.empty(ngrid)
    for i in range(nsamp):
        out[i, 0] = x0
        v = x0
        for j in range(1, m - 1):
            dt = tgrid[j] - tgrid[j - 1]
            T = tgrid[m - 1] - tgrid[j]
            sig = dt * T / (dt + T)
            mean = v + (tgrid[j] - tgrid[j - 1]) / (tgrid[m - 1] - tgrid[j - 1]) * (y0 - v)
            if mean < 0.0:
                mean = 0.0
            sd = math.sqrt(4.0 * sig * mean + 2.0 * (2.0 * alpha + 2.0) * sig * sig)
            lo = mean - 10.0 * sd
            if lo < 0.0:
                lo = 0.0
            hi = mean + 10.0 * sd + 6.0 * (alpha + 1.0) * sig
            dz = (hi - lo) / (ngrid - 1)
            mx = -1e308
            for l in range(ngrid):
                z = lo + dz * l
                zg[l] = z
                ld = _log_q(alpha, dt, v, z) + _log_q(alpha, T, z, y0)
                cdf[l] = ld
                if ld > mx:
                    mx = ld
            # trapezoid CDF with cdf[0] = 0
            prev_w = math.exp(cdf[0] - mx)
            cdf[0] = 0.0
            for l in range(1, ngrid):
                w = math.exp(cdf[l] - mx)
                cdf[l] = cdf[l - 1] + 0.5 * (prev_w + w)
                prev_w = w
            target = uniforms[i, j - 1] * cdf[ngrid - 1]
            # binary search for the first cdf entry >= target
            lo_i, hi_i = 1, ngrid - 1
            while lo_i < hi_i:
                mid = (lo_i + hi_i) // 2
                if cdf[mid] < target:
                    lo_i = mid + 1
                else:
                    hi_i = mid
            l = lo_i
            c0 = cdf[l - 1]
            c1 = cdf[l]
            w = (target - c0) / (c1 - c0) if c1 > c0 else 0.5
            v = zg[l - 1] + w * (zg[l] - zg[l - 1])
            out[i, j] = v
        out[i, m - 1] = y0
    return out


def _log_q_arr(alpha, t, x, y):
    """Vectorized log q_t(x, y) on broadcast arrays (numpy fallback path)."""
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    z = np.sqrt(x * y) / t
    from .specfun import log_h_vec

    lh = log_h_vec(alpha, z.ravel()).reshape(z.shape)
    with np.errstate(divide="ignore"):
        ly = alpha * np.log(y) if alpha > 0.0 else np.zeros_like(y)
    out = -_LOG2 - (alpha + 1.0) * math.log(t) + ly - (x + y) / (2.0 * t) + lh
    if alpha > 0.0:
        out = np.where(y == 0.0, -np.inf, out)
    return out


def _bridge_paths_numpy(alpha, tgrid, x0, y0, uniforms, ngrid):
    nsamp = uniforms.shape[0]
    m = tgrid.shape[0]
    out = np.empty((nsamp, m))
    out[:, 0] = x0
    v = np.full(nsamp, float(x0))
    unit = np.linspace(0.0, 1.0, ngrid)
    for j in range(1, m - 1):
        dt = tgrid[j] - tgrid[j - 1]
        T = tgrid[m - 1] - tgrid[j]
        sig = dt * T / (dt + T)
        mean = np.maximum(v + (tgrid[j] - tgrid[j - 1]) / (tgrid[m - 1] - tgrid[j - 1]) * (y0 - v), 0.0)
        sd = np.sqrt(4.0 * sig * mean + 2.0 * (2.0 * alpha + 2.0) * sig * sig)
        lo = np.maximum(mean - 10.0 * sd, 0.0)
        hi = mean + 10.0 * sd + 6.0 * (alpha + 1.0) * sig
        zg = lo[:, None] + (hi - lo)[:, None] * unit[None, :]
        logd = _log_q_arr(alpha, dt, v[:, None], zg) + _log_q_arr(alpha, T, zg, y0)
        logd -= logd.max(axis=1, keepdims=True)
        dens = np.exp(logd)
        cdf = np.zeros_like(dens)
        np.cumsum(0.5 * (dens[:, 1:] + dens[:, :-1]), axis=1, out=cdf[:, 1:])
        target = uniforms[:, j - 1] * cdf[:, -1]
        idxs = np.clip((cdf < target[:, None]).sum(axis=1), 1, ngrid - 1)
        rows = np.arange(nsamp)
        c1 = cdf[rows, idxs]
        c0 = cdf[rows, idxs - 1]
        z1 = zg[rows, idxs]
        z0 = zg[rows, idxs - 1]
        w = np.where(c1 > c0, (target - c0) / np.maximum(c1 - c0, 1e-300), 0.5)
        v = z0 + w * (z1 - z0)
        out[:, j] = v
    out[:, m - 1] = y0
    return out


_bridge_paths = _bridge_paths_njit if USE_NUMBA else _bridge_paths_numpy


def sample_free_bridge_batch(idx, a, b, x0, y0, grid, n_samples, rng, ngrid=DEFAULT_CDF_GRID):
    """n_samples independent squared Bessel bridge paths on the given grid."""
    grid = np.asarray(grid, dtype=float)
    if len(grid) < 2 or grid[0] != a or grid[-1] != b or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing from a to b")
    n_inner = max(len(grid) - 2, 0)
    uniforms = rng.random((n_samples, n_inner)) if n_inner else np.empty((n_samples, 0))
    return _bridge_paths(idx.alpha, grid, float(x0), float(y0), uniforms, int(ngrid))


def sample_free_bridge(idx, a, b, x0, y0, grid, seed=0, ngrid=DEFAULT_CDF_GRID):
    """One squared Bessel bridge path pinned to x0 at a and y0 at b."""
    rng = np.random.default_rng(seed)
    return sample_free_bridge_batch(idx, a, b, x0, y0, grid, 1, rng, ngrid)[0]


# ---------------------------------------------------------------------------
# Karlin-McGregor joint density


def km_density(idx, boundary, s, z):
    """Unnormalized KM density det[q_{s-a}(x_i, z_j)] det[q_{b-s}(z_i, y_j)].

    Vanishes outside the Weyl chamber or outside the barriers at time s.
    """
    if not (boundary.a < s < boundary.b):
        raise ValueError("s must lie strictly inside (a, b)")
    z = np.asarray(z, dtype=float)
    if len(z) != boundary.k:
        raise ValueError("z must have length k")
    if np.any(np.diff(z) <= 0.0) if boundary.k > 1 else False:
        return 0.0
    fl = float(np.asarray(boundary.f(s)))
    gu = float(np.asarray(boundary.g(s)))
    if np.any(z <= fl) or np.any(z >= gu):
        return 0.0
    alpha = idx.alpha
    k = boundary.k
    t1 = s - boundary.a
    t2 = boundary.b - s
    L1 = np.array([[_log_q(alpha, t1, boundary.x[i], z[j]) for j in range(k)] for i in range(k)])
    L2 = np.array([[_log_q(alpha, t2, z[i], boundary.y[j]) for j in range(k)] for i in range(k)])

    def scaled_det(L):
        m = L.max()
        if m == -np.inf:
            return 0.0, 0.0
        return float(np.linalg.det(np.exp(L - m))), k * m

    d1, e1 = scaled_det(L1)
    d2, e2 = scaled_det(L2)
    return d1 * d2 * math.exp(e1 + e2)


# ---------------------------------------------------------------------------
# acceptance machinery


def _accepted_mask(boundary, grid, paths):
    """Boolean mask of samples whose k paths are ordered and inside (f, g).

    paths: array (k, n, m).  Checks run over interior grid times only; the
    endpoint data is fixed and assumed admissible.
    """
    inner = slice(1, len(grid) - 1)
    tg = grid[inner]
    f_vals = np.asarray(boundary.f(tg), dtype=float)
    g_vals = np.asarray(boundary.g(tg), dtype=float)
    ok = np.all(paths[0][:, inner] > f_vals, axis=1)
    ok &= np.all(paths[-1][:, inner] < g_vals, axis=1)
    for i in range(boundary.k - 1):
        ok &= np.all(paths[i][:, inner] < paths[i + 1][:, inner], axis=1)
    return ok


def estimate_Z(idx, boundary, n_samples, seed, grid=None, ngrid=DEFAULT_CDF_GRID):
    """Monte Carlo estimate of the non-intersecting probability Z.

    Returns (estimate, standard_error).  The estimate is the acceptance
    fraction of independent free k-tuples on the grid; deterministic given the
    seed.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if grid is None:
        # default spacing (b - a)/256
        grid = np.linspace(boundary.a, boundary.b, 257)
    grid = np.asarray(grid, dtype=float)
    rng = np.random.default_rng(seed)
    paths = np.stack(
        [
            sample_free_bridge_batch(
                idx, boundary.a, boundary.b, boundary.x[i], boundary.y[i], grid, n_samples, rng, ngrid
            )
            for i in range(boundary.k)
        ]
    )
    acc = _accepted_mask(boundary, grid, paths)
    p = float(acc.mean())
    se = math.sqrt(max(p * (1.0 - p), 1.0 / n_samples) / n_samples)
    return p, se


def sample_nonintersecting(idx, boundary, grid, seed, max_attempts=10**6,
                           ngrid=DEFAULT_CDF_GRID, batch=8):
    """First accepted non-intersecting k-tuple of free bridges on the grid.

    Returns (LineEnsemble, attempts).  Raises AcceptanceFailure when the
    attempt budget is exhausted.
    """
    grid = np.asarray(grid, dtype=float)
    inner = grid[1:-1]
    if len(inner):
        f_vals = np.asarray(boundary.f(inner), dtype=float)
        g_vals = np.asarray(boundary.g(inner), dtype=float)
        if np.any(f_vals >= g_vals):
            raise AcceptanceFailure(0)
    rng = np.random.default_rng(seed)
    attempts = 0
    while attempts < max_attempts:
        nb = min(batch, max_attempts - attempts)
        paths = np.stack(
            [
                sample_free_bridge_batch(
                    idx, boundary.a, boundary.b, boundary.x[i], boundary.y[i], grid, nb, rng, ngrid
                )
                for i in range(boundary.k)
            ]
        )
        acc = _accepted_mask(boundary, grid, paths)
        hits = np.flatnonzero(acc)
        if len(hits):
            attempts += int(hits[0]) + 1
            values = paths[:, hits[0], :]
            return LineEnsemble(boundary.k, grid, values), attempts
        attempts += nb
    raise AcceptanceFailure(attempts)


def resample_gibbs(idx, ensemble, i_lo, i_hi, interval, seed, max_attempts=10**6,
                   ngrid=DEFAULT_CDF_GRID):
    """Gibbs move: redraw curves i_lo..i_hi on (a, b) given everything else.

    (a, b) must be grid times of the ensemble; the barriers are the adjacent
    curves (or 0 below, +inf above) and the entrance/exit data are read off at
    a and b.  Returns a new LineEnsemble; values outside the block unchanged.
    """
    a, b = interval
    if not (0 <= i_lo <= i_hi < ensemble.k):
        raise ValueError("curve indices out of range")
    gi_a = int(np.searchsorted(ensemble.grid, a))
    gi_b = int(np.searchsorted(ensemble.grid, b))
    if gi_a >= len(ensemble.grid) or ensemble.grid[gi_a] != a or gi_b >= len(ensemble.grid) or ensemble.grid[gi_b] != b:
        raise ValueError("(a, b) must be grid times of the ensemble")
    sub = ensemble.grid[gi_a : gi_b + 1]
    new_values = ensemble.values.copy()
    if len(sub) <= 2:
        return LineEnsemble(ensemble.k, ensemble.grid, new_values)

    if i_lo > 0:
        low = ensemble.values[i_lo - 1, gi_a : gi_b + 1]
        f = lambda t: np.interp(t, sub, low)
    else:
        f = ZERO_BARRIER
    if i_hi < ensemble.k - 1:
        high = ensemble.values[i_hi + 1, gi_a : gi_b + 1]
        g = lambda t: np.interp(t, sub, high)
    else:
        g = INF_BARRIER
    boundary = BridgeBoundary(
        k=i_hi - i_lo + 1,
        a=a,
        b=b,
        x=ensemble.values[i_lo : i_hi + 1, gi_a],
        y=ensemble.values[i_lo : i_hi + 1, gi_b],
        f=f,
        g=g,
    )
    block, _ = sample_nonintersecting(idx, boundary, sub, seed, max_attempts, ngrid)
    new_values[i_lo : i_hi + 1, gi_a : gi_b + 1] = block.values
    return LineEnsemble(ensemble.k, ensemble.grid, new_values)
