"""Glauber dynamics on discretized non-intersecting Bessel bridges.

State space: k curves of K-1 = 2^ell - 1 interior heights, each height an
integer multiple of 1/M in [0, M] (M^2 + 1 levels).  Heights live in
square-root (Bessel) coordinates; barriers are checked against the squared
heights.  A configuration's weight is the product over curves and slots of
the Bessel transition density p_{2^{-ell}} between consecutive heights, times
the indicator of ordering and barrier constraints at each interior slot.

Updates are Metropolis moves of +-1/M at a uniformly random site/direction
(uniformization of the Poisson clocks), accepted iff the weight ratio of the
two adjacent transition factors beats a shared uniform.  Two chains driven by
the same event stream stay ordered when their boundary data are ordered; the
coupled runner counts any violations.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._accel import USE_NUMBA, maybe_njit
from .bridge import BridgeBoundary, LineEnsemble
from .density import _log_p

_NEG_INF = float("-inf")


@dataclass(frozen=True)
class DiscreteConfig:
    """k x (K-1) interior heights, each an integer multiple of 1/M in [0, M]."""

    k: int
    M: int
    ell: int
    heights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "heights", np.asarray(self.heights, dtype=float))
        K = 2**self.ell
        if self.heights.shape != (self.k, K - 1):
            raise ValueError("heights must have shape (k, 2**ell - 1)")
        lv = self.heights * self.M
        if np.any(self.heights < 0.0) or np.any(self.heights > self.M) or np.any(
            np.abs(lv - np.rint(lv)) > 1e-9
        ):
            raise ValueError("heights must be multiples of 1/M in [0, M]")

    @property
    def K(self):
        return 2**self.ell

    def levels(self):
        """Integer height levels (height = level / M)."""
        return np.rint(self.heights * self.M).astype(np.int64)

    @classmethod
    def from_levels(cls, M, ell, levels):
        levels = np.asarray(levels, dtype=np.int64)
        return cls(levels.shape[0], M, ell, levels / M)


@dataclass(frozen=True)
class GlauberEvent:
    site: tuple
    direction: int  # +1 up, -1 down
    uniform: float
    time: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.uniform < 1.0:
            raise ValueError("uniform must lie in (0,1)")
        if self.direction not in (1, -1):
            raise ValueError("direction must be +1 or -1")


def n_levels(M):
    return M * M + 1


def _slot_times(boundary, K):
    return boundary.a + (boundary.b - boundary.a) * np.arange(1, K) / K


def _barrier_arrays(boundary, K):
    tj = _slot_times(boundary, K)
    f = np.asarray(boundary.f(tj), dtype=float) + np.zeros(K - 1)
    g = np.asarray(boundary.g(tj), dtype=float) + np.zeros(K - 1)
    return f, g


def log_weight(idx, config, boundary):
    """Log of the configuration weight; -inf marks zero weight.

    boundary endpoints are in square-root coordinates; barriers act on the
    squared heights.
    """
    if boundary.k != config.k:
        raise ValueError("boundary and config curve counts differ")
    K = config.K
    dt = (boundary.b - boundary.a) / K
    f_vals, g_vals = _barrier_arrays(boundary, K)
    alpha = idx.alpha
    z = np.empty((config.k, K + 1))
    z[:, 0] = boundary.x
    z[:, 1:K] = config.heights
    z[:, K] = boundary.y
    sq = config.heights**2
    if np.any(sq <= f_vals) or np.any(sq >= g_vals):
        return _NEG_INF
    if config.k > 1 and np.any(np.diff(config.heights, axis=0) <= 0.0):
        return _NEG_INF
    total = 0.0
    for i in range(config.k):
        for j in range(1, K + 1):
            lp = _log_p(alpha, dt, z[i, j - 1], z[i, j])
            if lp == _NEG_INF:
                return _NEG_INF
            total += lp
    return total


def weight(idx, config, boundary):
    lw = log_weight(idx, config, boundary)
    return 0.0 if lw == _NEG_INF else math.exp(lw)


def _log_ratio(idx, config, boundary, i, j, new_level):
    """Log weight ratio for moving site (i, j) to new_level (two factors)."""
    K = config.K
    dt = (boundary.b - boundary.a) / K
    f_vals, g_vals = _barrier_arrays(boundary, K)
    M = config.M
    znew = new_level / M
    if znew * znew <= f_vals[j] or znew * znew >= g_vals[j]:
        return _NEG_INF
    if i > 0 and znew <= config.heights[i - 1, j]:
        return _NEG_INF
    if i < config.k - 1 and znew >= config.heights[i + 1, j]:
        return _NEG_INF
    left = boundary.x[i] if j == 0 else config.heights[i, j - 1]
    right = boundary.y[i] if j == K - 2 else config.heights[i, j + 1]
    zold = config.heights[i, j]
    alpha = idx.alpha
    new = _log_p(alpha, dt, left, znew) + _log_p(alpha, dt, znew, right)
    old = _log_p(alpha, dt, left, zold) + _log_p(alpha, dt, zold, right)
    return new - old


def propose(idx, config, boundary, event):
    """Metropolis update: move event.site by +-1/M, accept iff ratio >= U."""
    i, j = event.site
    if not (0 <= i < config.k and 0 <= j < config.K - 1):
        raise ValueError("event site out of range")
    lev = config.levels()
    nl = n_levels(config.M)
    cand = min(max(lev[i, j] + event.direction, 0), nl - 1)
    if cand == lev[i, j]:
        return config
    lr = _log_ratio(idx, config, boundary, i, j, cand)
    if lr == _NEG_INF or (lr < 0.0 and math.exp(lr) < event.uniform):
        return config
    lev[i, j] = cand
    return DiscreteConfig.from_levels(config.M, config.ell, lev)


# ---------------------------------------------------------------------------
# event loop


@maybe_njit(cache=True)
def _coupled_loop(alpha, dt, M, lev_hi, lev_lo, x_hi, y_hi, x_lo, y_lo,
                  f_hi, g_hi, f_lo, g_lo, sites_i, sites_j, dirs, unis,
                  rec_every, trace_hi, trace_lo, occ_hi, occ_lo, level_pows):
    k = lev_hi.shape[0]
    nslot = lev_hi.shape[1]
    nl = M * M + 1
    n_events = sites_i.shape[0]
    violations = 0
    nrec = 0
    track_occ = occ_hi.shape[0] > 1
    for e in range(n_events):
        i = sites_i[e]
        j = sites_j[e]
        d = dirs[e]
        u = unis[e]
        for c in range(2):
            if c == 0:
                lev, xv, yv, fv, gv = lev_hi, x_hi, y_hi, f_hi, g_hi
            else:
                lev, xv, yv, fv, gv = lev_lo, x_lo, y_lo, f_lo, g_lo
            cand = lev[i, j] + d
            if cand < 0:
                cand = 0
            if cand > nl - 1:
                cand = nl - 1
            if cand == lev[i, j]:
                continue
            znew = cand / M
            sqn = znew * znew
            ok = sqn > fv[j] and sqn < gv[j]
            if ok and i > 0 and cand <= lev[i - 1, j]:
                ok = False
            if ok and i < k - 1 and cand >= lev[i + 1, j]:
                ok = False
            if ok:
                left = xv[i] if j == 0 else lev[i, j - 1] / M
                right = yv[i] if j == nslot - 1 else lev[i, j + 1] / M
                zold = lev[i, j] / M
                lr = (
                    _log_p(alpha, dt, left, znew)
                    + _log_p(alpha, dt, znew, right)
                    - _log_p(alpha, dt, left, zold)
                    - _log_p(alpha, dt, zold, right)
                )
                if lr >= 0.0 or math.exp(lr) >= u:
                    lev[i, j] = cand
        viol = False
        for a in range(k):
            for b in range(nslot):
                if lev_hi[a, b] < lev_lo[a, b]:
                    viol = True
                    break
            if viol:
                break
        if viol:
            violations += 1
        if rec_every > 0 and (e + 1) % rec_every == 0:
            p = 0
            for a in range(k):
                for b in range(nslot):
                    trace_hi[nrec, p] = lev_hi[a, b]
                    trace_lo[nrec, p] = lev_lo[a, b]
                    p += 1
            nrec += 1
        if track_occ:
            s_hi = 0
            s_lo = 0
            p = 0
            for a in range(k):
                for b in range(nslot):
                    s_hi += lev_hi[a, b] * level_pows[p]
                    s_lo += lev_lo[a, b] * level_pows[p]
                    p += 1
            occ_hi[s_hi] += 1
            occ_lo[s_lo] += 1
    return violations


def _prep(idx, boundary, config):
    K = config.K
    dt = (boundary.b - boundary.a) / K
    f_vals, g_vals = _barrier_arrays(boundary, K)
    return dt, f_vals, g_vals


def run_coupled(idx, boundary_hi, boundary_lo, init_hi, init_lo, n_events,
                seed, record_every=0, track_occupation=False, burn_in=0):
    """Run two chains on a shared event stream.

    Returns (trace_hi, trace_lo, violations) where traces hold one row of
    flattened integer levels per recorded epoch (every record_every events;
    empty when 0) and violations counts events after which the high chain
    dipped below the low chain anywhere.  With track_occupation=True returns
    (trace_hi, trace_lo, violations, occ_hi, occ_lo): post-burn-in visit
    counts over flattened states.
    """
    if init_hi.M != init_lo.M or init_hi.ell != init_lo.ell or init_hi.k != init_lo.k:
        raise ValueError("chains must share (k, M, ell)")
    if np.any(init_hi.heights < init_lo.heights):
        raise ValueError("initial configs must be ordered init_hi >= init_lo")
    for cfg, bnd in ((init_hi, boundary_hi), (init_lo, boundary_lo)):
        if log_weight(idx, cfg, bnd) == _NEG_INF:
            raise ValueError("initial config has zero weight")
    K = init_hi.K
    dt = (boundary_hi.b - boundary_hi.a) / K
    f_hi, g_hi = _barrier_arrays(boundary_hi, K)
    f_lo, g_lo = _barrier_arrays(boundary_lo, K)
    k, nslot = init_hi.k, K - 1
    rng = np.random.default_rng(seed)
    total = burn_in + n_events
    sites_i = rng.integers(0, k, size=total)
    sites_j = rng.integers(0, nslot, size=total)
    dirs = np.where(rng.random(total) < 0.5, 1, -1).astype(np.int64)
    unis = rng.random(total)
    lev_hi = init_hi.levels()
    lev_lo = init_lo.levels()
    nsites = k * nslot
    nl = n_levels(init_hi.M)
    level_pows = nl ** np.arange(nsites, dtype=np.int64)

    def run(span, rec, occ_n):
        nrec = span // rec if rec > 0 else 0
        t_hi = np.zeros((nrec, nsites), dtype=np.int64)
        t_lo = np.zeros((nrec, nsites), dtype=np.int64)
        o_hi = np.zeros(occ_n, dtype=np.int64)
        o_lo = np.zeros(occ_n, dtype=np.int64)
        sl = slice(run.off, run.off + span)
        v = _coupled_loop(
            idx.alpha, dt, init_hi.M, lev_hi, lev_lo,
            boundary_hi.x, boundary_hi.y, boundary_lo.x, boundary_lo.y,
            f_hi, g_hi, f_lo, g_lo,
            sites_i[sl], sites_j[sl], dirs[sl], unis[sl],
            rec, t_hi, t_lo, o_hi, o_lo, level_pows,
        )
        run.off += span
        return t_hi, t_lo, o_hi, o_lo, v

    run.off = 0
    violations = 0
    if burn_in:
        *_, v = run(burn_in, 0, 1)
        violations += v
    occ_n = nl**nsites if track_occupation else 1
    if track_occupation and occ_n > 10**7:
        raise ValueError("state space too large for occupation tracking")
    trace_hi, trace_lo, occ_hi, occ_lo, v = run(n_events, record_every, occ_n)
    violations += v
    if track_occupation:
        return trace_hi, trace_lo, violations, occ_hi, occ_lo
    return trace_hi, trace_lo, violations


def run_chain(idx, boundary, init, n_events, seed, record_every=0,
              track_occupation=False, burn_in=None):
    """Single chain (degenerate coupling of two identical chains)."""
    if burn_in is None:
        burn_in = default_burn_in(init)
    out = run_coupled(idx, boundary, boundary, init, init, n_events, seed,
                      record_every, track_occupation, burn_in)
    if track_occupation:
        return out[0], out[4]
    return out[0]


def default_burn_in(config):
    """Diffusive relaxation heuristic: 100 * sites * M^2 events."""
    return 100 * config.k * (config.K - 1) * config.M**2


# ---------------------------------------------------------------------------
# exact stationary measure on tiny instances


def stationary_exact(idx, boundary, M, ell, k):
    """Exact stationary probabilities by full enumeration.

    Returns an array of shape (n_levels,) * (k * (K-1)) with the state
    probability at index (lev_{1,1}, ..., lev_{k,K-1}).
    """
    K = 2**ell
    nsites = k * (K - 1)
    nl = n_levels(M)
    size = nl**nsites
    if size > 10**6:
        raise ValueError("state space too large for enumeration")
    lw = np.empty(size)
    levels = np.zeros(nsites, dtype=np.int64)
    for s in range(size):
        r = s
        for p in range(nsites):
            levels[p] = r % nl
            r //= nl
        cfg = DiscreteConfig.from_levels(M, ell, levels.reshape(k, K - 1))
        lw[s] = log_weight(idx, cfg, boundary)
    mx = lw.max()
    if mx == _NEG_INF:
        raise ValueError("every state has zero weight")
    w = np.exp(lw - mx)
    w /= w.sum()
    # index order matches the occupation-count flattening (site p has stride nl^p)
    return w.reshape((nl,) * nsites, order="F")


def embed_to_curve(config, boundary):
    """Piecewise-linear curves through the squared heights, pinned endpoints."""
    K = config.K
    grid = boundary.a + (boundary.b - boundary.a) * np.arange(K + 1) / K
    values = np.empty((config.k, K + 1))
    values[:, 0] = boundary.x**2
    values[:, 1:K] = config.heights**2
    values[:, K] = boundary.y**2
    return LineEnsemble(config.k, grid, values)
