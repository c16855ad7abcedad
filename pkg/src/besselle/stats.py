"""Statistics used by the experiment harness: modulus of continuity,
two-sample KS with a permutation test, and chi-squared goodness of fit."""

import numpy as np
from scipy import stats as sps


def modulus_of_continuity(ensemble, k, r):
    """sup over curves 1..k and grid pairs |s-t| <= r of |f_i(s) - f_i(t)|."""
    if r <= 0.0:
        raise ValueError("r must be positive")
    if not 1 <= k <= ensemble.k:
        raise ValueError("k out of range")
    grid = ensemble.grid
    vals = ensemble.values[:k]
    best = 0.0
    n = len(grid)
    for a in range(n):
        for b in range(a, n):
            if grid[b] - grid[a] > r:
                break
            d = float(np.max(np.abs(vals[:, b] - vals[:, a])))
            if d > best:
                best = d
    return best


def ks_statistic(sample_a, sample_b):
    """Two-sample Kolmogorov-Smirnov statistic."""
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("samples must be nonempty")
    return float(sps.ks_2samp(a, b).statistic)


def ks_permutation_pvalue(sample_a, sample_b, n_perm=500, seed=0):
    """Permutation p-value for the two-sample KS statistic.

    Returns (statistic, p_value); p uses the add-one estimator so it is never
    exactly 0.
    """
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    obs = ks_statistic(a, b)
    pool = np.concatenate([a, b])
    na = len(a)
    rng = np.random.default_rng(seed)
    hits = 0
    for _ in range(n_perm):
        perm = rng.permutation(pool)
        if ks_statistic(perm[:na], perm[na:]) >= obs:
            hits += 1
    return obs, (hits + 1) / (n_perm + 1)


def chi2_pvalue(counts, expected):
    """Pearson chi-squared p-value of observed vs expected bin counts.

    Expected counts are rescaled to the observed total; dof = bins - 1.
    """
    counts = np.asarray(counts, dtype=float)
    expected = np.asarray(expected, dtype=float)
    if np.any(expected <= 0.0):
        raise ValueError("expected counts must be positive")
    expected = expected * counts.sum() / expected.sum()
    stat = float(np.sum((counts - expected) ** 2 / expected))
    dof = len(counts) - 1
    return stat, float(sps.chi2.sf(stat, dof))
