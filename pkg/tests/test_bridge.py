import math

import numpy as np
import pytest
from scipy import integrate

from besselle.bridge import (
    INF_BARRIER,
    ZERO_BARRIER,
    AcceptanceFailure,
    BridgeBoundary,
    LineEnsemble,
    _bridge_paths_njit,
    _bridge_paths_numpy,
    constant_barrier,
    estimate_Z,
    km_density,
    piecewise_linear_barrier,
    resample_gibbs,
    sample_free_bridge,
    sample_free_bridge_batch,
    sample_nonintersecting,
)
from besselle.density import TransitionQuery, q_sqbessel
from besselle.specfun import AlphaIndex

IDX0 = AlphaIndex(0.0)
IDX1 = AlphaIndex(1.0)


def simple_boundary(k=2, a=0.0, b=1.0):
    x = np.arange(1.0, k + 1.0)
    return BridgeBoundary(k=k, a=a, b=b, x=x, y=x, f=ZERO_BARRIER, g=INF_BARRIER)


class TestBoundaryValidation:
    def test_rejects_unordered_entrance(self):
        with pytest.raises(ValueError):
            BridgeBoundary(2, 0.0, 1.0, np.array([2.0, 1.0]), np.array([1.0, 2.0]),
                           ZERO_BARRIER, INF_BARRIER)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            BridgeBoundary(1, 0.0, 1.0, np.array([-1.0]), np.array([1.0]),
                           ZERO_BARRIER, INF_BARRIER)

    def test_rejects_empty_interval(self):
        with pytest.raises(ValueError):
            BridgeBoundary(1, 1.0, 1.0, np.array([1.0]), np.array([1.0]),
                           ZERO_BARRIER, INF_BARRIER)

    def test_barrier_helpers(self):
        f = piecewise_linear_barrier(np.array([0.0, 1.0]), np.array([0.0, 2.0]))
        assert float(f(0.5)) == pytest.approx(1.0)
        assert float(constant_barrier(3.0)(123.0)) == 3.0


class TestLineEnsemble:
    def test_ordering_check(self):
        grid = np.linspace(0.0, 1.0, 5)
        good = LineEnsemble(2, grid, np.vstack([np.zeros(5), np.ones(5)]))
        assert good.is_ordered()
        bad = LineEnsemble(2, grid, np.vstack([np.ones(5), np.zeros(5)]))
        assert not bad.is_ordered()


class TestFreeBridge:
    def test_endpoints_pinned(self):
        grid = np.linspace(0.0, 1.0, 9)
        path = sample_free_bridge(IDX0, 0.0, 1.0, 1.0, 2.0, grid, seed=5)
        assert path[0] == 1.0
        assert path[-1] == 2.0
        assert np.all(path >= 0.0)

    def test_deterministic_given_seed(self):
        grid = np.linspace(0.0, 1.0, 9)
        p1 = sample_free_bridge(IDX1, 0.0, 1.0, 1.0, 2.0, grid, seed=5)
        p2 = sample_free_bridge(IDX1, 0.0, 1.0, 1.0, 2.0, grid, seed=5)
        assert np.array_equal(p1, p2)

    def test_positive_index_stays_positive(self):
        grid = np.linspace(0.0, 2.0, 17)
        rng = np.random.default_rng(0)
        paths = sample_free_bridge_batch(IDX1, 0.0, 2.0, 0.5, 0.5, grid, 200, rng)
        assert np.all(paths[:, 1:-1] > 0.0)

    def test_backend_agreement(self):
        grid = np.linspace(0.0, 1.0, 9)
        rng = np.random.default_rng(21)
        uniforms = rng.random((50, 7))
        a = _bridge_paths_njit(0.0, grid, 1.0, 2.0, uniforms, 1024)
        b = _bridge_paths_numpy(0.0, grid, 1.0, 2.0, uniforms, 1024)
        assert np.max(np.abs(a - b)) < 1e-12

    @pytest.mark.parametrize("idx,x0,y0", [(IDX0, 1.0, 2.0), (IDX1, 0.5, 1.5)])
    def test_midpoint_marginal_against_quadrature(self, idx, x0, y0):
        # the bridge value at time s has density
        # q_s(x0, z) q_{b-s}(z, y0) / q_b(x0, y0); compare the Monte Carlo
        # mean at the midpoint with the quadrature mean.
        a, b, s = 0.0, 1.0, 0.5
        norm = q_sqbessel(TransitionQuery(idx, b - a, x0, y0))

        def dens(z):
            return (
                q_sqbessel(TransitionQuery(idx, s - a, x0, z))
                * q_sqbessel(TransitionQuery(idx, b - s, z, y0))
                / norm
            )

        mass, _ = integrate.quad(dens, 0.0, 60.0, limit=300)
        assert mass == pytest.approx(1.0, abs=1e-8)
        mean, _ = integrate.quad(lambda z: z * dens(z), 0.0, 60.0, limit=300)
        var, _ = integrate.quad(lambda z: (z - mean) ** 2 * dens(z), 0.0, 60.0,
                                limit=300)

        n = 4000
        grid = np.array([a, s, b])
        rng = np.random.default_rng(123)
        paths = sample_free_bridge_batch(idx, a, b, x0, y0, grid, n, rng)
        sample_mean = float(paths[:, 1].mean())
        se = math.sqrt(var / n)
        assert abs(sample_mean - mean) < 4.0 * se


class TestKmDensity:
    def test_zero_outside_chamber(self):
        bnd = simple_boundary()
        assert km_density(IDX0, bnd, 0.5, np.array([2.0, 1.0])) == 0.0

    def test_zero_outside_barrier(self):
        x = np.array([1.0, 2.0])
        bnd = BridgeBoundary(2, 0.0, 1.0, x, x, constant_barrier(0.5), INF_BARRIER)
        assert km_density(IDX0, bnd, 0.5, np.array([0.3, 2.0])) == 0.0

    def test_positive_inside(self):
        bnd = simple_boundary()
        assert km_density(IDX0, bnd, 0.5, np.array([1.0, 2.0])) > 0.0

    def test_k1_reduces_to_product(self):
        x = np.array([1.5])
        bnd = BridgeBoundary(1, 0.0, 1.0, x, np.array([0.8]), ZERO_BARRIER,
                             INF_BARRIER)
        val = km_density(IDX1, bnd, 0.3, np.array([1.1]))
        expected = q_sqbessel(TransitionQuery(IDX1, 0.3, 1.5, 1.1)) * q_sqbessel(
            TransitionQuery(IDX1, 0.7, 1.1, 0.8)
        )
        assert val == pytest.approx(expected, rel=1e-12)

    def test_semigroup_consistency(self):
        # integrating the k=2 joint density over the chamber at time s
        # reproduces the endpoint determinant.
        bnd = simple_boundary()
        s = 0.5

        def inner(z1):
            val, _ = integrate.quad(
                lambda z2: km_density(IDX0, bnd, s, np.array([z1, z2])),
                z1, 12.0, limit=120)
            return val

        total, _ = integrate.quad(inner, 0.0, 12.0, limit=120)
        q11 = q_sqbessel(TransitionQuery(IDX0, 1.0, 1.0, 1.0))
        q12 = q_sqbessel(TransitionQuery(IDX0, 1.0, 1.0, 2.0))
        q21 = q_sqbessel(TransitionQuery(IDX0, 1.0, 2.0, 1.0))
        q22 = q_sqbessel(TransitionQuery(IDX0, 1.0, 2.0, 2.0))
        target = q11 * q22 - q12 * q21
        assert total == pytest.approx(target, rel=1e-3)


class TestAcceptance:
    def test_single_curve_no_barrier_always_accepted(self):
        x = np.array([1.0])
        bnd = BridgeBoundary(1, 0.0, 1.0, x, x, ZERO_BARRIER, INF_BARRIER)
        p, se = estimate_Z(IDX0, bnd, 400, seed=9)
        assert p == 1.0

    def test_estimate_between_zero_and_one(self):
        bnd = simple_boundary()
        p, se = estimate_Z(IDX0, bnd, 400, seed=9)
        assert 0.0 < p <= 1.0
        assert se > 0.0

    def test_deterministic(self):
        bnd = simple_boundary()
        assert estimate_Z(IDX0, bnd, 200, seed=4) == estimate_Z(IDX0, bnd, 200, seed=4)

    def test_sampler_returns_ordered_ensemble(self):
        bnd = simple_boundary()
        grid = np.linspace(0.0, 1.0, 17)
        ens, attempts = sample_nonintersecting(IDX0, bnd, grid, seed=2)
        assert attempts >= 1
        assert ens.is_ordered()
        assert np.array_equal(ens.values[:, 0], bnd.x)
        assert np.array_equal(ens.values[:, -1], bnd.y)

    def test_impossible_barriers_fail_fast(self):
        x = np.array([1.0])
        bnd = BridgeBoundary(1, 0.0, 1.0, x, x, constant_barrier(5.0),
                             constant_barrier(4.0))
        with pytest.raises(AcceptanceFailure):
            sample_nonintersecting(IDX0, bnd, np.linspace(0.0, 1.0, 9), seed=0)

    def test_attempt_budget_respected(self):
        # tight corridor around a mismatched pinning makes acceptance very
        # unlikely; budget exhaustion must raise rather than loop.
        x = np.array([1.0])
        bnd = BridgeBoundary(1, 0.0, 1.0, x, x, constant_barrier(0.999),
                             constant_barrier(1.001))
        with pytest.raises(AcceptanceFailure):
            sample_nonintersecting(IDX0, bnd, np.linspace(0.0, 1.0, 33), seed=0,
                                   max_attempts=64)


class TestGibbsResampling:
    def make_ensemble(self, seed=0):
        bnd = BridgeBoundary(3, 0.0, 2.0, np.array([1.0, 4.0, 9.0]),
                             np.array([1.0, 4.0, 9.0]), ZERO_BARRIER, INF_BARRIER)
        grid = np.linspace(0.0, 2.0, 17)
        ens, _ = sample_nonintersecting(IDX0, bnd, grid, seed=seed)
        return ens

    def test_block_update_keeps_rest_fixed(self):
        ens = self.make_ensemble()
        out = resample_gibbs(IDX0, ens, 1, 1, (0.5, 1.5), seed=11)
        assert out.is_ordered()
        assert np.array_equal(out.values[0], ens.values[0])
        assert np.array_equal(out.values[2], ens.values[2])
        # endpoints of the resampled block are pinned
        i_a = np.searchsorted(ens.grid, 0.5)
        i_b = np.searchsorted(ens.grid, 1.5)
        assert out.values[1, i_a] == ens.values[1, i_a]
        assert out.values[1, i_b] == ens.values[1, i_b]
        outside = np.r_[0:i_a, i_b + 1 : len(ens.grid)]
        assert np.array_equal(out.values[1, outside], ens.values[1, outside])

    def test_interval_without_interior_is_identity(self):
        ens = self.make_ensemble()
        t0, t1 = ens.grid[3], ens.grid[4]
        out = resample_gibbs(IDX0, ens, 0, 2, (t0, t1), seed=3)
        assert np.array_equal(out.values, ens.values)

    def test_rejects_off_grid_interval(self):
        ens = self.make_ensemble()
        with pytest.raises(ValueError):
            resample_gibbs(IDX0, ens, 0, 0, (0.51, 1.5), seed=3)

    def test_full_block_update(self):
        ens = self.make_ensemble()
        out = resample_gibbs(IDX0, ens, 0, 2, (0.25, 1.75), seed=7)
        assert out.is_ordered()
        assert np.all(out.values >= 0.0)
