import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from besselle.density import (
    TransitionQuery,
    chapman_kolmogorov_residual,
    det2_q,
    log_q_cross_derivative,
    log_q_sqbessel,
    p_bessel,
    q_integral_repr,
    q_normalization,
    q_sqbessel,
)
from besselle.specfun import AlphaIndex

IDX0 = AlphaIndex(0.0)
IDX1 = AlphaIndex(1.0)
IDX23 = AlphaIndex(2.3)


class TestQValues:
    def test_from_origin(self):
        # q_t(0, y) = y^a e^{-y/2t} / ((2t)^{a+1} Gamma(a+1)); at a=0,t=1,y=2: e^{-1}/2
        q = q_sqbessel(TransitionQuery(IDX0, 1.0, 0.0, 2.0))
        assert q == pytest.approx(0.5 * math.exp(-1.0), rel=1e-12)

    def test_diffusive_scaling(self):
        # q_{ct}(cx, cy) = q_t(x, y) / c
        for idx in (IDX0, IDX1, IDX23):
            for c in (0.5, 2.0, 7.0):
                a = q_sqbessel(TransitionQuery(idx, c * 1.0, c * 1.5, c * 0.7))
                b = q_sqbessel(TransitionQuery(idx, 1.0, 1.5, 0.7))
                assert a == pytest.approx(b / c, rel=1e-12)

    def test_symmetry_relation(self):
        # q_t(x, y) / y^a = q_t(y, x) / x^a
        for idx in (IDX0, IDX1, IDX23):
            a = idx.alpha
            lhs = log_q_sqbessel(TransitionQuery(idx, 0.8, 1.3, 2.6)) - a * math.log(2.6)
            rhs = log_q_sqbessel(TransitionQuery(idx, 0.8, 2.6, 1.3)) - a * math.log(1.3)
            assert lhs == pytest.approx(rhs, rel=1e-12)

    @pytest.mark.parametrize("idx", [IDX0, IDX1, IDX23])
    @pytest.mark.parametrize("x", [0.0, 0.5, 3.0])
    def test_normalization(self, idx, x):
        assert q_normalization(idx, 1.0, x) == pytest.approx(1.0, abs=1e-9)

    def test_zero_target_boundary(self):
        # q_t(x, 0) is finite only for alpha = 0
        assert q_sqbessel(TransitionQuery(IDX0, 1.0, 1.0, 0.0)) > 0.0
        assert q_sqbessel(TransitionQuery(IDX1, 1.0, 1.0, 0.0)) == 0.0

    def test_rejects_nonpositive_time(self):
        with pytest.raises(ValueError):
            TransitionQuery(IDX0, 0.0, 1.0, 1.0)


class TestChapmanKolmogorov:
    @pytest.mark.parametrize("idx", [IDX0, IDX1])
    @pytest.mark.parametrize("s,t", [(0.5, 0.5), (1.0, 2.0)])
    def test_semigroup_on_grid(self, idx, s, t):
        pts = np.linspace(0.0, 4.0, 5)
        for x in pts:
            for y in pts:
                res = chapman_kolmogorov_residual(idx, s, t, float(x), float(y))
                assert res < 1e-6


class TestIntegralRepresentation:
    @pytest.mark.parametrize("idx", [IDX0, IDX1, IDX23])
    def test_matches_closed_form(self, idx):
        rng = np.random.default_rng(7)
        for _ in range(6):
            t = float(rng.uniform(0.4, 2.0))
            x = float(rng.uniform(0.2, 3.0))
            y = float(rng.uniform(0.2, 3.0))
            closed = q_sqbessel(TransitionQuery(idx, t, x, y))
            integral = q_integral_repr(TransitionQuery(idx, t, x, y))
            assert integral == pytest.approx(closed, rel=1e-6)


class TestPBessel:
    def test_value(self):
        # p_1(1, y) at y = 1, alpha = 0: 2 q_1(1, 1) = e^{-1} I_0(1) -> here y=1
        p = p_bessel(TransitionQuery(IDX0, 1.0, 0.0, 1.0))
        assert p == pytest.approx(math.exp(-0.5), rel=1e-12)

    def test_zero_at_origin_target(self):
        assert p_bessel(TransitionQuery(IDX0, 1.0, 1.0, 0.0)) == 0.0

    def test_bounded_on_grid(self):
        ys = np.linspace(0.0, 20.0, 2001)
        vals = [p_bessel(TransitionQuery(IDX0, 1.0, 1.0, float(y))) for y in ys]
        assert max(vals) < 1.0

    def test_riemann_sums_converge_with_small_tail(self):
        # Riemann sums of p_1(1, .) on refining meshes approach 1; the mass
        # beyond y = 8 is negligible.
        L = 8.0
        sums = []
        for m in (1, 4, 16):
            n = int(L * 8 * m)
            ys = np.linspace(0.0, L, n + 1)
            vals = np.array(
                [p_bessel(TransitionQuery(IDX0, 1.0, 1.0, float(y))) for y in ys]
            )
            sums.append(float(np.trapezoid(vals, ys)))
        assert all(abs(s - 1.0) < 0.02 for s in sums)
        tail = abs(sums[-1] - 1.0)
        assert tail < 0.01

    def test_relation_to_q(self):
        for y in (0.3, 1.0, 2.7):
            p = p_bessel(TransitionQuery(IDX1, 0.7, 1.2, y))
            q = q_sqbessel(TransitionQuery(IDX1, 0.7, 1.2**2, y**2))
            assert p == pytest.approx(2.0 * y * q, rel=1e-12)


class TestCrossDerivative:
    @pytest.mark.parametrize("idx", [IDX0, IDX1, IDX23])
    def test_positive(self, idx):
        rng = np.random.default_rng(11)
        for _ in range(25):
            t = float(rng.uniform(0.3, 2.0))
            x = float(rng.uniform(0.2, 4.0))
            y = float(rng.uniform(0.2, 4.0))
            assert log_q_cross_derivative(TransitionQuery(idx, t, x, y)) > 0.0

    def test_time_scaling(self):
        # d^2/dxdy log q scales like 1/t^2 under the diffusive scaling
        q1 = TransitionQuery(IDX1, 1.0, 1.1, 0.9)
        q2 = TransitionQuery(IDX1, 2.0, 2.2, 1.8)
        d1 = log_q_cross_derivative(q1)
        d2 = log_q_cross_derivative(q2)
        assert d2 == pytest.approx(d1 / 4.0, rel=1e-3, abs=1e-5)


class TestTotalPositivity:
    def test_example(self):
        assert det2_q(IDX0, 1.0, 0.5, 1.5, 0.7, 2.0) > 0.0

    def test_degenerate_rows(self):
        assert det2_q(IDX0, 1.0, 1.0, 1.0, 0.7, 2.0) == pytest.approx(0.0, abs=1e-15)

    @given(
        t=st.floats(min_value=0.2, max_value=3.0),
        x1=st.floats(min_value=0.0, max_value=3.0),
        dx=st.floats(min_value=0.0, max_value=3.0),
        y1=st.floats(min_value=0.0, max_value=3.0),
        dy=st.floats(min_value=0.0, max_value=3.0),
        alpha=st.sampled_from([0.0, 1.0, 2.3]),
    )
    @settings(max_examples=100, deadline=None)
    def test_nonnegative_property(self, t, x1, dx, y1, dy, alpha):
        idx = AlphaIndex(alpha)
        assert det2_q(idx, t, x1, x1 + dx, y1, y1 + dy) >= -1e-16

    def test_gaussian_comparison_sandwich(self):
        # det2 admits two-sided bounds C^{-1} g <= det2 <= C g against the
        # product of Gaussian increments; fit C once on a coarse grid, then
        # verify the sandwich at fresh points.
        idx = IDX0
        t = 1.0

        def gauss_bound(x1, x2, y1, y2):
            return (
                (x2 - x1)
                * (y2 - y1)
                * math.exp(-((y1 - x1) ** 2 + (y2 - x2) ** 2) / (8.0 * t))
            )

        fit_pts = [
            (0.5, 1.0, 0.6, 1.1),
            (1.0, 2.0, 1.2, 2.2),
            (2.0, 2.5, 1.8, 2.4),
            (0.2, 0.9, 0.5, 1.5),
        ]
        ratios = []
        for x1, x2, y1, y2 in fit_pts:
            d = det2_q(idx, t, x1, x2, y1, y2)
            g = gauss_bound(x1, x2, y1, y2)
            ratios.append(d / g)
        C = max(max(ratios), 1.0 / min(ratios)) * 10.0

        rng = np.random.default_rng(3)
        for _ in range(20):
            x1 = float(rng.uniform(0.2, 2.0))
            x2 = x1 + float(rng.uniform(0.1, 1.5))
            y1 = float(rng.uniform(0.2, 2.0))
            y2 = y1 + float(rng.uniform(0.1, 1.5))
            d = det2_q(idx, t, x1, x2, y1, y2)
            g = gauss_bound(x1, x2, y1, y2)
            assert g / C <= d <= C * g
