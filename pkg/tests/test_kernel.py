import math

import numpy as np
import pytest
from scipy import integrate
import scipy.special as sp

from besselle.density import TransitionQuery, q_sqbessel
from besselle.kernel import (
    EDGE_CONST,
    BranchError,
    density2_consistency,
    equal_time_kernel_matrix,
    extended_kernel,
    finite_kernel,
    fredholm_gap,
    fredholm_gap_converged,
    intertwining_check,
    phi,
    psi,
    scaled_finite_kernel,
)
from besselle.specfun import AlphaIndex

IDX0 = AlphaIndex(0.0)
IDX1 = AlphaIndex(1.0)


class TestEigenfunctions:
    def test_phi_zero_of_first_laguerre(self):
        # phi_2 contains L_1(x/2t), which vanishes at x = 2t
        assert phi(IDX0, 2, 1.0, 2.0) == pytest.approx(0.0, abs=1e-15)

    def test_phi_value(self):
        # phi_1(t, x) = 2^{-1-a} t^{-1} (x/t)^a e^{-x/2t} / Gamma(1+a)
        val = phi(IDX0, 1, 1.0, 1.0)
        assert val == pytest.approx(0.5 * math.exp(-0.5), rel=1e-12)

    def test_biorthogonality(self):
        # int_0^inf phi_i(t, x) psi_j(t, x) dx = delta_ij
        t = 1.0
        for a_idx in (IDX0, IDX1):
            for i in range(1, 5):
                for j in range(1, 5):
                    val, _ = integrate.quad(
                        lambda x: phi(a_idx, i, t, x) * psi(a_idx, j, t, x),
                        0.0, 200.0, limit=300)
                    assert val == pytest.approx(1.0 if i == j else 0.0, abs=1e-9)

    def test_psi_polynomial_growth(self):
        # psi_j has no exponential factor; it is t^{j-1} L_{j-1}(x/2t) * 2^{j-1+a}... > 0 at x=0
        assert psi(IDX0, 1, 1.0, 0.0) != 0.0


class TestFiniteKernel:
    def test_equal_time_reproducing(self):
        # at equal times K((t,y),(t,x)) = sum_i psi_i(t,y) phi_i(t,x); with
        # int psi_i phi_j = delta_ij, integrating phi_j against the first
        # slot reproduces phi_j at the second slot's point
        N, t, x = 3, 1.0, 1.3
        for j in range(1, N + 1):
            val, _ = integrate.quad(
                lambda y: finite_kernel(IDX0, N, (t, y), (t, x)) * phi(IDX0, j, t, y),
                0.0, 120.0, limit=300)
            assert val == pytest.approx(phi(IDX0, j, t, x), rel=1e-7, abs=1e-10)

    def test_propagator_part_for_earlier_time(self):
        # for t < s the kernel subtracts the transition density
        t, s, x, y = 1.0, 2.0, 1.0, 1.5
        with_sum = finite_kernel(IDX0, 3, (t, x), (s, y))
        avg = sum(
            phi(IDX0, j, s, y) * psi(IDX0, j, t, x) for j in range(1, 4)
        )
        q = q_sqbessel(TransitionQuery(IDX0, s - t, x, y))
        assert with_sum == pytest.approx(avg - q, rel=1e-10)

    def test_no_propagator_for_later_time(self):
        t, s, x, y = 2.0, 1.0, 1.0, 1.5
        val = finite_kernel(IDX0, 3, (t, x), (s, y))
        avg = sum(
            phi(IDX0, j, s, y) * psi(IDX0, j, t, x) for j in range(1, 4)
        )
        assert val == pytest.approx(avg, rel=1e-10)

    def test_gauge_leaves_determinants_invariant(self):
        # the gauge factor (x/y)^{a/2} cancels in determinants; equal-time
        # diagonal entries are unchanged
        x = 1.7
        plain = finite_kernel(IDX1, 4, (1.0, x), (1.0, x))
        gauged = finite_kernel(IDX1, 4, (1.0, x), (1.0, x), gauge=True)
        assert gauged == pytest.approx(plain, rel=1e-12)


class TestExtendedKernel:
    def test_equal_time_at_origin(self):
        # alpha = 0: K((0,0),(0,0)) = int_0^{1/8} J_0(0)^2 dz = 1/8
        assert extended_kernel(IDX0, (0.0, 0.0), (0.0, 0.0)) == pytest.approx(
            EDGE_CONST, rel=1e-10)

    def test_equal_time_positive_semidefinite(self):
        xs = np.array([0.5, 1.5, 3.0, 5.0])
        K = equal_time_kernel_matrix(IDX0, xs)
        vals = np.linalg.eigvalsh(0.5 * (K + K.T))
        assert vals.min() > -1e-10

    def test_equal_time_matrix_matches_pointwise(self):
        xs = np.array([0.4, 2.0])
        K = equal_time_kernel_matrix(IDX1, xs, n_z=240)
        for a, xa in enumerate(xs):
            for b, xb in enumerate(xs):
                direct = extended_kernel(IDX1, (0.0, xa), (0.0, xb))
                assert K[a, b] == pytest.approx(direct, rel=1e-8, abs=1e-12)

    def test_branch_difference_is_full_line_integral(self):
        # K(t>=s branch) - K(t<s branch continuation) equals the integral of
        # the damped product over (0, inf), computed with a Gaussian  oracle:
        # int_0^inf e^{-2 dt z} J_a(2 sqrt(zx)) J_a(2 sqrt(zy)) dz
        #   = (1/(2 dt)) exp(-(x+y)/(2 dt)) (xy)^{-a/2} I_a(sqrt(xy)/dt) * (xy)^{a/2}...
        idx, x, y, dt = IDX0, 1.0, 2.0, 0.7
        lo = extended_kernel(idx, (0.0, x), (dt, y))  # t < s branch
        # at alpha = 0 the full-line integral equals q_dt(x, y)
        oracle = q_sqbessel(TransitionQuery(idx, dt, x, y))
        f = lambda z: math.exp(-2.0 * dt * z) * sp.jv(0, 2.0 * math.sqrt(z * x)) \
            * sp.jv(0, 2.0 * math.sqrt(z * y))
        part, _ = integrate.quad(f, 0.0, EDGE_CONST, limit=200)
        assert part - lo == pytest.approx(oracle, rel=1e-8)

    def test_unordered_times_near_coincidence_raise(self):
        with pytest.raises(BranchError):
            extended_kernel(IDX0, (0.0, 1.0), (1e-12, 1.0))

    def test_finite_kernel_converges_to_extended(self):
        # hard-edge rescaling of the finite kernel approaches the extended
        # kernel as N grows
        x, y = 1.0, 2.0
        errs = []
        for N in (25, 100):
            val = scaled_finite_kernel(IDX0, N, (0.0, x), (0.0, y))
            lim = extended_kernel(IDX0, (0.0, x), (0.0, y))
            errs.append(abs(val - lim))
        assert errs[1] < errs[0]
        assert errs[1] < 0.02


class TestIntertwining:
    @pytest.mark.parametrize("idx", [IDX0, IDX1])
    def test_residuals_small(self, idx):
        for i, j in [(1, 1), (2, 3), (4, 2)]:
            d, pq, qp = intertwining_check(idx, i, j, 1.0, 2.0)
            assert d < 1e-8
            assert pq < 1e-8
            assert qp < 1e-8


class TestFredholmGap:
    def test_zero_radius(self):
        E0, E1 = fredholm_gap(IDX0, 1e-12)
        assert E0 == pytest.approx(1.0, abs=1e-10)
        assert E1 == pytest.approx(0.0, abs=1e-10)

    def test_probabilities_in_range(self):
        E0, E1 = fredholm_gap(IDX0, 2.0)
        assert 0.0 < E0 < 1.0
        assert 0.0 < E1 < 1.0

    def test_small_radius_linear_rate(self):
        # alpha = 0: (1 - E0)/r -> 1/8 as r -> 0
        r = 0.01
        E0, _ = fredholm_gap(IDX0, r)
        assert (1.0 - E0) / r == pytest.approx(EDGE_CONST, abs=2e-3)

    def test_alpha_one_quadratic_rate(self):
        # alpha = 1: 1 - E0 decays like r^2 near 0
        rates = []
        for r in (0.05, 0.1):
            E0, _ = fredholm_gap(IDX1, r)
            rates.append((1.0 - E0) / r**2)
        assert rates[0] == pytest.approx(rates[1], rel=0.05)

    def test_convergence_under_order_doubling(self):
        E0a, E1a, order = fredholm_gap_converged(IDX0, 1.0, tol=1e-8)
        E0b, E1b = fredholm_gap(IDX0, 1.0, quad_order=2 * order,
                                n_z=max(160, 2 * order))
        assert abs(E0a - E0b) < 1e-8
        assert abs(E1a - E1b) < 1e-7


class TestJointDensityFactorization:
    @pytest.mark.parametrize("idx", [IDX0, IDX1])
    def test_two_point_consistency(self, idx):
        gap = density2_consistency(idx, 2, (0.5, 1.0),
                                   np.array([0.4, 1.3]), np.array([0.6, 2.0]))
        assert gap < 1e-8
