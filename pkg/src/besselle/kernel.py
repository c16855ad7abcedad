"""Determinantal machinery: Laguerre phi/psi systems, the finite-N space-time
correlation kernel and its gauge transform, the hard-edge scaled kernel, the
extended Bessel kernel, Fredholm gap probabilities, and the intertwining
identities tying them together.

Conventions: phi_j(t,x) = Gamma(j)/(2^{j+alpha} Gamma(alpha+j)) t^{-j}
(x/t)^alpha e^{-x/(2t)} L^alpha_{j-1}(x/(2t)) and psi_j(t,x) = 2^{j-1} t^{j-1}
L^alpha_{j-1}(x/(2t)).  The finite kernel is -q_{s-t}(x,y) 1(t<s) +
sum_{j<=N} psi_j(t,x) phi_j(s,y); the gauge factor (x/y)^{alpha/2} makes it
extend smoothly to y = 0.  The extended kernel integrates
e^{-2(s-t)z} J_alpha(2 sqrt(zx)) J_alpha(2 sqrt(zy)) over (0, 1/8) for t >= s
and over -(1/8, inf) for t < s.
"""

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad

from .density import _log_q
from .specfun import bessel_j, bessel_j_vec, laguerre, log_gamma_fn

_QUAD_DEFAULTS = dict(epsabs=1e-12, epsrel=1e-10, limit=200)
_TRUNC_LOG = 14.0 * math.log(10.0)
EDGE_CONST = 0.125  # upper limit of the equal-time integral


class BranchError(ValueError):
    """t < s branch requested with s - t too small: the integral diverges."""


@dataclass
class KernelGrid:
    idx: object
    points: list  # [(t, x)]
    values: np.ndarray

    def __post_init__(self):
        n = len(self.points)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (n, n):
            raise ValueError("values must be square over the points")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("kernel values must be finite at every node")


def phi(idx, j, t, x):
    """phi_j(t, x); log-space prefactor, sign carried by the Laguerre value."""
    if j < 1 or t <= 0.0 or x < 0.0:
        raise ValueError("need j >= 1, t > 0, x >= 0")
    alpha = idx.alpha
    if x == 0.0 and alpha > 0.0:
        return 0.0
    u = x / (2.0 * t)
    logpre = (
        log_gamma_fn(float(j))
        - (j + alpha) * math.log(2.0)
        - log_gamma_fn(alpha + j)
        - j * math.log(t)
        - u
    )
    if alpha > 0.0:
        logpre += alpha * math.log(x / t)
    return math.exp(logpre) * laguerre(idx, j - 1, u)


def psi(idx, j, t, x):
    if j < 1 or t <= 0.0 or x < 0.0:
        raise ValueError("need j >= 1, t > 0, x >= 0")
    return 2.0 ** (j - 1) * t ** (j - 1) * laguerre(idx, j - 1, x / (2.0 * t))


def _laguerre_column(idx, N, u):
    """L^alpha_0(u) .. L^alpha_{N-1}(u) by the three-term recurrence."""
    alpha = idx.alpha
    out = np.empty(N)
    out[0] = 1.0
    if N > 1:
        out[1] = 1.0 + alpha - u
    for n in range(1, N - 1):
        out[n + 1] = ((2 * n + 1 + alpha - u) * out[n] - (n + alpha) * out[n - 1]) / (n + 1)
    return out


def _kernel_sum(idx, N, t, x, s, y, gauged):
    """sum_j psi_j(t,x) phi_j(s,y), optionally with the (x/y)^{alpha/2} gauge.

    Ascending j with the Gamma(j)/Gamma(alpha+j) prefactor updated
    multiplicatively; the common positive prefactor is factored in log space.
    """
    alpha = idx.alpha
    if N == 0:
        return 0.0
    La = _laguerre_column(idx, N, x / (2.0 * t))
    Lb = _laguerre_column(idx, N, y / (2.0 * s))
    # term j: g_j * r^{j-1} * La[j-1] * Lb[j-1] with common log prefactor
    # g_j = Gamma(j)/Gamma(alpha+j), r = t/s
    logpre = -(alpha + 1.0) * math.log(2.0) - math.log(s) - y / (2.0 * s)
    if gauged:
        if alpha > 0.0:
            if x == 0.0 or y == 0.0:
                return 0.0
            logpre += 0.5 * alpha * math.log(x * y / (s * s))
    else:
        if alpha > 0.0:
            if y == 0.0:
                return 0.0
            logpre += alpha * math.log(y / s)
    r = t / s
    g = math.exp(-log_gamma_fn(alpha + 1.0))  # Gamma(1)/Gamma(alpha+1)
    acc = 0.0
    rp = 1.0
    for j in range(1, N + 1):
        acc += g * rp * La[j - 1] * Lb[j - 1]
        g *= j / (alpha + j)
        rp *= r
    return acc * math.exp(logpre)


def _gauged_log_q(alpha, dt, x, y):
    """log of (x/y)^{alpha/2} q_dt(x, y); finite as y -> 0."""
    from .specfun import _log_h

    z = math.sqrt(x * y) / dt
    out = (
        -math.log(2.0)
        - (alpha + 1.0) * math.log(dt)
        - (x + y) / (2.0 * dt)
        + _log_h(alpha, z)
    )
    if alpha > 0.0:
        if x == 0.0 or y == 0.0:
            return float("-inf") if alpha > 0.0 else out
        out += 0.5 * alpha * math.log(x * y)
    return out


def finite_kernel(idx, N, tx, sy, gauge=False):
    """K^N((t,x); (s,y)) = -q_{s-t}(x,y) 1(t<s) + sum_j psi_j(t,x) phi_j(s,y)."""
    t, x = tx
    s, y = sy
    if t <= 0.0 or s <= 0.0:
        raise ValueError("times must be positive")
    total = _kernel_sum(idx, N, t, x, s, y, gauge)
    if t < s:
        if gauge:
            lg = _gauged_log_q(idx.alpha, s - t, x, y)
            total -= 0.0 if lg == float("-inf") else math.exp(lg)
        else:
            total -= math.exp(_log_q(idx.alpha, s - t, x, y))
    return total


def scaled_finite_kernel(idx, N, tx, sy):
    """Hard-edge window: (4N)^{-1} gauged K^N at times 1 + t/(4N), space x/(4N)."""
    t, x = tx
    s, y = sy
    c = 4.0 * N
    return finite_kernel(
        idx, N, (1.0 + t / c, x / c), (1.0 + s / c, y / c), gauge=True
    ) / c


# ---------------------------------------------------------------------------
# extended kernel


def _jj(idx, z, x, y):
    return bessel_j(idx, 2.0 * math.sqrt(z * x)) * bessel_j(idx, 2.0 * math.sqrt(z * y))


def extended_kernel(idx, tx, sy, quad_opts=None):
    """Space-time Bessel kernel at the hard edge.

    t >= s: integral of e^{-2(s-t)z} J J over (0, 1/8).
    t < s: minus the integral over (1/8, inf), truncated where the
    exponential damping reaches 1e-14.
    """
    t, x = tx
    s, y = sy
    if x < 0.0 or y < 0.0:
        raise ValueError("space arguments must be >= 0")
    opts = dict(_QUAD_DEFAULTS)
    if quad_opts:
        opts.update(quad_opts)
    if t >= s:
        f = lambda z: math.exp(2.0 * (t - s) * z) * _jj(idx, z, x, y)
        val, _ = quad(f, 0.0, EDGE_CONST, **opts)
        return val
    dt = s - t
    if dt < 1e-8:
        raise BranchError("s - t below 1e-8: unbounded branch is ill conditioned")
    z_max = EDGE_CONST + _TRUNC_LOG / (2.0 * dt)
    f = lambda z: math.exp(-2.0 * dt * z) * _jj(idx, z, x, y)
    # panels refine where the J product oscillates (period shrinks like 1/sqrt z)
    edges = [EDGE_CONST]
    while edges[-1] < z_max:
        edges.append(min(2.0 * edges[-1], z_max))
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        total += quad(f, a, b, **opts)[0]
    return -total


def equal_time_kernel_matrix(idx, xs, n_z=160):
    """K(x_i, x_j) at equal times on all pairs, via Gauss-Legendre in z.

    The integrand over (0, 1/8) is smooth for desk-scale x, so a fixed-order
    rule gives vectorized, symmetric evaluations.
    """
    xs = np.asarray(xs, dtype=float)
    nodes, wts = leggauss(n_z)
    z = 0.5 * EDGE_CONST * (nodes + 1.0)
    wz = 0.5 * EDGE_CONST * wts
    J = np.empty((len(xs), n_z))
    for i, xv in enumerate(xs):
        J[i] = bessel_j_vec(idx.alpha, 2.0 * np.sqrt(z * xv))
    return (J * wz) @ J.T


# ---------------------------------------------------------------------------
# intertwining residuals (Lemma-style identities)


def intertwining_check(idx, i, j, t, s, quad_opts=None, probes=(0.3, 1.0, 2.5)):
    """Residuals of the three intertwining identities, by quadrature.

    Returns (delta_err, phiQ_err, Qpsi_err): |int phi_i psi_j - delta_ij| at
    time t, and max-over-probe residuals of the two semigroup identities
    between times t < s.
    """
    if not 0.0 < t < s:
        raise ValueError("need 0 < t < s")
    if i > 8 or j > 8:
        raise ValueError("orders above 8 are not supported at desk scale")
    opts = dict(_QUAD_DEFAULTS)
    if quad_opts:
        opts.update(quad_opts)
    alpha = idx.alpha
    upper = 2.0 * t * (60.0 + 10.0 * (i + j + alpha))

    val, _ = quad(lambda x: phi(idx, i, t, x) * psi(idx, j, t, x), 0.0, upper, **opts)
    delta_err = abs(val - (1.0 if i == j else 0.0))

    dt = s - t
    phiQ_err = 0.0
    for y in probes:
        v, _ = quad(
            lambda x: phi(idx, j, t, x) * math.exp(_log_q(alpha, dt, x, y)),
            0.0,
            upper,
            **opts,
        )
        phiQ_err = max(phiQ_err, abs(v - phi(idx, j, s, y)))

    ups = 2.0 * s * (60.0 + 10.0 * (j + alpha))
    Qpsi_err = 0.0
    for x in probes:
        v, _ = quad(
            lambda y: math.exp(_log_q(alpha, dt, x, y)) * psi(idx, j, s, y),
            0.0,
            ups,
            **opts,
        )
        Qpsi_err = max(Qpsi_err, abs(v - psi(idx, j, t, x)))
    return delta_err, phiQ_err, Qpsi_err


# ---------------------------------------------------------------------------
# Fredholm gap probabilities


def fredholm_gap(idx, r, quad_order=64, n_z=160):
    """(E0, E1) on (0, r): E0 = det(I - K), E1 = E0 * tr((I-K)^{-1} K).

    Nystrom discretization with Gauss-Legendre nodes mapped to (0, r) and
    symmetrized square-root weights.
    """
    if r <= 0.0:
        raise ValueError("r must be positive")
    if quad_order < 8:
        raise ValueError("quad_order must be >= 8")
    nodes, wts = leggauss(quad_order)
    xs = 0.5 * r * (nodes + 1.0)
    w = 0.5 * r * wts
    K = equal_time_kernel_matrix(idx, xs, n_z=n_z)
    sw = np.sqrt(w)
    A = sw[:, None] * K * sw[None, :]
    I = np.eye(quad_order)
    E0 = float(np.linalg.det(I - A))
    if not -1e-8 <= E0 <= 1.0 + 1e-8:
        raise ArithmeticError(f"determinant {E0} outside [0, 1]: refine the discretization")
    E1 = E0 * float(np.trace(np.linalg.solve(I - A, A)))
    return E0, E1


def fredholm_gap_converged(idx, r, quad_order=64, tol=1e-8, max_order=1024):
    """fredholm_gap with order doubling until E0 moves by less than tol.

    Returns (E0, E1, order_used).
    """
    order = quad_order
    e0, e1 = fredholm_gap(idx, r, order)
    while order * 2 <= max_order:
        order *= 2
        e0n, e1n = fredholm_gap(idx, r, order, n_z=max(160, order))
        if abs(e0n - e0) < tol:
            return e0n, e1n, order
        e0, e1 = e0n, e1n
    return e0, e1, order


# ---------------------------------------------------------------------------
# joint-density cross-check


def _log_det(L):
    """(sign, log|det|) of a matrix given element-wise in log space is not
    needed; determinants here are well scaled at desk size."""
    return float(np.linalg.det(L))


def density2_consistency(idx, N, times, x_pts, y_pts):
    """Max relative gap between the two-time joint density in raw prefactor
    form and its det[phi] det[q] det[psi] rewriting."""
    t1, t2 = times
    x = np.asarray(x_pts, dtype=float)
    y = np.asarray(y_pts, dtype=float)
    if np.any(np.diff(x) <= 0) or np.any(np.diff(y) <= 0):
        raise ValueError("points must lie in the Weyl chamber")
    alpha = idx.alpha

    Q = np.array(
        [[math.exp(_log_q(alpha, t2 - t1, xi, yj)) for yj in y] for xi in x]
    )
    detQ = _log_det(Q)

    # raw form
    logC = -sum(log_gamma_fn(alpha + j) + log_gamma_fn(float(j)) for j in range(1, N + 1))
    vdm_x = np.prod([x[j] - x[i] for j in range(N) for i in range(j)]) if N > 1 else 1.0
    vdm_y = np.prod([y[j] - y[i] for j in range(N) for i in range(j)]) if N > 1 else 1.0
    raw = (
        math.exp(
            logC
            - (alpha * N + N * N) * math.log(2.0)
            - N * N * math.log(t1)
            + alpha * float(np.sum(np.log(x / t1)))
            - float(np.sum(x)) / (2.0 * t1)
        )
        * vdm_x
        * detQ
        * vdm_y
    )

    # determinantal rewriting
    P = np.array([[phi(idx, i, t1, xj) for xj in x] for i in range(1, N + 1)])
    S = np.array([[psi(idx, j, t2, yi) for j in range(1, N + 1)] for yi in y])
    det_form = _log_det(P) * detQ * _log_det(S)

    scale = max(abs(raw), abs(det_form), 1e-300)
    return abs(raw - det_form) / scale
