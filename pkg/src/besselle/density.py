"""Transition densities of the squared Bessel and Bessel processes.

q_t(x, y) is the squared Bessel transition density with index alpha,
p_t(x, y) = 2y q_t(x^2, y^2) the Bessel one.  Everything is computed in
log-space with a single exponentiation so hard-edge-scaled arguments do not
overflow.  The x = 0 and y = 0 branches are dedicated (the y = 0 value is
analytically forced by the y^alpha factor).
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from ._accel import maybe_njit
from .specfun import AlphaIndex, _log_h, bessel_j_vec

_LOG2 = math.log(2.0)
_NEG_INF = float("-inf")


@maybe_njit(cache=True)
def _log_q(alpha, t, x, y):
    # log q_t(x,y); -inf where the density vanishes.
    if y == 0.0:
        if alpha > 0.0:
            return _NEG_INF
        return -_LOG2 - math.log(t) - x / (2.0 * t)
    ly = alpha * math.log(y) if alpha > 0.0 else 0.0
    return (
        -_LOG2
        - (alpha + 1.0) * math.log(t)
        + ly
        - (x + y) / (2.0 * t)
        + _log_h(alpha, math.sqrt(x * y) / t)
    )


@maybe_njit(cache=True)
def _log_p(alpha, t, x, y):
    # log p_t(x,y) for the Bessel process; p_t(x,0) = 0 for every alpha >= 0.
    if y == 0.0:
        return _NEG_INF
    return (
        -(alpha + 1.0) * math.log(t)
        + (2.0 * alpha + 1.0) * math.log(y)
        - (x * x + y * y) / (2.0 * t)
        + _log_h(alpha, x * y / t)
    )


@dataclass(frozen=True)
class TransitionQuery:
    """One evaluation point (t, x, y) of a transition density."""

    idx: AlphaIndex
    t: float
    x: float
    y: float

    def __post_init__(self):
        if not self.t > 0.0:
            raise ValueError(f"time displacement must be > 0, got {self.t}")
        if self.x < 0.0 or self.y < 0.0:
            raise ValueError("coordinates must be >= 0")


def log_q_sqbessel(query):
    return _log_q(query.idx.alpha, query.t, query.x, query.y)


def q_sqbessel(query):
    """Squared Bessel transition density q_t(x, y)."""
    return math.exp(log_q_sqbessel(query))


def p_bessel(query):
    """Bessel transition density p_t(x, y) = 2y q_t(x^2, y^2)."""
    return math.exp(_log_p(query.idx.alpha, query.t, query.x, query.y))


def q_integral_repr(query, rtol=1e-10, limit=400):
    """q_t(x, y) via the Bessel-J integral representation.

    (y/x)^{alpha/2} * int_0^inf e^{-2tz} J_a(2 sqrt(zx)) J_a(2 sqrt(zy)) dz,
    truncated where the exponential drops below 1e-14.
    """
    if query.x == 0.0:
        raise ValueError("integral representation requires x > 0; use the closed form")
    alpha, t, x, y = query.idx.alpha, query.t, query.x, query.y
    z_max = -math.log(1e-14) / (2.0 * t)

    def integrand(z):
        z = np.atleast_1d(z)
        return (
            np.exp(-2.0 * t * z)
            * bessel_j_vec(alpha, 2.0 * np.sqrt(z * x))
            * bessel_j_vec(alpha, 2.0 * np.sqrt(z * y))
        )

    val, _ = integrate.quad(lambda z: float(integrand(z)[0]), 0.0, z_max,
                            epsabs=0.0, epsrel=rtol, limit=limit)
    return (y / x) ** (alpha / 2.0) * val


def log_q_cross_derivative(query, step=None):
    """Central finite-difference estimate of d^2/dxdy log q_t(x, y)."""
    alpha, t, x, y = query.idx.alpha, query.t, query.x, query.y
    if x <= 0.0 or y <= 0.0:
        raise ValueError("cross derivative requires x, y > 0")
    hx = step if step is not None else 1e-4 * max(1.0, x)
    hy = step if step is not None else 1e-4 * max(1.0, y)
    f = lambda u, v: _log_q(alpha, t, u, v)
    return (
        f(x + hx, y + hy) - f(x + hx, y - hy) - f(x - hx, y + hy) + f(x - hx, y - hy)
    ) / (4.0 * hx * hy)


def det2_q(idx, t, x1, x2, y1, y2):
    """2x2 minor q_t(x1,y1) q_t(x2,y2) - q_t(x1,y2) q_t(x2,y1), >= 0 by TP2."""
    if not (0.0 <= x1 <= x2 and 0.0 <= y1 <= y2):
        raise ValueError("inputs must satisfy 0 <= x1 <= x2 and 0 <= y1 <= y2")
    if not t > 0.0:
        raise ValueError("t must be > 0")
    a = idx.alpha
    l11 = _log_q(a, t, x1, y1)
    l22 = _log_q(a, t, x2, y2)
    l12 = _log_q(a, t, x1, y2)
    l21 = _log_q(a, t, x2, y1)
    # stabilize against underflow by factoring out the largest log
    m = max(l11 + l22, l12 + l21)
    if m == _NEG_INF:
        return 0.0
    return math.exp(m) * (math.exp(l11 + l22 - m) - math.exp(l12 + l21 - m))


def q_normalization(idx, t, x, rtol=1e-10):
    """int_0^inf q_t(x, y) dy, equal to 1 (conservative process)."""
    alpha = idx.alpha
    val, _ = integrate.quad(
        lambda y: math.exp(_log_q(alpha, t, x, y)),
        0.0,
        np.inf,
        epsabs=1e-13,
        epsrel=rtol,
        limit=300,
    )
    return val


def chapman_kolmogorov_residual(idx, s, t, x, y, rtol=1e-9):
    """Relative defect of int q_s(x,z) q_t(z,y) dz = q_{s+t}(x,y)."""
    alpha = idx.alpha
    val, _ = integrate.quad(
        lambda z: math.exp(_log_q(alpha, s, x, z) + _log_q(alpha, t, z, y)),
        0.0,
        np.inf,
        epsabs=1e-14,
        epsrel=rtol,
        limit=300,
    )
    target = math.exp(_log_q(alpha, s + t, x, y))
    if target == 0.0:
        return abs(val)
    return abs(val - target) / target
