"""Special functions used by the closed-form performance expressions.

Everything here is a pure function of its arguments.  Scalars in, scalars
out, except where noted; the array-friendly helpers (``q_function``,
``q_approx_*``) accept numpy arrays.
"""

import math
from typing import NamedTuple

import numpy as np
from scipy import integrate, special

# Exponential Q-function approximation constants (Lopez-Benitez & Casadevall).
Q_APPROX_A = 0.3842
Q_APPROX_B = 0.7640
Q_APPROX_C = 0.6964

# Supported box for the parabolic cylinder function.
PCFD_MIN_ORDER = -60.0
PCFD_MAX_ARG = 50.0

_GAMMA_EPS = 1e-16
_GAMMA_MAX_ITER = 100000
_TINY = 1e-300


class DomainError(ValueError):
    """Argument outside the supported domain of a special function."""


class QApproxConstants(NamedTuple):
    A: float
    B: float
    C: float


Q_APPROX = QApproxConstants(Q_APPROX_A, Q_APPROX_B, Q_APPROX_C)


def ln_gamma(x):
    """Natural log of the gamma function for positive arguments."""
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise DomainError("ln_gamma requires x > 0")
    out = special.gammaln(x)
    return float(out) if out.ndim == 0 else out


def _gamma_series(a, x):
    # P(a, x) by the power series; converges quickly for x < a + 1
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_GAMMA_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _GAMMA_EPS:
            break
    else:  # pragma: no cover - only for absurd arguments
        raise RuntimeError("incomplete gamma series did not converge")
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cont_frac(a, x):
    # Q(a, x) by Lentz's continued fraction; valid for x >= a + 1
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _GAMMA_MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _GAMMA_EPS:
            break
    else:  # pragma: no cover
        raise RuntimeError("incomplete gamma continued fraction did not converge")
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def _gamma_lower_reg_scalar(a, x):
    if not a > 0:
        raise DomainError("gamma_lower_reg requires a > 0")
    if not x >= 0:
        raise DomainError("gamma_lower_reg requires x >= 0")
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return 1.0
    if x < a + 1.0:
        return min(1.0, _gamma_series(a, x))
    return max(0.0, 1.0 - _gamma_cont_frac(a, x))


def gamma_lower_reg(a, x):
    """Regularized lower incomplete gamma function P(a, x) = gamma(a, x)/Gamma(a).

    Series expansion below ``x = a + 1`` and a continued fraction above it.
    Broadcasts over array arguments.
    """
    if np.ndim(a) == 0 and np.ndim(x) == 0:
        return _gamma_lower_reg_scalar(float(a), float(x))
    a_arr, x_arr = np.broadcast_arrays(np.asarray(a, float), np.asarray(x, float))
    out = np.empty(a_arr.shape)
    for idx in np.ndindex(a_arr.shape):
        out[idx] = _gamma_lower_reg_scalar(a_arr[idx], x_arr[idx])
    return out


def q_function(x):
    """Gaussian tail probability Q(x) = erfc(x / sqrt 2) / 2."""
    out = 0.5 * special.erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))
    return float(out) if np.ndim(out) == 0 else out


def q_approx_exp(x):
    """Exponential approximation exp(-A x^2 - B x - C) of Q(x) for x >= 0."""
    x = np.asarray(x, dtype=float)
    out = np.exp(-Q_APPROX_A * x * x - Q_APPROX_B * x - Q_APPROX_C)
    return float(out) if out.ndim == 0 else out


def q_approx_two_term(x):
    """Two-exponential approximation exp(-x^2/2)/12 + exp(-2x^2/3)/4."""
    x = np.asarray(x, dtype=float)
    out = np.exp(-0.5 * x * x) / 12.0 + np.exp(-2.0 * x * x / 3.0) / 4.0
    return float(out) if out.ndim == 0 else out


def _check_pcfd_box(v, x):
    if not (PCFD_MIN_ORDER <= v <= 0.0):
        raise DomainError(f"parabolic cylinder order v={v} outside [{PCFD_MIN_ORDER}, 0]")
    if not (0.0 <= x <= PCFD_MAX_ARG):
        raise DomainError(f"parabolic cylinder argument x={x} outside [0, {PCFD_MAX_ARG}]")


def _log_pcfd_integer(n, x):
    # D_{-n}(x) for integer n >= 1 and x >= 1.  The ratios
    # r_j = D_{-j}/D_{-(j-1)} satisfy r_j = 1/(x + j r_{j+1}); running this
    # backward is stable because D_{-j} is the minimal solution.
    prev = None
    start = n + 32
    while True:
        r = 0.0
        log_sum = 0.0
        for j in range(start, 0, -1):
            r = 1.0 / (x + j * r)
            if j <= n:
                log_sum += math.log(r)
        value = -0.25 * x * x + log_sum
        if prev is not None and abs(value - prev) <= 1e-15 * max(1.0, abs(value)):
            return value
        prev = value
        start *= 2
        if start > 1 << 20:  # pragma: no cover
            raise RuntimeError("parabolic cylinder recurrence did not converge")


def _log_pcfd_quad(s, x):
    # D_{-s}(x) = exp(-x^2/4)/Gamma(s) * int_0^inf t^(s-1) exp(-t^2/2 - x t) dt
    if s >= 1.0:
        t_peak = 0.5 * (-x + math.sqrt(x * x + 4.0 * (s - 1.0)))
        if t_peak > 0:
            log_peak = (s - 1.0) * math.log(t_peak) - 0.5 * t_peak**2 - x * t_peak
        else:
            log_peak = 0.0
        curvature = 1.0 + ((s - 1.0) / t_peak**2 if t_peak > 0 else 0.0)
        width = 1.0 / math.sqrt(curvature)

        def integrand(t):
            if t <= 0.0:
                return 1.0 if s == 1.0 else 0.0
            return math.exp((s - 1.0) * math.log(t) - 0.5 * t * t - x * t - log_peak)

        lo = max(0.0, t_peak - 40.0 * width)
        hi = t_peak + max(40.0 * width, 40.0)
        pts = sorted(
            {p for k in (-20, -10, -5, -2, 2, 5, 10, 20)
             if lo < (p := t_peak + k * width) < hi} | ({t_peak} if lo < t_peak < hi else set())
        )
        total = 0.0
        edges = [lo] + pts + [hi]
        for left, right in zip(edges[:-1], edges[1:]):
            val, _ = integrate.quad(integrand, left, right, epsabs=0.0, epsrel=1e-13, limit=200)
            total += val
        return -0.25 * x * x + log_peak + math.log(total) - math.lgamma(s)

    # 0 < s < 1: integrable endpoint singularity, handled by the algebraic weight
    head, _ = integrate.quad(
        lambda t: math.exp(-0.5 * t * t - x * t), 0.0, 1.0,
        weight="alg", wvar=(s - 1.0, 0.0), epsabs=0.0, epsrel=1e-13,
    )
    tail, _ = integrate.quad(
        lambda t: math.exp((s - 1.0) * math.log(t) - 0.5 * t * t - x * t), 1.0, 1.0 + 60.0,
        epsabs=0.0, epsrel=1e-13, limit=200,
    )
    return -0.25 * x * x + math.log(head + tail) - math.lgamma(s)


def log_parabolic_cylinder_d(v, x):
    """Natural log of the parabolic cylinder function D_v(x), v <= 0, x >= 0.

    Works in log space so that arguments whose D_v underflows a double are
    still usable by callers that recombine exponents.
    """
    v = float(v)
    x = float(x)
    _check_pcfd_box(v, x)
    if v == 0.0:
        return -0.25 * x * x
    if x == 0.0:
        return (0.5 * v * math.log(2.0) + 0.5 * math.log(math.pi)
                - math.lgamma(0.5 * (1.0 - v)))
    n = round(-v)
    if abs(-v - n) < 1e-12 and x >= 1.0:
        return _log_pcfd_integer(int(n), x)
    return _log_pcfd_quad(-v, x)


def parabolic_cylinder_d(v, x):
    """Parabolic cylinder function D_v(x) for v in [-60, 0] and x in [0, 50]."""
    return math.exp(log_parabolic_cylinder_d(v, x))


# name used in the operation listings
parabolic_cylinder_D = parabolic_cylinder_d
