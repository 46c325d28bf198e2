"""Standard normal functions and normal-approximation power formulas.

All sample sizes are continuous (no rounding). Testing is one-sided at level
``alpha`` with ``alpha < 0.5`` so that the critical quantile ``F(alpha)`` is
negative. Throughout, ``F`` denotes the standard normal quantile.
"""

from __future__ import annotations

import math

SQRT_2PI = math.sqrt(2.0 * math.pi)
_SQRT2 = math.sqrt(2.0)

# Acklam's rational approximation; refined by one Halley step below.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def _check_finite(x, name="x"):
    if not math.isfinite(x):
        raise ValueError(f"{name} must be finite, got {x!r}")


def _check_open_unit(p, name):
    if not (0.0 < p < 1.0):
        raise ValueError(f"{name} must lie strictly between 0 and 1, got {p!r}")


def normal_cdf(x: float) -> float:
    """Standard normal CDF, accurate to ~1e-16 absolute."""
    _check_finite(x)
    return 0.5 * math.erfc(-x / _SQRT2)


def normal_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / SQRT_2PI


def _acklam(p: float) -> float:
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        return (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
               ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    if p > 1.0 - _P_LOW:
        return -_acklam(1.0 - p)
    q = p - 0.5
    r = q * q
    return (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / \
           (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)


def normal_quantile(p: float) -> float:
    """Inverse of :func:`normal_cdf` on the open interval (0, 1).

    The rational starting point is good to about 1e-9 relative; one Halley
    step against ``erfc`` brings it to machine precision.
    """
    _check_open_unit(p, "p")
    if p == 0.5:
        return 0.0
    # Work in the lower tail and reflect, which keeps the result odd-symmetric.
    if p > 0.5:
        return -normal_quantile(1.0 - p)
    x = _acklam(p)
    e = 0.5 * math.erfc(-x / _SQRT2) - p
    u = e * SQRT_2PI * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


def _check_alpha(alpha):
    if not (0.0 < alpha < 0.5):
        raise ValueError(f"alpha must lie in (0, 0.5), got {alpha!r}")


def _check_positive(value, name):
    if not (value > 0.0) or not math.isfinite(value):
        raise ValueError(f"{name} must be a positive finite number, got {value!r}")


def sample_size(alpha: float, beta_err: float, delta: float) -> float:
    """Total sample size of a 1:1 two-arm comparison.

    ``N = 4 (F(alpha) + F(beta_err))^2 / delta^2``, returned unrounded.
    """
    _check_alpha(alpha)
    # beta_err = 0.5 is allowed: F(0.5) = 0, so the design only just reaches 50% power
    if not (0.0 < beta_err <= 0.5):
        raise ValueError(f"beta_err must lie in (0, 0.5], got {beta_err!r}")
    _check_positive(delta, "delta")
    z = normal_quantile(alpha) + normal_quantile(beta_err)
    return 4.0 * z * z / (delta * delta)


def power_exact(n_total: float, delta: float, alpha: float) -> float:
    """Power ``Phi(sqrt(N) * delta / 2 + F(alpha))`` of the two-arm comparison."""
    _check_positive(n_total, "n_total")
    _check_positive(delta, "delta")
    _check_alpha(alpha)
    return normal_cdf(0.5 * math.sqrt(n_total) * delta + normal_quantile(alpha))


def power_linear(n_total: float, delta: float, alpha: float) -> float:
    """First-order Taylor expansion of :func:`power_exact` around 50% power.

    Not clamped: outside roughly 25-75% power the value drifts away from the
    exact power and can leave [0, 1].
    """
    _check_positive(n_total, "n_total")
    _check_positive(delta, "delta")
    _check_alpha(alpha)
    return (math.sqrt(n_total) * delta / (2.0 * SQRT_2PI)
            + normal_quantile(alpha) / SQRT_2PI + 0.5)


def power_linear_intercept(alpha: float) -> float:
    """Constant term of :func:`power_linear`; close to zero near alpha = 0.1."""
    _check_alpha(alpha)
    return normal_quantile(alpha) / SQRT_2PI + 0.5


def g_function(x: float, r: float) -> float:
    """``G(x|r) = (F(1-x) - r F(1-x/r)) / (r - 1)``.

    If two studies differ in signal strength by a factor ``r`` and their
    powers are exactly ``x`` and ``x/r``, then ``normal_cdf(G(x|r))`` is the
    one-sided level at which that proportionality holds.
    """
    if not (r > 1.0 + 1e-9) or not math.isfinite(r):
        raise ValueError(f"r must exceed 1, got {r!r}")
    _check_open_unit(x, "x")
    return (normal_quantile(1.0 - x) - r * normal_quantile(1.0 - x / r)) / (r - 1.0)


def implied_alpha(x: float, r: float) -> float:
    return normal_cdf(g_function(x, r))


def linear_cdf(x: float) -> float:
    """Tangent line of the normal CDF at zero."""
    _check_finite(x)
    return 0.5 + x / SQRT_2PI


def linear_cdf_error(x: float) -> float:
    return abs(normal_cdf(x) - linear_cdf(x))
