"""Normal and inverse Gaussian distributions, Dawson machinery, and closed-form
integrals of rational functions used in the level-crossing analysis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy import special as sc

from .quadrature import integrate_adaptive

SQRT_2PI = math.sqrt(2.0 * math.pi)
_SQRT_HALF_PI = math.sqrt(0.5 * math.pi)
_SQRT2 = math.sqrt(2.0)
# e^{-y^2/2} relative floor used to truncate Gaussian-weighted tails
_GAUSS_FLOOR_LOG = math.log(1e18)


def normal_pdf(x):
    return np.exp(-0.5 * np.square(x)) / SQRT_2PI


def normal_cdf(x):
    return sc.ndtr(x)


def log_normal_cdf(x):
    """log Phi(x); accurate deep in the lower tail."""
    return sc.log_ndtr(x)


def mills_ratio(z):
    """Phi(-z)/phi(z), finite for all z >= 0 and never overflowing there."""
    return _SQRT_HALF_PI * sc.erfcx(np.asarray(z, dtype=float) / _SQRT2)


def phi_plus_scaled_tail(z1, z2, log_factor):
    """Evaluate ``Phi(z1) + exp(log_factor) * Phi(-z2)``.

    Callers guarantee ``log_factor - z2**2/2 == -z1**2/2`` (the inverse Gaussian
    structure), so for ``z2 >= 0`` the second term is ``phi(z1) * mills_ratio(z2)``
    and never forms the overflowing exponential. For ``z2 < 0`` the factor is
    already small and the log-space product is used.
    """
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    log_factor = np.asarray(log_factor, dtype=float)
    pos = z2 >= 0
    with np.errstate(over="ignore", invalid="ignore"):
        via_mills = normal_pdf(z1) * mills_ratio(np.where(pos, z2, 0.0))
        via_log = np.exp(log_factor + sc.log_ndtr(-z2))
    second = np.where(pos, via_mills, via_log)
    return sc.ndtr(z1) + second


@dataclass(frozen=True)
class IGParams:
    mean_param: float
    shape_param: float

    def __post_init__(self):
        if not (self.mean_param > 0 and self.shape_param > 0):
            raise ValueError("inverse Gaussian parameters must be positive, got "
                             f"mean={self.mean_param}, shape={self.shape_param}")


def _check_positive_x(x):
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise ValueError("inverse Gaussian is defined for x > 0 only")
    return x


def ig_pdf(x, p: IGParams):
    x = _check_positive_x(x)
    mu, lam = p.mean_param, p.shape_param
    return np.sqrt(lam / (2.0 * math.pi)) * x ** -1.5 * np.exp(-lam * (x - mu) ** 2 / (2.0 * mu * mu * x))


def ig_cdf(x, p: IGParams):
    x = _check_positive_x(x)
    mu, lam = p.mean_param, p.shape_param
    root = np.sqrt(lam / x)
    z1 = root * (x / mu - 1.0)
    z2 = root * (x / mu + 1.0)
    value = phi_plus_scaled_tail(z1, z2, 2.0 * lam / mu)
    return np.clip(value, 0.0, 1.0)


def dawson(x):
    """Dawson integral exp(-x^2) * int_0^x exp(t^2) dt."""
    return sc.dawsn(x)


def erfi(x):
    return sc.erfi(x)


def gauss_rational_tail(l: float, r: float, weight: str = "one") -> float:
    """int_l^inf (y + r)^-1 e^{-y^2/2} dy, optionally weighted by |y|.

    The pole at y = -r must lie left of the integration range.
    """
    if not l + r > 0:
        raise ValueError(f"singular integrand: need l + r > 0, got l={l}, r={r}")
    if weight == "one":
        def f(y):
            return np.exp(-0.5 * y * y) / (y + r)
    elif weight == "abs_y":
        def f(y):
            return np.abs(y) * np.exp(-0.5 * y * y) / (y + r)
    else:
        raise ValueError(f"unknown weight {weight!r}")
    peak_at = max(l, 0.0)
    upper = math.sqrt(peak_at * peak_at + 2.0 * _GAUSS_FLOOR_LOG)
    if upper <= l:
        return 0.0
    points = [0.0] if l < 0 < upper else None
    return integrate_adaptive(f, l, upper, rel_tol=1e-12, abs_tol=1e-300, points=points).value


@dataclass(frozen=True)
class RationalIntegralParams:
    """Limits and offsets of int_L^inf (y+R)^-1 (y^2+M^2)^-3/2 type integrals."""

    l: float
    r: float
    m: float

    def __post_init__(self):
        if not self.l + self.r > 0:
            raise ValueError(f"need L + R > 0, got L={self.l}, R={self.r}")
        if not self.m > 0:
            raise ValueError(f"need M > 0, got M={self.m}")

    @property
    def p(self) -> float:
        return -self.l / (2.0 * self.m)

    @property
    def k(self) -> float:
        return 2.0 * self.m * self.r


_DPS = 50


def rational_sqrt_integral_1(p: RationalIntegralParams) -> float:
    """Closed form of int_L^inf (y+R)^-1 (y^2+M^2)^-3/2 dy."""
    with mpmath.workdps(_DPS):
        L, R, M = mpmath.mpf(p.l), mpmath.mpf(p.r), mpmath.mpf(p.m)
        a = mpmath.sqrt(R * R + M * M)
        b = mpmath.sqrt(L * L + M * M)
        value = (R / (M ** 2 * a ** 2)
                 - (M ** 2 + L * R) / (M ** 2 * b * a ** 2)
                 + mpmath.log((M ** 2 - L * R + b * a) / ((L + R) * (a - R))) / a ** 3)
        return float(value)


def rational_sqrt_integral_2(p: RationalIntegralParams, branch: str | None = None) -> float:
    """Closed form of int_L^inf |y| (y+R)^-1 (y^2+M^2)^-3/2 dy.

    The formula differs for L >= 0 and L <= 0; ``branch`` ("nonneg"/"nonpos")
    overrides the sign-based choice, which is only meaningful at L = 0.
    """
    if branch is None:
        branch = "nonneg" if p.l >= 0 else "nonpos"
    if branch == "nonneg" and p.l < 0 or branch == "nonpos" and p.l > 0:
        raise ValueError(f"branch {branch!r} does not cover L={p.l}")
    with mpmath.workdps(_DPS):
        L, R, M = mpmath.mpf(p.l), mpmath.mpf(p.r), mpmath.mpf(p.m)
        a = mpmath.sqrt(R * R + M * M)
        b = mpmath.sqrt(L * L + M * M)
        if branch == "nonneg":
            value = (1 / a ** 2 + (R - L) / (a ** 2 * b)
                     + R / a ** 3 * mpmath.log((R + L) * (a - R) / (M ** 2 - R * L + a * b)))
        elif branch == "nonpos":
            value = ((2 * R + M) / (M * a ** 2) - (R - L) / (a ** 2 * b)
                     + R / a ** 3 * mpmath.log(R ** 2 * (a - R) * (M ** 2 - R * L + a * b)
                                               / (M ** 2 * (M + a) ** 2 * (R + L))))
        else:
            raise ValueError(f"unknown branch {branch!r}")
        return float(value)


def _near_one(fn, k, *args):
    # removable singularity at K = 1: interpolate between K = 1 -/+ h
    h = mpmath.mpf("1e-8")
    lo = fn(1 - h, *args)
    hi = fn(1 + h, *args)
    return lo + (k - (1 - h)) * (hi - lo) / (2 * h)


def _ratint3_full(k):
    return ((k - 3) / (1 + k) ** 2 - mpmath.pi * mpmath.sqrt(k) * (k - 3) / (1 + k) ** 3
            + (3 * k - 1) / (1 + k) ** 3 * mpmath.log(k))


def _ratint3_partial(k, pp):
    sk, sp = mpmath.sqrt(k), mpmath.sqrt(pp)
    return ((4 * sp + (3 + k) * pp) / ((k - 1) ** 2 * (1 + sp) ** 2)
            + sk * (3 + k) / (k - 1) ** 3 * mpmath.log((sk + sp) / (sk - sp))
            + (3 * k + 1) / (k - 1) ** 3 * mpmath.log((k - pp) / (k * (1 + sp) ** 2)))


def _ratint4(k, a):
    # a = |P|
    sk, sp = mpmath.sqrt(k), mpmath.sqrt(a)
    return ((5 * k + 1) / (1 + k) ** 2 + mpmath.pi * k ** 1.5 * (k - 3) / (1 + k) ** 3
            + (5 * k - 1) / (k - 1) ** 2
            + (2 * sp * (1 - 3 * k) - (5 * k - 1)) / ((k - 1) ** 2 * (1 + sp) ** 2)
            - k * (3 * k - 1) / (1 + k) ** 3 * mpmath.log(k)
            + k ** 1.5 * (3 + k) / (k - 1) ** 3 * mpmath.log((sp + sk) / (sk - sp))
            + k * (3 * k + 1) / (k - 1) ** 3 * mpmath.log((k - a) / (k * (1 + sp) ** 2)))


def rational_sqrt_integral_3(k: float, p_cap: float | None = None) -> tuple[float, float]:
    """Closed forms of int_0^inf (K+y)^-1 (1+sqrt y)^-3 dy and int_0^P (K-y)^-1 (1+sqrt y)^-3 dy.

    Returns ``(full, partial)``; ``partial`` is NaN when ``p_cap`` is None.
    """
    if not k > 0:
        raise ValueError(f"need K > 0, got {k}")
    if p_cap is not None and not 0 <= p_cap < k:
        raise ValueError(f"need 0 < P < K, got P={p_cap}, K={k}")
    with mpmath.workdps(_DPS):
        K = mpmath.mpf(k)
        full = _ratint3_full(K)
        if p_cap is None:
            partial = math.nan
        elif p_cap == 0:
            partial = 0.0
        else:
            P = mpmath.mpf(p_cap)
            if abs(K - 1) < mpmath.mpf("1e-6"):
                partial = _near_one(_ratint3_partial, K, P)
            else:
                partial = _ratint3_partial(K, P)
        return float(full), float(partial)


def rational_sqrt_integral_4(k: float, p_neg: float) -> float:
    """Closed form of int_P^inf |y| (K+y)^-1 (1+sqrt|y|)^-3 dy for P < 0 < K + P.

    The closed form is written with sqrt(|P|) and K - |P| (the pole -K must stay
    left of P).
    """
    if not k > 0:
        raise ValueError(f"need K > 0, got {k}")
    if not p_neg < 0:
        raise ValueError(f"need P < 0, got {p_neg}")
    if not k + p_neg > 0:
        raise ValueError(f"pole -K inside the range: need K + P > 0, got K={k}, P={p_neg}")
    with mpmath.workdps(_DPS):
        K = mpmath.mpf(k)
        a = mpmath.mpf(-p_neg)
        if abs(K - 1) < mpmath.mpf("1e-6"):
            value = _near_one(_ratint4, K, a)
        else:
            value = _ratint4(K, a)
        return float(value)
