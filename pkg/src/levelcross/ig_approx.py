"""Inverse Gaussian approximation of the first level-crossing time.

The central object is

    Int_t(u, c, v) = int_0^{c(t-v)/(u+cv)} (1+x)^-1 phi_{cM(1+x), c^2 D^2 (1+x)/(u+cv)}(x) dx,

a Gaussian integrand with mean ``cM(1+x)`` and variance ``c^2 D^2 (1+x)/(u+cv)``.
Its antiderivative is an inverse Gaussian c.d.f., which gives a closed form valid
on both sides of the critical rate ``c* = 1/M``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import special
from .model import CdfEstimate, CrossingQuery, Exponential, ModelError, RenewalModel, derived_constants
from .quadrature import integrate_adaptive, integrate_semi_infinite

log = logging.getLogger(__name__)

QUAD_REL_TOL = 1e-9
QUAD_ABS_TOL = 1e-13
# below this fraction of c* the c -> 0 limit is used
C_EPS_FRACTION = 1e-10


@dataclass(frozen=True)
class IntParams:
    u: float
    c: float
    v: float
    t: float
    m_ratio: float
    d_squared: float

    def __post_init__(self):
        if not (self.u >= 0 and self.c >= 0 and self.v >= 0):
            raise ValueError("u, c, v must be nonnegative")
        if not self.u + self.c * self.v > 0:
            raise ValueError("need u + c*v > 0")
        if not (self.t >= self.v):
            raise ValueError(f"need t >= v, got t={self.t}, v={self.v}")
        if not self.d_squared > 0:
            raise ValueError("need D^2 > 0")

    @property
    def level(self) -> float:
        return self.u + self.c * self.v

    @property
    def shape_param(self) -> float:
        """Inverse Gaussian shape ``(u+cv)/(c^2 D^2)``."""
        return self.level / (self.c ** 2 * self.d_squared)

    @property
    def upper_limit(self) -> float:
        return self.c * (self.t - self.v) / self.level


# ---------------------------------------------------------------------------
# Closed form


def _bracket(w, c, tau, m, d):
    """Antiderivative bracket at ``x = 1 + c*tau`` (``tau`` finite, arrays broadcast).

    Arguments are written with ``c`` factored out of ``x(1 - cM) - 1`` so that the
    expression stays exact as ``c -> 0``.
    """
    w = np.asarray(w, dtype=float)
    tau = np.asarray(tau, dtype=float)
    y = 1.0 + c * tau
    root_w = np.sqrt(w)
    z1 = root_w * (tau - m * y) / (d * np.sqrt(y))
    if c == 0.0:
        return special.normal_cdf(z1)
    z2 = root_w * (y * (1.0 - c * m) + 1.0) / (c * d * np.sqrt(y))
    log_factor = 2.0 * w * (1.0 - c * m) / (c * c * d * d)
    return special.phi_plus_scaled_tail(z1, z2, log_factor)


def _bracket_at_infinity(w, c, m, d):
    w = np.asarray(w, dtype=float)
    if c == 0.0 or c * m <= 1.0:
        return np.ones_like(w)
    return np.exp(-2.0 * w * (c * m - 1.0) / (c * c * d * d))


def _int_closed(w, c, v, t, m, d2):
    """Vectorised closed form over the level ``w = u + c v`` and ``v``; no clamping."""
    d = math.sqrt(d2)
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    lower = _bracket(w, c, 0.0, m, d)
    if math.isinf(t):
        upper = _bracket_at_infinity(w, c, m, d)
    else:
        upper = _bracket(w, c, (t - v) / w, m, d)
    return upper - lower


def _clamp(value):
    value = np.asarray(value, dtype=float)
    out = np.clip(value, 0.0, 1.0)
    if np.any(np.abs(out - value) > 1e-12):
        log.info("clamped Int outside [0, 1]: %s", value[np.abs(out - value) > 1e-12])
    return out


def int_tm_closed(p: IntParams) -> float:
    if not p.c > 0:
        raise ValueError("closed form needs c > 0; use int_tm for the c -> 0 limit")
    return float(_clamp(_int_closed(p.level, p.c, p.v, p.t, p.m_ratio, p.d_squared)))


def int_tm(p: IntParams, c_eps: float | None = None) -> float:
    """Int_t with the c -> 0 limit taken analytically below ``c_eps``.

    The default threshold is ``1e-10 * c*``.
    """
    if c_eps is None:
        c_eps = C_EPS_FRACTION / p.m_ratio
    c = p.c if p.c >= c_eps else 0.0
    return float(_clamp(_int_closed(p.level, c, p.v, p.t, p.m_ratio, p.d_squared)))


def int_tm_c_limit(u: float, v: float, t: float, m_ratio: float, d_squared: float) -> float:
    """The c -> 0 limit ``Phi(sqrt(u)((t-v)/u - M)/D) - Phi(-sqrt(u) M / D)``."""
    d = math.sqrt(d_squared)
    lower = special.normal_cdf(-math.sqrt(u) * m_ratio / d)
    if math.isinf(t):
        return float(1.0 - lower)
    return float(special.normal_cdf(math.sqrt(u) * ((t - v) / u - m_ratio) / d) - lower)


# ---------------------------------------------------------------------------
# Quadrature route


def int_tm_integrand(x, p: IntParams):
    x = np.asarray(x, dtype=float)
    y = 1.0 + x
    sd = p.c * math.sqrt(p.d_squared) * np.sqrt(y / p.level)
    return special.normal_pdf((x - p.c * p.m_ratio * y) / sd) / (sd * y)


def step5_integrand(x, p: IntParams):
    """The same integrand in the form it takes at the end of the error analysis:
    ``sqrt(w)/sqrt(2 pi c^2 D^2) (1+x)^-3/2 exp{-(x - (1+x) c/c*)^2 / (2 c^2 D^2 (1+x)/w)}``.
    """
    x = np.asarray(x, dtype=float)
    w = p.level
    c2d2 = p.c ** 2 * p.d_squared
    ratio = p.c * p.m_ratio  # c / c*
    return (math.sqrt(w) / math.sqrt(2.0 * math.pi * c2d2) * (1.0 + x) ** -1.5
            * np.exp(-0.5 * (x - (1.0 + x) * ratio) ** 2 / (c2d2 * (1.0 + x) / w)))


def _peak_points(p: IntParams, upper: float):
    cm = p.c * p.m_ratio
    pts = []
    if cm < 1.0:
        peak = cm / (1.0 - cm)
        sd = p.c * math.sqrt(p.d_squared * (1.0 + peak) / p.level)
        pts = [peak + k * sd for k in (-10, -4, -1, 0, 1, 4, 10)]
    return [x for x in pts if 0.0 < x < upper]


def int_tm_quadrature(p: IntParams, rel_tol: float = QUAD_REL_TOL, abs_tol: float = QUAD_ABS_TOL) -> float:
    if not p.c > 0:
        raise ValueError("quadrature route needs c > 0; use int_tm for the c -> 0 limit")
    if p.t == p.v:
        return 0.0

    def f(x):
        return int_tm_integrand(x, p)

    if math.isinf(p.t):
        res = integrate_semi_infinite(f, 0.0, rel_tol, abs_tol, decay_hint="power",
                                      points=_peak_points(p, math.inf))
    else:
        upper = p.upper_limit
        res = integrate_adaptive(f, 0.0, upper, rel_tol, abs_tol, points=_peak_points(p, upper))
    if not res.converged:
        log.warning("Int quadrature did not converge: %s", res)
    return res.value


def int_tm_ig_branches(p: IntParams) -> float:
    """Int_t through the inverse Gaussian c.d.f. with mean ``1/(1-cM)`` (c < c*) or
    the tilted form with mean ``1/(cM-1)`` (c > c*). Used as a cross-check only.
    """
    cm = p.c * p.m_ratio
    lam = p.shape_param
    hi = p.upper_limit + 1.0
    if cm < 1.0:
        ig = special.IGParams(1.0 / (1.0 - cm), lam)
        factor = 1.0
    elif cm > 1.0:
        mtilde = 1.0 / (cm - 1.0)
        ig = special.IGParams(mtilde, lam)
        factor = math.exp(-2.0 * lam / mtilde)
    else:
        raise ValueError("inverse Gaussian branches are undefined at c = c*")
    top = 1.0 if math.isinf(hi) else float(special.ig_cdf(hi, ig))
    return factor * (top - float(special.ig_cdf(1.0, ig)))


# ---------------------------------------------------------------------------
# Probabilities for a renewal model


def heuristic_error(level: float) -> float:
    """C ln(w)/w with C = 1. The constant is not known, so this is uncalibrated."""
    if level <= math.e:
        return 1.0
    return min(1.0, math.log(level) / level)


def check_hypotheses(model: RenewalModel) -> None:
    k = derived_constants(model)
    if not k.d_squared > 0:
        raise ModelError("approximation hypothesis failed: D^2 > 0")
    for name in ("inter_arrival", "jump"):
        if not math.isfinite(getattr(model, name).third_abs_moment):
            raise ModelError(f"approximation hypothesis failed: finite third moment of {name}")
    if not model.premium_rate > 0:
        raise ModelError("approximation hypothesis failed: c > 0")


def approx_conditional_cdf(model: RenewalModel, q: CrossingQuery) -> CdfEstimate:
    """Approximate P{v < Theta <= t | T1 = v} by Int_t(u, c, v)."""
    check_hypotheses(model)
    k = derived_constants(model)
    c = model.premium_rate
    level = q.u + c * q.v
    meta = {"m_ratio": k.m_ratio, "d_squared": k.d_squared, "error_calibrated": False}
    if q.t == q.v:
        return CdfEstimate(0.0, "ig_approx", 0.0, meta)
    value = int_tm(IntParams(q.u, c, q.v, q.t, k.m_ratio, k.d_squared))
    return CdfEstimate(value, "ig_approx", heuristic_error(level), meta)


def jump_exceedance(u: float, c: float, v, jump) -> np.ndarray | float:
    """P{u + c v - Y < 0}."""
    level = u + c * np.asarray(v, dtype=float)
    if np.any(level < 0):
        raise ValueError("need u + c v >= 0")
    out = jump.survival(level)
    return float(out) if np.ndim(out) == 0 else out


def approx_unconditional_cdf(model: RenewalModel, u: float, t: float,
                             rel_tol: float = 1e-10, abs_tol: float = 1e-13) -> CdfEstimate:
    """P{Theta <= t} ~ int_0^t P{Y > u+cv} f_T1(v) dv + int_0^t Int_t(u,c,v) f_T1(v) dv."""
    if not t > 0:
        raise ValueError("need t > 0")
    check_hypotheses(model)
    k = derived_constants(model)
    c = model.premium_rate
    t1 = model.first_arrival

    def jump_term(v):
        return jump_exceedance(u, c, v, model.jump) * t1.pdf(v)

    first_quad = integrate_adaptive(jump_term, 0.0, t, rel_tol, abs_tol)
    first = first_quad.value
    meta = {"first_term_quadrature": first}
    if isinstance(t1, Exponential) and isinstance(model.jump, Exponential):
        bt, by = t1.rate, model.jump.rate
        first = bt * math.exp(-by * u) / (bt + c * by) * -math.expm1(-(bt + c * by) * t)
        meta["first_term_closed"] = first

    def int_term(v):
        v = np.asarray(v, dtype=float)
        return _clamp(_int_closed(u + c * v, c, v, t, k.m_ratio, k.d_squared)) * t1.pdf(v)

    second = integrate_adaptive(int_term, 0.0, t, rel_tol, abs_tol)
    value = min(1.0, max(0.0, first + second.value))
    meta.update({"first_term": first, "second_term": second.value,
                 "quadrature_error": first_quad.error_estimate + second.error_estimate,
                 "error_calibrated": False})
    return CdfEstimate(value, "ig_approx", min(1.0, heuristic_error(u) + meta["quadrature_error"]), meta)
