"""Problem-instance types for the compound renewal level-crossing problem.

A :class:`RenewalModel` bundles the law of the first inter-arrival time ``T1``,
the generic inter-arrival time ``T``, the jump size ``Y`` and the drift rate ``c``.
Moment functionals (:class:`DerivedConstants`) and the algebraic identities
linking the standardised scores of jump and time sums are exposed here as
residual-returning functions so they can be checked to a stated tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy import special as sc

MASS_TOLERANCE = 1e-6
DEFAULT_DENSITY_BOUND = 1e6


class ModelError(ValueError):
    """Raised when a model violates a structural hypothesis."""


# ---------------------------------------------------------------------------
# Distributions


@dataclass(frozen=True)
class Exponential:
    rate: float

    def __post_init__(self):
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise ValueError(f"exponential rate must be positive, got {self.rate}")

    kind = "exponential"

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, self.rate * np.exp(-self.rate * np.maximum(x, 0.0)), 0.0)

    def log_pdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(x >= 0, math.log(self.rate) - self.rate * x, -np.inf)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, -np.expm1(-self.rate * np.maximum(x, 0.0)), 0.0)

    def survival(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, np.exp(-self.rate * np.maximum(x, 0.0)), 1.0)

    @property
    def mean(self) -> float:
        return 1.0 / self.rate

    @property
    def variance(self) -> float:
        return 1.0 / self.rate ** 2

    @property
    def third_abs_moment(self) -> float:
        return 6.0 / self.rate ** 3

    def laplace(self, theta):
        """E exp(-theta X)."""
        return self.rate / (self.rate + np.asarray(theta, dtype=float))

    def sample(self, rng: np.random.Generator, size=None):
        return rng.exponential(1.0 / self.rate, size)


@dataclass(frozen=True)
class Gamma:
    shape: float
    rate: float

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0 and math.isfinite(self.shape) and math.isfinite(self.rate)):
            raise ValueError(f"gamma parameters must be positive, got shape={self.shape}, rate={self.rate}")

    kind = "gamma"

    def log_pdf(self, x):
        x = np.asarray(x, dtype=float)
        k, b = self.shape, self.rate
        with np.errstate(divide="ignore", invalid="ignore"):
            out = k * math.log(b) + (k - 1.0) * np.log(np.where(x > 0, x, 1.0)) - b * x - sc.gammaln(k)
        if k == 1.0:
            return np.where(x >= 0, out, -np.inf)
        at_zero = np.inf if k < 1 else -np.inf
        return np.where(x > 0, out, np.where(x == 0, at_zero, -np.inf))

    def pdf(self, x):
        return np.exp(self.log_pdf(x))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return sc.gammainc(self.shape, self.rate * np.maximum(x, 0.0))

    def survival(self, x):
        x = np.asarray(x, dtype=float)
        return sc.gammaincc(self.shape, self.rate * np.maximum(x, 0.0))

    @property
    def mean(self) -> float:
        return self.shape / self.rate

    @property
    def variance(self) -> float:
        return self.shape / self.rate ** 2

    @property
    def third_abs_moment(self) -> float:
        k = self.shape
        return k * (k + 1.0) * (k + 2.0) / self.rate ** 3

    def laplace(self, theta):
        return (self.rate / (self.rate + np.asarray(theta, dtype=float))) ** self.shape

    def sample(self, rng: np.random.Generator, size=None):
        return rng.gamma(self.shape, 1.0 / self.rate, size)


@dataclass(frozen=True, eq=False)
class GridDensity:
    """Piecewise-linear density on the uniform grid ``origin + step * i``.

    Values outside the grid are zero. Mass follows the trapezoid rule and must
    be within ``MASS_TOLERANCE`` of one.
    """

    origin: float
    step: float
    values: np.ndarray = field(repr=False)

    kind = "grid"

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if not (self.step > 0 and math.isfinite(self.step) and math.isfinite(self.origin)):
            raise ValueError(f"grid needs finite origin and positive step, got {self.origin}, {self.step}")
        if values.ndim != 1 or values.size < 2:
            raise ValueError("grid density needs at least two values")
        if np.any(~np.isfinite(values)) or np.any(values < 0):
            raise ValueError("grid density values must be finite and nonnegative")
        mass = self.mass
        if abs(mass - 1.0) > MASS_TOLERANCE:
            raise ValueError(f"grid density mass {mass!r} differs from 1 by more than {MASS_TOLERANCE}")

    @classmethod
    def from_distribution(cls, dist, step: float | None = None, upper: float | None = None) -> "GridDensity":
        """Tabulate ``dist`` on ``[0, upper]`` and renormalise to unit trapezoid mass.

        Defaults: ``step = mean/400`` and ``upper = mean + 12*stddev``.
        """
        step = dist.mean / 400.0 if step is None else step
        upper = dist.mean + 12.0 * math.sqrt(dist.variance) if upper is None else upper
        n = int(math.ceil(upper / step)) + 1
        x = step * np.arange(n)
        values = np.asarray(dist.pdf(x), dtype=float)
        if not np.all(np.isfinite(values)):
            raise ValueError("cannot tabulate an unbounded density")
        mass = step * (values.sum() - 0.5 * (values[0] + values[-1]))
        return cls(0.0, step, values / mass)

    @property
    def nodes(self) -> np.ndarray:
        return self.origin + self.step * np.arange(self.values.size)

    @property
    def upper(self) -> float:
        return self.origin + self.step * (self.values.size - 1)

    @property
    def mass(self) -> float:
        v = self.values
        return float(self.step * (v.sum() - 0.5 * (v[0] + v[-1])))

    def _cell(self, x):
        pos = (np.asarray(x, dtype=float) - self.origin) / self.step
        idx = np.clip(np.floor(pos).astype(np.int64), 0, self.values.size - 2)
        frac = pos - idx
        return pos, idx, frac

    def pdf(self, x):
        pos, idx, frac = self._cell(x)
        v = self.values
        out = v[idx] + frac * (v[idx + 1] - v[idx])
        inside = (pos >= 0) & (pos <= self.values.size - 1)
        return np.where(inside, out, 0.0)

    def log_pdf(self, x):
        with np.errstate(divide="ignore"):
            return np.log(self.pdf(x))

    def _cumulative(self):
        v = self.values
        return np.concatenate([[0.0], np.cumsum(0.5 * self.step * (v[:-1] + v[1:]))])

    def cdf(self, x):
        pos, idx, frac = self._cell(x)
        v = self.values
        cum = self._cumulative()
        d = frac * self.step
        within = cum[idx] + d * v[idx] + 0.5 * d * d * (v[idx + 1] - v[idx]) / self.step
        out = np.where(pos <= 0, 0.0, np.where(pos >= self.values.size - 1, cum[-1], within))
        return np.clip(out, 0.0, 1.0)

    def survival(self, x):
        return np.clip(1.0 - self.cdf(x), 0.0, 1.0)

    def _moment(self, fn) -> float:
        y = fn(self.nodes) * self.values
        return float(self.step * (y.sum() - 0.5 * (y[0] + y[-1])))

    @property
    def mean(self) -> float:
        return self._moment(lambda x: x)

    @property
    def variance(self) -> float:
        m = self.mean
        return self._moment(lambda x: (x - m) ** 2)

    @property
    def third_abs_moment(self) -> float:
        # compact support: always finite
        return self._moment(lambda x: np.abs(x) ** 3)

    def laplace(self, theta):
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        y = np.exp(-np.outer(theta, self.nodes)) * self.values
        out = self.step * (y.sum(axis=1) - 0.5 * (y[:, 0] + y[:, -1]))
        return out if out.size > 1 else float(out[0])

    def inverse_cdf_table(self):
        """Node abscissae and normalised cumulative masses for inverse-CDF sampling."""
        cum = self._cumulative()
        return self.nodes, cum / cum[-1]

    def sample(self, rng: np.random.Generator, size=None):
        x, cum = self.inverse_cdf_table()
        return np.interp(rng.random(size), cum, x)


DistributionSpec = Union[Exponential, Gamma, GridDensity]


# ---------------------------------------------------------------------------
# Model and derived constants


def _probe_points(dist) -> np.ndarray:
    sd = math.sqrt(dist.variance)
    upper = dist.mean + 12.0 * sd
    pts = [np.linspace(0.0, upper, 2001), np.geomspace(1e-12, max(upper, 1e-9), 200)]
    if isinstance(dist, GridDensity):
        pts.append(dist.nodes)
    return np.concatenate(pts)


@dataclass(frozen=True)
class RenewalModel:
    first_arrival: DistributionSpec
    inter_arrival: DistributionSpec
    jump: DistributionSpec
    premium_rate: float
    density_bound: float = DEFAULT_DENSITY_BOUND

    def __post_init__(self):
        if not (self.premium_rate >= 0 and math.isfinite(self.premium_rate)):
            raise ModelError(f"premium rate must be finite and nonnegative, got {self.premium_rate}")
        for name in ("first_arrival", "inter_arrival", "jump"):
            dist = getattr(self, name)
            if isinstance(dist, GridDensity) and dist.origin < 0:
                raise ModelError(f"{name}: support must be positive (grid origin {dist.origin} < 0)")
            values = np.asarray(dist.pdf(_probe_points(dist)), dtype=float)
            if not np.all(np.isfinite(values)):
                raise ModelError(f"{name}: density is not bounded (non-finite pdf value)")
            if values.max() > self.density_bound:
                raise ModelError(f"{name}: density exceeds the bound {self.density_bound:g}")
            for label, moment in (("mean", dist.mean), ("variance", dist.variance),
                                  ("third absolute moment", dist.third_abs_moment)):
                if not math.isfinite(moment):
                    raise ModelError(f"{name}: {label} is not finite")

    @property
    def c(self) -> float:
        return self.premium_rate


@dataclass(frozen=True)
class DerivedConstants:
    """Moment functionals shared by the approximation and the identities.

    ``m_ratio = E T / E Y``, ``c_star = E Y / E T``, ``d_squared = b1 / (E Y)^3`` with
    ``b1 = (E T)^2 Var Y + (E Y)^2 Var T``, ``b2 = E Y Var T``, ``b3 = E T Var Y``,
    ``b4 = Var Y Var T``.
    """

    m_ratio: float
    d_squared: float
    c_star: float
    b1: float
    b2: float
    b3: float
    b4: float
    mean_t: float
    var_t: float
    mean_y: float
    var_y: float

    @classmethod
    def from_moments(cls, mean_t: float, var_t: float, mean_y: float, var_y: float) -> "DerivedConstants":
        for label, value in (("E T", mean_t), ("Var T", var_t), ("E Y", mean_y), ("Var Y", var_y)):
            if not math.isfinite(value):
                raise ModelError(f"{label} is not finite")
        if not (mean_t > 0 and mean_y > 0):
            raise ModelError("means of T and Y must be positive")
        mean_t, var_t, mean_y, var_y = (float(x) for x in (mean_t, var_t, mean_y, var_y))
        b1 = mean_t ** 2 * var_y + mean_y ** 2 * var_t
        b2 = mean_y * var_t
        b3 = mean_t * var_y
        b4 = var_y * var_t
        return cls(
            m_ratio=mean_t / mean_y,
            d_squared=b1 / mean_y ** 3,
            c_star=mean_y / mean_t,
            b1=b1, b2=b2, b3=b3, b4=b4,
            mean_t=mean_t, var_t=var_t, mean_y=mean_y, var_y=var_y,
        )


def derived_constants(model: RenewalModel) -> DerivedConstants:
    moments = {}
    for name, dist in (("inter_arrival", model.inter_arrival), ("jump", model.jump)):
        mean, var = dist.mean, dist.variance
        if not (math.isfinite(mean) and math.isfinite(var)):
            raise ModelError(f"{name}: non-finite moment (mean={mean}, variance={var})")
        moments[name] = (mean, var)
    (mt, vt), (my, vy) = moments["inter_arrival"], moments["jump"]
    return DerivedConstants.from_moments(mt, vt, my, vy)


@dataclass(frozen=True)
class CrossingQuery:
    u: float
    c: float
    v: float = 0.0
    t: float = math.inf

    def __post_init__(self):
        for name in ("u", "c", "v"):
            value = getattr(self, name)
            if not (value >= 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be finite and nonnegative, got {value}")
        if not self.t > 0:
            raise ValueError(f"horizon t must be positive, got {self.t}")
        if self.t < self.v:
            raise ValueError(f"horizon t={self.t} precedes the conditioning value v={self.v}")


METHODS = ("ig_approx", "exact_series", "monte_carlo")


@dataclass(frozen=True)
class CdfEstimate:
    value: float
    method: str
    error: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"probability out of range: {self.value!r}")
        if not self.error >= 0:
            raise ValueError(f"error must be nonnegative, got {self.error!r}")

    def __float__(self) -> float:
        return float(self.value)


# ---------------------------------------------------------------------------
# Standardised scores and the identities between them


def delta_n(a, b, n, k: DerivedConstants):
    return (b * k.mean_y - a * k.mean_t) / np.sqrt(k.b1 * n)


def lambda_n(a, b, n, k: DerivedConstants):
    return (k.b1 * n - (k.b2 * a + k.b3 * b)) / np.sqrt(k.b1 * k.b4 * n)


def standardized_scores(a, b, n, k: DerivedConstants):
    """Standardised jump-sum and time-sum scores ``((a - n EY)/sqrt(n VarY), (b - n ET)/sqrt(n VarT))``."""
    return ((a - n * k.mean_y) / np.sqrt(n * k.var_y),
            (b - n * k.mean_t) / np.sqrt(n * k.var_t))


def _rel(lhs, rhs, *scale):
    denom = max(1.0, *(abs(float(s)) for s in scale))
    return abs(float(lhs) - float(rhs)) / denom


def identity_residual_pythagorean(a, b, n, k: DerivedConstants) -> float:
    """Residual of Y_n(a)^2 + T_n(b)^2 = Delta_n^2 + Lambda_n^2, relative to max(1, |lhs|)."""
    ys, ts = standardized_scores(a, b, n, k)
    lhs = ys * ys + ts * ts
    d, l = delta_n(a, b, n, k), lambda_n(a, b, n, k)
    rhs = d * d + l * l
    return abs(float(lhs - rhs)) / max(1.0, abs(float(lhs)))


def _one_minus_sqrt_one_plus(h):
    # 1 - sqrt(1 + h) without cancellation
    return -h / (1.0 + math.sqrt(1.0 + h))


def identity_residual_lambda_recurrence(a, b, n, k: DerivedConstants) -> float:
    lam_n = float(lambda_n(a, b, n, k))
    lam_next = float(lambda_n(a, b, n + 1, k))
    lhs = lam_next - lam_n
    rhs = math.sqrt(k.b1 / (k.b4 * n)) + lam_next * _one_minus_sqrt_one_plus(1.0 / n)
    return _rel(lhs, rhs, lam_n, lam_next)


def identity_residual_normalization(a, b, n, k: DerivedConstants) -> tuple[float, float]:
    """Residuals of the two expressions of ``1 - a/(n EY)`` and ``1 - sqrt(a/(n EY))``.

    The square-root variant needs ``a > 0``.
    """
    if not a > 0:
        raise ValueError(f"square-root identity needs a > 0, got {a}")
    d = float(delta_n(a, b, n, k))
    l = float(lambda_n(a, b, n, k))
    scale = 1.0 / math.sqrt(k.b1 * n)
    t_lam = math.sqrt(k.b4) * scale * l
    t_del = k.b3 / k.mean_y * scale * d
    ratio = a / (n * k.mean_y)
    lhs_plain = 1.0 - ratio
    plain = _rel(lhs_plain, t_lam + t_del, lhs_plain, t_lam, t_del)
    root = math.sqrt(ratio)
    lhs_root = 1.0 - root
    rhs_root = (t_lam + t_del) / (1.0 + root)
    sqrt_variant = _rel(lhs_root, rhs_root, lhs_root, t_lam / (1.0 + root), t_del / (1.0 + root))
    return plain, sqrt_variant


def identity_residual_change_of_variables(u_plus_cv: float, x: float, c: float, n, k: DerivedConstants
                                          ) -> tuple[float, float]:
    """Residuals of Delta_n and 1 + x rewritten through Lambda_n.

    Delta_n and Lambda_n are taken at ``a = w (1 + x)``, ``b = w x / c`` with ``w = u + c v``.
    """
    if not c > 0:
        raise ValueError("change of variables needs c > 0")
    w = u_plus_cv
    a = w * (1.0 + x)
    b = w * x / c
    d = float(delta_n(a, b, n, k))
    l = float(lambda_n(a, b, n, k))
    root_n = math.sqrt(n)
    bracket_tail = math.sqrt(k.b1 / k.b4) * (root_n + k.b3 * w / (k.b1 * c * root_n))
    bracket = -l + bracket_tail
    drift = k.mean_y / c - k.mean_t

    coef_d = math.sqrt(k.b4) * drift / (k.b2 + k.b3 / c)
    last = k.mean_y * w / (c * math.sqrt(k.b1) * root_n)
    rhs_d = coef_d * bracket - last
    res_d = _rel(d, rhs_d, d, coef_d * l, coef_d * bracket_tail, last)

    coef_x = k.mean_y * math.sqrt(k.b1 * k.b4) / (k.b1 + k.b3 * drift) * root_n / w
    rhs_x = coef_x * bracket
    res_x = _rel(1.0 + x, rhs_x, 1.0 + x, coef_x * l, coef_x * bracket_tail)
    return res_d, res_x
