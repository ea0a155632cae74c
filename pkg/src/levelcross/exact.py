"""Exact distribution of the crossing time through Kendall's identity.

With ``T1 = v`` fixed, the crossing-time density at ``z > v`` is

    (u + c v)/(u + c z) * sum_{n>=1} P{M(u + c z) = n} f_T^{*n}(z - v),

where ``M(s) = inf{k >= 1 : Y_1 + ... + Y_k > s} - 1`` counts the jumps needed to
pass ``s``. The infinite series is cut where a Chernoff bound on the counting
tail drops below ``tail_epsilon``; the bound is carried into the error field.

Kendall's identity needs ``Z(s)`` to have stationary independent increments,
which holds when ``M`` is a Poisson process, i.e. for exponential jumps. For
other jump laws the same series is still evaluated, but simulation shows it is
not the crossing-time law; results carry ``meta["identity_exact"] = False``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy import special as sc
from scipy.signal import fftconvolve

from .model import CdfEstimate, Exponential, Gamma, GridDensity, RenewalModel
from .quadrature import integrate_adaptive, integrate_adaptive_vec

log = logging.getLogger(__name__)

MAX_GRID_POINTS = 20_000_000


class SeriesError(RuntimeError):
    pass


@dataclass(frozen=True)
class SeriesControls:
    tail_epsilon: float = 1e-12
    max_terms: int = 100_000
    grid_step: float | None = None
    rel_tol: float = 1e-10
    abs_tol: float = 1e-13

    def __post_init__(self):
        if not 0 < self.tail_epsilon < 1:
            raise ValueError("tail_epsilon must lie in (0, 1)")
        if self.max_terms < 1:
            raise ValueError("max_terms must be at least 1")


@dataclass(frozen=True)
class CountingPmf:
    s: float
    probabilities: np.ndarray = field(repr=False)
    tail: float

    def __post_init__(self):
        total = float(np.sum(self.probabilities)) + self.tail
        if abs(total - 1.0) > 1e-9 or np.any(self.probabilities < 0):
            raise ValueError(f"counting pmf does not normalise: total {total!r}")


# ---------------------------------------------------------------------------
# Convolution powers


def _gamma_family(dist):
    """(shape, rate) for members of the gamma family, else None."""
    if isinstance(dist, Exponential):
        return 1.0, dist.rate
    if isinstance(dist, Gamma):
        return dist.shape, dist.rate
    return None


def _grid_self_convolve(f: np.ndarray, g: np.ndarray, h: float) -> np.ndarray:
    """Node values of the exact convolution of the piecewise-linear interpolants."""
    full = fftconvolve(f, g)
    n = full.size
    k = np.arange(n)
    fp = np.zeros(n + 2)
    gp = np.zeros(n + 2)
    cp = np.zeros(n + 2)
    fp[:f.size] = f
    gp[:g.size] = g
    cp[:n] = full
    below = np.concatenate([[0.0], full[:-1]])
    out = h * ((2.0 * full - fp[k] * g[0] - f[0] * gp[k]) / 3.0
               + (below + cp[k + 1] - f[0] * gp[k + 1] - fp[k + 1] * g[0]) / 6.0)
    return np.maximum(out, 0.0)


def conv_pow_density(d, n: int, domain: float | None = None):
    """Density of the sum of ``n`` independent copies of ``d``.

    Exponential and gamma laws stay in closed form. Grid densities are convolved
    on their grid with the trapezoid rule and renormalised after every step; the
    largest per-step renormalisation is stored as ``renormalisation_drift``.
    If ``domain`` is given and the result carries more than 1e-6 of its mass
    beyond it, ``ValueError`` is raised.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if n == 1:
        return d
    fam = _gamma_family(d)
    if fam is not None:
        shape, rate = fam
        return Gamma(n * shape, rate)
    if not isinstance(d, GridDensity):
        raise TypeError(f"unsupported distribution {d!r}")
    size = n * (d.values.size - 1) + 1
    if size > MAX_GRID_POINTS:
        raise ValueError(f"{n}-fold convolution needs {size} grid points; "
                         "use a coarser step or a smaller domain")
    h = d.step
    acc = d.values
    drift = 0.0
    for _ in range(n - 1):
        acc = _grid_self_convolve(acc, d.values, h)
        mass = h * (acc.sum() - 0.5 * (acc[0] + acc[-1]))
        drift = max(drift, abs(mass - 1.0))
        acc = acc / mass
    result = GridDensity(n * d.origin, h, acc)
    object.__setattr__(result, "renormalisation_drift", drift)
    if domain is not None and result.upper > domain:
        beyond = 1.0 - float(result.cdf(domain))
        if beyond > 1e-6:
            raise ValueError(f"{n}-fold convolution puts mass {beyond:.3g} beyond the domain "
                             f"{domain}; enlarge the domain")
    return result


class _GridPowers:
    """Convolution powers of a grid density tabulated on ``0, h, 2h, ...`` up to ``x_max``.

    Powers are built on demand and kept only for the lifetime of one evaluation.
    """

    def __init__(self, d: GridDensity, x_max: float, step: float | None = None):
        self.h = d.step if step is None else float(step)
        self.length = int(math.ceil(max(x_max, 0.0) / self.h)) + 2
        if self.length > MAX_GRID_POINTS:
            raise ValueError("grid table too large; use a coarser step")
        base = np.asarray(d.pdf(self.h * np.arange(self.length)), dtype=float)
        self._base = base
        self._pdf = [np.zeros(self.length), base]
        self._cdf = [np.ones(self.length), self._cumulative(base)]
        self._stacks = {}

    def _cumulative(self, table):
        cum = np.concatenate([[0.0], np.cumsum(0.5 * self.h * (table[:-1] + table[1:]))])
        return np.clip(cum, 0.0, 1.0)

    def _grow(self, n: int):
        while len(self._pdf) <= n:
            nxt = _grid_self_convolve(self._pdf[-1], self._base, self.h)[: self.length]
            self._pdf.append(nxt)
            self._cdf.append(self._cumulative(nxt))

    def _interp(self, tables, x, n_lo: int, n_hi: int):
        """Rows follow ``x``, columns follow n = n_lo..n_hi."""
        self._grow(n_hi)
        x = np.atleast_1d(np.asarray(x, dtype=float))
        pos = np.clip(x / self.h, 0.0, self.length - 1.0)
        idx = np.minimum(pos.astype(int), self.length - 2)
        frac = pos - idx
        key = (id(tables), n_lo, n_hi)
        stack = self._stacks.get(key)
        if stack is None:
            stack = self._stacks[key] = np.stack(tables[n_lo:n_hi + 1], axis=1)
        return stack[idx] * (1.0 - frac)[:, None] + stack[idx + 1] * frac[:, None]

    def pdf_matrix(self, x, n_max: int):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = self._interp(self._pdf, x, 1, n_max)
        out[x < 0] = 0.0
        return out

    def cdf_matrix(self, x, n_max: int):
        """F^{*n}(x) for n = 0..n_max (n = 0 is the unit step at the origin)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = self._interp(self._cdf, x, 0, n_max)
        out[x < 0] = 0.0
        return out

    def kinks(self, lo: float, hi: float, limit: int = 4000):
        """Grid nodes inside ``(lo, hi)`` as quadrature breakpoints, thinned to ``limit``."""
        first = int(math.floor(lo / self.h)) + 1
        last = int(math.ceil(hi / self.h)) - 1
        if last < first:
            return []
        stride = max(1, (last - first + 1) // limit)
        return list(self.h * np.arange(first, last + 1, stride))


# ---------------------------------------------------------------------------
# Counting process M(s)


def _log_laplace(dist, theta: float) -> float:
    return float(np.log(dist.laplace(theta)))


def count_tail_bound(s: float, jump, n: int) -> float:
    """Chernoff bound on P{M(s) >= n} = P{Y_1 + ... + Y_n <= s}.

    Markov's inequality applied to ``exp(-theta * sum)`` and optimised over
    ``theta > 0``; for gamma-family jumps the optimum is explicit.
    """
    if n <= 0:
        return 1.0
    fam = _gamma_family(jump)
    if fam is not None:
        shape, rate = fam
        a = n * shape
        if a <= rate * s:
            return 1.0
        x = rate * s
        # exp(a - x) (x/a)^a
        return float(math.exp(a - x + a * math.log(x / a))) if x > 0 else 0.0
    if n * jump.mean <= s:
        return 1.0

    def objective(log_theta):
        theta = math.exp(log_theta)
        return theta * s + n * _log_laplace(jump, theta)

    scale = 1.0 / jump.mean
    res = optimize.minimize_scalar(objective, bounds=(math.log(scale * 1e-8), math.log(scale * 1e8)),
                                   method="bounded", options={"xatol": 1e-10})
    return float(min(1.0, math.exp(min(res.fun, 0.0))))


def truncation_terms(s_max: float, jump, eps: float, max_terms: int) -> tuple[int, float]:
    """Smallest power-of-two-grown ``N`` with P{M(s_max) >= N+1} below ``eps``.

    Returns ``(N, bound)``; if ``max_terms`` is reached the bound may exceed ``eps``.
    """
    n = min(max(8, int(math.ceil(2.0 * s_max / jump.mean))), max_terms)
    while True:
        bound = count_tail_bound(s_max, jump, n + 1)
        if bound < eps or n >= max_terms:
            break
        n = min(2 * n, max_terms)
    if _gamma_family(jump) is not None:
        # tighten by bisection; the bound is monotone in n
        lo, hi = 1, n
        while lo < hi:
            mid = (lo + hi) // 2
            if count_tail_bound(s_max, jump, mid + 1) < eps:
                hi = mid
            else:
                lo = mid + 1
        if count_tail_bound(s_max, jump, lo + 1) < eps:
            n = lo
        bound = count_tail_bound(s_max, jump, n + 1)
    return n, bound


def _count_pmf_table(s, jump, n_max: int, grid: _GridPowers | None = None) -> np.ndarray:
    """P{M(s) = n} for n = 0..n_max; rows follow ``s`` (1-D array)."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    n = np.arange(n_max + 1, dtype=float)
    if isinstance(jump, Exponential):
        mean = jump.rate * s[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            logp = n * np.log(mean) - mean - sc.gammaln(n + 1.0)
        logp = np.where((mean == 0) & (n == 0), 0.0, logp)
        return np.exp(logp)
    if isinstance(jump, Gamma):
        k, rate = jump.shape, jump.rate
        x = rate * s[:, None]
        a_hi = (n + 1.0) * k
        a_lo = np.where(n == 0, 1.0, n * k)
        lower_lo = np.where(n == 0, 1.0, sc.gammainc(a_lo, x))
        upper_lo = np.where(n == 0, 0.0, sc.gammaincc(a_lo, x))
        lower_hi = sc.gammainc(a_hi, x)
        upper_hi = sc.gammaincc(a_hi, x)
        # pick the difference with less cancellation
        via_lower = lower_lo - lower_hi
        via_upper = upper_hi - upper_lo
        return np.maximum(np.where(lower_hi < 0.5, via_lower, via_upper), 0.0)
    if isinstance(jump, GridDensity):
        if grid is None:
            grid = _GridPowers(jump, float(s.max()))
        cdfs = grid.cdf_matrix(s, n_max + 1)
        return np.maximum(cdfs[:, :-1] - cdfs[:, 1:], 0.0)
    raise TypeError(f"unsupported jump distribution {jump!r}")


def m_count_pmf(s: float, jump, n: int) -> float:
    """P{M(s) = n}: Poisson for exponential jumps, difference of n- and (n+1)-fold
    c.d.f.s otherwise."""
    if not s > 0:
        raise ValueError("need s > 0")
    if n < 0:
        return 0.0
    if n == 0:
        return float(jump.survival(s))
    return float(_count_pmf_table(s, jump, n)[0, n])


def counting_pmf(s: float, jump, ctl: SeriesControls = SeriesControls()) -> CountingPmf:
    n_max, tail = truncation_terms(s, jump, ctl.tail_epsilon, ctl.max_terms)
    probs = _count_pmf_table(s, jump, n_max)[0]
    exact_tail = max(0.0, 1.0 - float(probs.sum()))
    return CountingPmf(s, probs, min(tail, exact_tail) if exact_tail < 1e-9 else exact_tail)


def count_pmf_by_quadrature(s: float, jump, n: int, rel_tol: float = 1e-11) -> float:
    """P{M(s) = n} from int_0^s f_Y^{*n}(s - z) P{Y > z} dz (independent check)."""
    if n == 0:
        return float(jump.survival(s))
    power = conv_pow_density(jump, n)

    def f(z):
        return power.pdf(s - z) * jump.survival(z)

    points = None
    if isinstance(jump, GridDensity):
        points = list(np.arange(0.0, s, jump.step * max(1, int(s / jump.step) // 200)))[1:]
    return integrate_adaptive(f, 0.0, s, rel_tol=rel_tol, abs_tol=1e-15, points=points).value


# ---------------------------------------------------------------------------
# The series


def density_sup(dist) -> float:
    """Upper bound on the density, which also bounds every convolution power."""
    if isinstance(dist, Exponential):
        return dist.rate
    if isinstance(dist, Gamma):
        if dist.shape < 1:
            return math.inf
        if dist.shape == 1:
            return dist.rate
        mode = (dist.shape - 1.0) / dist.rate
        return float(dist.pdf(mode))
    return float(np.max(dist.values))


class _Series:
    """sum_{n=1}^{N} P{M(s) = n} f_T^{*n}(x) with caches for one evaluation."""

    def __init__(self, model: RenewalModel, ctl: SeriesControls, s_max: float, x_max: float):
        self.jump = model.jump
        self.inter = model.inter_arrival
        self.identity_exact = isinstance(self.jump, Exponential)
        if not self.identity_exact:
            log.warning("Kendall series with non-exponential jumps is not the exact crossing law")
        self.n_terms, self.tail = truncation_terms(s_max, self.jump, ctl.tail_epsilon, ctl.max_terms)
        if self.tail >= ctl.tail_epsilon:
            log.warning("series truncated at max_terms=%d with tail bound %.3g", self.n_terms, self.tail)
        self.partial = self.tail >= ctl.tail_epsilon
        self.tail_bound = self.tail * density_sup(self.inter)
        step = ctl.grid_step
        self._jump_grid = _GridPowers(self.jump, s_max, step) if isinstance(self.jump, GridDensity) else None
        self._time_grid = _GridPowers(self.inter, x_max, step) if isinstance(self.inter, GridDensity) else None
        self._n = np.arange(1, self.n_terms + 1, dtype=float)

    def breakpoints(self, u: float, c: float, v: float, t: float) -> list[float]:
        """Kinks of the grid-based integrand in z on (v, t)."""
        pts = []
        if self._time_grid is not None:
            pts += [v + x for x in self._time_grid.kinks(0.0, t - v)]
        if self._jump_grid is not None:
            pts += [(s - u) / c for s in self._jump_grid.kinks(u + c * v, u + c * t)]
        return sorted(pts)

    def pmf(self, s):
        return _count_pmf_table(s, self.jump, self.n_terms, self._jump_grid)[:, 1:]

    def log_pmf(self, s):
        if isinstance(self.jump, Exponential):
            mean = self.jump.rate * np.atleast_1d(s)[:, None]
            with np.errstate(divide="ignore"):
                return self._n * np.log(mean) - mean - sc.gammaln(self._n + 1.0)
        with np.errstate(divide="ignore"):
            return np.log(self.pmf(s))

    def conv_density(self, x):
        """f_T^{*n}(x) for n = 1..N; rows follow ``x``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))[:, None]
        fam = _gamma_family(self.inter)
        if fam is not None:
            return np.exp(self._log_gamma_power(x, *fam))
        return self._time_grid.pdf_matrix(x[:, 0], self.n_terms)

    def _log_gamma_power(self, x, shape, rate):
        a = self._n * shape
        pos = x > 0
        xs = np.where(pos, x, 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = a * math.log(rate) + (a - 1.0) * np.log(xs) - rate * xs - sc.gammaln(a)
        at_zero = np.where(a == 1.0, math.log(rate), np.where(a < 1.0, np.inf, -np.inf))
        return np.where(pos, out, np.where(x == 0, at_zero, -np.inf))

    def __call__(self, s, x):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        x = np.atleast_1d(np.asarray(x, dtype=float))
        fam = _gamma_family(self.inter)
        if fam is not None:
            logs = self.log_pmf(s) + self._log_gamma_power(x[:, None], *fam)
            return np.exp(logs).sum(axis=1)
        return (self.pmf(s) * self.conv_density(x)).sum(axis=1)


def kendall_first_passage_density(s, level: float, model: RenewalModel,
                                  ctl: SeriesControls = SeriesControls()):
    """Density of sigma, the first time Z(s) = sum_{k<=M(s)} T_k - s/c reaches -level.

    Kendall's identity: p_sigma(s) = (level/s) * p_{Z(s)}(-level), and
    p_{Z(s)}(-level) = sum_n P{M(s)=n} f_T^{*n}(s/c - level).
    """
    c = model.premium_rate
    if not c > 0:
        raise ValueError("Kendall density needs c > 0")
    s = np.atleast_1d(np.asarray(s, dtype=float))
    x = s / c - level
    series = _Series(model, ctl, float(s.max()), float(max(x.max(), 0.0)))
    value = np.where(x > 0, level / s * series(s, np.maximum(x, 0.0)), 0.0)
    return value if value.size > 1 else float(value[0])


def conditional_crossing_density(z, u: float, c: float, v: float, model: RenewalModel,
                                 ctl: SeriesControls = SeriesControls(), _series: _Series | None = None):
    """Density of Theta at ``z`` given ``T1 = v``; zero for ``z <= v``."""
    if not c > 0:
        raise ValueError("exact route needs c > 0")
    z = np.atleast_1d(np.asarray(z, dtype=float))
    series = _series or _Series(model, ctl, u + c * float(z.max()), float(max(z.max() - v, 0.0)))
    level = u + c * z
    lag = z - v
    value = np.where(lag > 0, (u + c * v) / level * series(level, np.maximum(lag, 0.0)), 0.0)
    return value if value.size > 1 else float(value[0])


def _check_horizon(t, v=0.0):
    if not math.isfinite(t):
        raise ValueError("the exact route needs a finite horizon t")
    if t < v:
        raise ValueError(f"need t >= v, got t={t}, v={v}")


def conditional_cdf_exact(u: float, c: float, v: float, t: float, model: RenewalModel,
                          ctl: SeriesControls = SeriesControls(), _series: _Series | None = None
                          ) -> CdfEstimate:
    """P{v < Theta <= t | T1 = v} by quadrature of the Kendall-series density."""
    _check_horizon(t, v)
    if not c > 0:
        raise ValueError("exact route needs c > 0")
    if t == v:
        return CdfEstimate(0.0, "exact_series", 0.0, {"terms": 0})
    series = _series or _Series(model, ctl, u + c * t, t - v)

    def f(z):
        return conditional_crossing_density(z, u, c, v, model, ctl, _series=series)

    res = integrate_adaptive(f, v, t, ctl.rel_tol, ctl.abs_tol, points=series.breakpoints(u, c, v, t))
    error = res.error_estimate + series.tail_bound * (t - v)
    meta = {"terms": series.n_terms, "tail_bound": series.tail, "converged": res.converged,
            "evaluations": res.evaluations, "identity_exact": series.identity_exact,
            "partial": series.partial}
    return CdfEstimate(float(np.clip(res.value, 0.0, 1.0)), "exact_series", error, meta)


def unconditional_cdf_exact(u: float, c: float, t: float, model: RenewalModel,
                            ctl: SeriesControls = SeriesControls()) -> CdfEstimate:
    """P{Theta <= t}: outer quadrature over T1 = v of the jump term plus the
    conditional c.d.f. (inner tolerance one tenth of the outer)."""
    _check_horizon(t)
    if not t > 0:
        raise ValueError("need t > 0")
    if not c > 0:
        raise ValueError("exact route needs c > 0")
    series = _Series(model, ctl, u + c * t, t)
    inner_ctl = SeriesControls(ctl.tail_epsilon, ctl.max_terms, ctl.grid_step,
                               ctl.rel_tol / 10.0, ctl.abs_tol / 10.0)
    t1 = model.first_arrival
    inner_stats = {"errors": 0.0, "unconverged": 0, "calls": 0}

    def outer(v):
        v = np.asarray(v, dtype=float)
        out = np.empty_like(v)
        for i, vi in enumerate(v):
            est = conditional_cdf_exact(u, c, float(vi), t, model, inner_ctl, _series=series)
            inner_stats["calls"] += 1
            inner_stats["errors"] = max(inner_stats["errors"], est.error)
            inner_stats["unconverged"] += 0 if est.meta.get("converged", True) else 1
            out[i] = float(model.jump.survival(u + c * vi)) + est.value
        return out * t1.pdf(v)

    res = integrate_adaptive(outer, 0.0, t, ctl.rel_tol, ctl.abs_tol)
    mass = float(t1.cdf(t))
    error = res.error_estimate + inner_stats["errors"] * mass
    meta = {"terms": series.n_terms, "tail_bound": series.tail, "converged": res.converged,
            "inner_calls": inner_stats["calls"], "inner_unconverged": inner_stats["unconverged"],
            "identity_exact": series.identity_exact, "partial": series.partial}
    return CdfEstimate(float(np.clip(res.value, 0.0, 1.0)), "exact_series", error, meta)


def borovkov_dickson_cdf(u: float, c: float, t: float, beta_y: float, f_t, f_t1,
                         ctl: SeriesControls = SeriesControls()) -> CdfEstimate:
    """P{Theta <= t} for exponential jumps with rate ``beta_y``:

        int_0^t e^{-b(u+cs)} [f_T1(s) + (u+cs)^-1 sum_n (b(u+cs))^n/n!
                               * int_0^s (u+cv) f_T^{*n}(s-v) f_T1(v) dv] ds.
    """
    _check_horizon(t)
    if not (t > 0 and c > 0 and beta_y > 0):
        raise ValueError("need t > 0, c > 0 and a positive jump rate")
    jump = Exponential(beta_y)
    model = RenewalModel(f_t1, f_t, jump, c)
    series = _Series(model, ctl, u + c * t, t)
    n_terms = series.n_terms
    inner_tol = ctl.rel_tol / 10.0
    stats = {"unconverged": 0}

    def poisson_weights(level):
        n = np.arange(1, n_terms + 1, dtype=float)
        mean = beta_y * level
        with np.errstate(divide="ignore"):
            return np.exp(n * math.log(mean) - mean - sc.gammaln(n + 1.0)) if mean > 0 else np.zeros(n_terms)

    def inner(s):
        # I_n(s) = int_0^s (u + c v) f_T^{*n}(s - v) f_T1(v) dv, n = 1..N
        def g(vv):
            return ((u + c * vv) * f_t1.pdf(vv))[:, None] * series.conv_density(s - vv)

        vals, _, ok = integrate_adaptive_vec(g, 0.0, s, inner_tol, ctl.abs_tol / 10.0)
        if not ok:
            stats["unconverged"] += 1
        return vals

    def outer(s):
        s = np.asarray(s, dtype=float)
        out = np.empty_like(s)
        for i, si in enumerate(s):
            level = u + c * si
            weights = poisson_weights(level)
            series_part = float(weights @ inner(si)) / level if level > 0 else 0.0
            out[i] = math.exp(-beta_y * level) * float(f_t1.pdf(si)) + series_part
        return out

    res = integrate_adaptive(outer, 0.0, t, ctl.rel_tol, ctl.abs_tol)
    error = res.error_estimate + series.tail_bound * t
    meta = {"terms": n_terms, "tail_bound": series.tail, "converged": res.converged,
            "inner_unconverged": stats["unconverged"], "partial": series.partial}
    return CdfEstimate(float(np.clip(res.value, 0.0, 1.0)), "exact_series", error, meta)
