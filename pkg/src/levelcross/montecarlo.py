"""Direct simulation of the first level-crossing time.

The process ``V(s) - cs`` only moves up at renewal instants, so it suffices to
check ``W_k = Y_1 + ... + Y_k - c s_k > u`` at the renewal epochs ``s_k``.

Every random number is a function of ``(seed, path, step, variable, attempt)``
through the Philox4x32-10 counter-based generator, so results do not depend on
how paths are split into blocks or spread over threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .model import Exponential, Gamma, GridDensity, RenewalModel

# ---------------------------------------------------------------------------
# Philox4x32-10

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)
_SHIFT = np.uint64(32)


def philox4x32(counter, key, rounds: int = 10):
    """Philox4x32 block function.

    ``counter`` is a sequence of four uint32 arrays (broadcastable), ``key`` a pair.
    Returns four uint32 arrays.
    """
    x0, x1, x2, x3 = (np.asarray(c, dtype=np.uint64) & _MASK for c in counter)
    k0, k1 = (np.asarray(k, dtype=np.uint64) & _MASK for k in key)
    for r in range(rounds):
        if r:
            k0 = (k0 + _W0) & _MASK
            k1 = (k1 + _W1) & _MASK
        p0 = _M0 * x0
        p1 = _M1 * x2
        hi0, lo0 = p0 >> _SHIFT, p0 & _MASK
        hi1, lo1 = p1 >> _SHIFT, p1 & _MASK
        x0, x1, x2, x3 = hi1 ^ x1 ^ k0, lo1, hi0 ^ x3 ^ k1, lo0
    return tuple(w.astype(np.uint32) for w in (x0, x1, x2, x3))


_TWO_M53 = 2.0 ** -53


def _to_open_unit(a, b):
    # 53-bit uniform strictly inside (0, 1)
    hi = (a >> np.uint32(5)).astype(np.float64)
    lo = (b >> np.uint32(6)).astype(np.float64)
    return (hi * 67108864.0 + lo + 0.5) * _TWO_M53


class _Stream:
    """Uniform draws for a block of paths keyed by (seed, path index)."""

    def __init__(self, seed: int, paths: np.ndarray):
        seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.key = (np.uint64(seed & 0xFFFFFFFF), np.uint64(seed >> 32))
        paths = np.asarray(paths, dtype=np.uint64)
        self.p_lo = paths & _MASK
        self.p_hi = paths >> _SHIFT

    def uniforms(self, idx, step: int, variable: int, call: int):
        """Four uniforms per selected path; ``idx`` selects a subset of the block."""
        tag = (variable << 24) | call
        w = philox4x32((np.uint64(step), np.uint64(tag), self.p_lo[idx], self.p_hi[idx]), self.key)
        return _to_open_unit(w[0], w[1]), _to_open_unit(w[2], w[3])


# ---------------------------------------------------------------------------
# Samplers driven by the stream


def _grid_inverse(dist: GridDensity, u):
    """Exact inverse of the piecewise-quadratic grid c.d.f."""
    x, cum = dist.inverse_cdf_table()
    f = dist.values / dist._cumulative()[-1]
    h = dist.step
    i = np.clip(np.searchsorted(cum, u, side="right") - 1, 0, len(x) - 2)
    r = u - cum[i]
    a = 0.5 * (f[i + 1] - f[i]) / h
    b = f[i]
    with np.errstate(divide="ignore", invalid="ignore"):
        disc = np.sqrt(np.maximum(b * b + 4.0 * a * r, 0.0))
        s = np.where(np.abs(a) * r > 1e-14 * np.maximum(b * b, 1e-300), 2.0 * r / (b + disc),
                     np.where(b > 0, r / np.where(b > 0, b, 1.0), 0.0))
    return x[i] + np.clip(s, 0.0, h)


def _draw(dist, stream: _Stream, idx, step: int, variable: int) -> np.ndarray:
    if isinstance(dist, Exponential):
        u, _ = stream.uniforms(idx, step, variable, 0)
        return -np.log(u) / dist.rate
    if isinstance(dist, GridDensity):
        u, _ = stream.uniforms(idx, step, variable, 0)
        return _grid_inverse(dist, u)
    if isinstance(dist, Gamma):
        return _marsaglia_tsang(dist, stream, idx, step, variable)
    raise TypeError(f"unsupported distribution {dist!r}")


def _marsaglia_tsang(dist: Gamma, stream: _Stream, idx, step: int, variable: int) -> np.ndarray:
    a = dist.shape
    boost = a < 1.0
    d = (a + 1.0 if boost else a) - 1.0 / 3.0
    cc = 1.0 / math.sqrt(9.0 * d)
    base = np.asarray(idx)
    out = np.empty(base.size)
    pending = np.arange(base.size)
    attempt = 0
    while pending.size:
        sel = base[pending]
        u1, u2 = stream.uniforms(sel, step, variable, 2 * attempt)
        u3, u4 = stream.uniforms(sel, step, variable, 2 * attempt + 1)
        z = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * math.pi * u2)
        v = (1.0 + cc * z) ** 3
        ok = v > 0
        with np.errstate(divide="ignore", invalid="ignore"):
            accept = ok & (np.log(u3) < 0.5 * z * z + d - d * np.where(ok, v, 1.0)
                           + d * np.log(np.where(ok, v, 1.0)))
        vals = d * v
        if boost:
            vals = vals * u4 ** (1.0 / a)
        out[pending[accept]] = vals[accept]
        pending = pending[~accept]
        attempt += 1
        if attempt > 1_000_000:
            raise RuntimeError("gamma sampler failed to terminate")
    return out / dist.rate


_FIRST, _INTER, _JUMP = 1, 2, 3


# ---------------------------------------------------------------------------
# Plans and estimates


@dataclass(frozen=True)
class SimulationPlan:
    n_paths: int
    horizon: float
    seed: int = 0
    conditioning: float | None = None
    workers: int = 1
    block_size: int = 1 << 16

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError("n_paths must be at least 1")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.conditioning is not None and not self.conditioning >= 0:
            raise ValueError("conditioning value must be nonnegative")
        if self.workers < 1 or self.block_size < 1:
            raise ValueError("workers and block_size must be positive")


@dataclass(frozen=True)
class EmpiricalCdf:
    t_grid: np.ndarray
    estimates: np.ndarray
    ci_half_widths: np.ndarray
    censored_fraction: float
    n_paths: int
    crossed_beyond_grid: float = 0.0
    first_jump_fraction: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (len(self.t_grid) == len(self.estimates) == len(self.ci_half_widths)):
            raise ValueError("arrays must have equal length")
        if np.any(np.diff(self.estimates) < 0):
            raise ValueError("estimates must be nondecreasing")


def ci_half_width(p, n: int):
    p = np.asarray(p, dtype=float)
    return np.maximum(1.96 * np.sqrt(p * (1.0 - p) / n), 1.0 / n)


def _simulate_block(model: RenewalModel, u: float, plan: SimulationPlan, start: int, stop: int):
    """Crossing times for paths ``start..stop-1`` (inf when censored) and a flag
    marking crossings at the first renewal."""
    paths = np.arange(start, stop, dtype=np.uint64)
    stream = _Stream(plan.seed, paths)
    n = stop - start
    c = model.premium_rate
    times = np.full(n, np.inf)
    at_first = np.zeros(n, dtype=bool)
    alive = np.arange(n)
    if plan.conditioning is None:
        s = _draw(model.first_arrival, stream, alive, 0, _FIRST)
    else:
        s = np.full(n, float(plan.conditioning))
    w = np.zeros(n)
    step = 0
    while alive.size:
        if step:
            s = s + _draw(model.inter_arrival, stream, alive, step, _INTER)
        inside = s <= plan.horizon
        alive, s, w = alive[inside], s[inside], w[inside]
        if not alive.size:
            break
        w = w + _draw(model.jump, stream, alive, step, _JUMP)
        crossed = w - c * s > u
        times[alive[crossed]] = s[crossed]
        if step == 0:
            at_first[alive[crossed]] = True
        keep = ~crossed
        alive, s, w = alive[keep], s[keep], w[keep]
        step += 1
    return times, at_first


def simulate_crossing_times(model: RenewalModel, u: float, plan: SimulationPlan):
    """All crossing times (``inf`` when censored) and the first-renewal flags."""
    if not u >= 0:
        raise ValueError("need u >= 0")
    bounds = [(a, min(a + plan.block_size, plan.n_paths)) for a in range(0, plan.n_paths, plan.block_size)]
    if plan.workers == 1:
        parts = [_simulate_block(model, u, plan, a, b) for a, b in bounds]
    else:
        with ThreadPoolExecutor(plan.workers) as pool:
            parts = list(pool.map(lambda ab: _simulate_block(model, u, plan, *ab), bounds))
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def sample_crossing_time(model: RenewalModel, u: float, plan_entry: tuple[int, int],
                         horizon: float = math.inf, conditioning: float | None = None) -> float | None:
    """Crossing time of a single path, or ``None`` when censored at ``horizon``."""
    seed, index = plan_entry
    if not u >= 0:
        raise ValueError("need u >= 0")
    plan = SimulationPlan(index + 1, horizon if math.isfinite(horizon) else 1e300, seed, conditioning)
    times, _ = _simulate_block(model, u, plan, index, index + 1)
    return None if math.isinf(times[0]) else float(times[0])


def _check_grid(t_grid, plan: SimulationPlan) -> np.ndarray:
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1:
        raise ValueError("t_grid must be one-dimensional")
    if np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be increasing")
    if t_grid.size and t_grid[-1] > plan.horizon:
        raise ValueError(f"t_grid exceeds the horizon {plan.horizon}")
    return t_grid


def estimate_cdf(model: RenewalModel, u: float, t_grid, plan: SimulationPlan) -> EmpiricalCdf:
    """Empirical P{Theta <= t} on ``t_grid`` with 95% normal-approximation intervals."""
    t_grid = _check_grid(t_grid, plan)
    times, _ = simulate_crossing_times(model, u, plan)
    counts = np.searchsorted(np.sort(times), t_grid, side="right")
    censored = int(np.isinf(times).sum())
    n = plan.n_paths
    p = counts / n
    crossed = n - censored
    beyond = (crossed - (counts[-1] if counts.size else 0)) / n
    return EmpiricalCdf(t_grid, p, ci_half_width(p, n), censored / n, n, beyond)


def estimate_conditional_cdf(model: RenewalModel, u: float, v: float, t_grid,
                             plan: SimulationPlan) -> EmpiricalCdf:
    """Empirical P{v < Theta <= t | T1 = v}; crossings at ``T1`` itself are tallied
    in ``first_jump_fraction``."""
    if not v >= 0:
        raise ValueError("need v >= 0")
    plan = SimulationPlan(plan.n_paths, plan.horizon, plan.seed, float(v), plan.workers, plan.block_size)
    t_grid = _check_grid(t_grid, plan)
    times, at_first = simulate_crossing_times(model, u, plan)
    n = plan.n_paths
    later = np.where(at_first, np.inf, times)
    counts = np.searchsorted(np.sort(later), t_grid, side="right")
    censored = int(np.isinf(times).sum())
    p = counts / n
    first = float(at_first.mean())
    beyond = (n - censored - int(at_first.sum()) - (counts[-1] if counts.size else 0)) / n
    return EmpiricalCdf(t_grid, p, ci_half_width(p, n), censored / n, n, beyond, first)
