from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from levelcross.exact import borovkov_dickson_cdf
from levelcross.ig_approx import jump_exceedance
from levelcross.model import Exponential, Gamma, GridDensity, RenewalModel
from levelcross.montecarlo import (
    EmpiricalCdf,
    SimulationPlan,
    _draw,
    _Stream,
    ci_half_width,
    estimate_cdf,
    estimate_conditional_cdf,
    philox4x32,
    sample_crossing_time,
    simulate_crossing_times,
)

E1 = Exponential(1.0)


def _hex(words):
    return [f"{int(w):08x}" for w in words]


@pytest.mark.parametrize("counter,key,expected", [
    ((0, 0, 0, 0), (0, 0), ["6627e8d5", "e169c58d", "bc57ac4c", "9b00dbd8"]),
    ((0xFFFFFFFF,) * 4, (0xFFFFFFFF,) * 2, ["408f276d", "41c83b0e", "a20bc7c6", "6d5451fd"]),
    ((0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344), (0xA4093822, 0x299F31D0),
     ["d16cfe09", "94fdcceb", "5001e420", "24126ea1"]),
])
def test_philox_known_answers(counter, key, expected):
    assert _hex(philox4x32(counter, key)) == expected


def test_uniforms_open_interval_and_moments():
    stream = _Stream(3, np.arange(200_000, dtype=np.uint64))
    u, w = stream.uniforms(np.arange(200_000), 0, 1, 0)
    assert 0.0 < min(u.min(), w.min()) and max(u.max(), w.max()) < 1.0
    assert abs(u.mean() - 0.5) < 5 * math.sqrt(1 / 12 / u.size)
    assert abs(np.corrcoef(u, w)[0, 1]) < 5 / math.sqrt(u.size)


@pytest.mark.parametrize("dist", [Gamma(2.5, 1.5), Gamma(0.6, 2.0), GridDensity.from_distribution(Gamma(2.0, 1.0))])
def test_samplers_match_their_law(dist):
    n = 100_000
    stream = _Stream(5, np.arange(n, dtype=np.uint64))
    x = _draw(dist, stream, np.arange(n), 0, 3)
    assert stats.kstest(x, dist.cdf).pvalue > 1e-3
    assert abs(x.mean() - dist.mean) < 5 * math.sqrt(dist.variance / n)


def test_zero_level_crosses_at_first_renewal(exp_model):
    crossed_first = 0
    for i in range(40):
        stream = _Stream(7, np.array([i], dtype=np.uint64))
        t1 = _draw(E1, stream, np.array([0]), 0, 1)[0]
        y1 = _draw(E1, stream, np.array([0]), 0, 3)[0]
        theta = sample_crossing_time(exp_model, 0.0, (7, i), horizon=100.0)
        if y1 > t1:
            crossed_first += 1
            assert theta == t1
        else:
            assert theta is None or theta > t1
    assert 0 < crossed_first < 40


def test_large_premium_censors(exp_model):
    model = RenewalModel(E1, E1, E1, 1e3)
    mc = estimate_cdf(model, 10.0, [100.0], SimulationPlan(10_000, 100.0, seed=1))
    assert mc.censored_fraction >= 0.99


def test_single_path_is_step_function(exp_model):
    mc = estimate_cdf(exp_model, 2.0, np.linspace(0.5, 50, 100), SimulationPlan(1, 50.0, seed=4))
    assert set(np.unique(mc.estimates)) <= {0.0, 1.0}
    assert np.all(mc.ci_half_widths == 1.0)


@pytest.mark.parametrize("workers,block", [(1, 97), (2, 1000), (4, 333)])
def test_output_independent_of_partitioning(gamma_time_model, workers, block):
    base = simulate_crossing_times(gamma_time_model, 3.0, SimulationPlan(5000, 40.0, seed=9))
    other = simulate_crossing_times(gamma_time_model, 3.0,
                                    SimulationPlan(5000, 40.0, seed=9, workers=workers, block_size=block))
    np.testing.assert_array_equal(base[0], other[0])
    np.testing.assert_array_equal(base[1], other[1])


def test_single_path_sampler_matches_batch(gamma_time_model):
    times, _ = simulate_crossing_times(gamma_time_model, 3.0, SimulationPlan(50, 40.0, seed=2))
    for i in (0, 17, 49):
        single = sample_crossing_time(gamma_time_model, 3.0, (2, i), horizon=40.0)
        assert (single is None and math.isinf(times[i])) or single == times[i]


def test_censoring_bookkeeping(exp_model):
    grid = np.array([5.0, 10.0, 30.0])
    mc = estimate_cdf(exp_model, 5.0, grid, SimulationPlan(20_000, 30.0, seed=3))
    assert mc.estimates[-1] + mc.crossed_beyond_grid + mc.censored_fraction == pytest.approx(1.0, abs=1e-12)
    cond = estimate_conditional_cdf(exp_model, 5.0, 1.0, grid, SimulationPlan(20_000, 30.0, seed=3))
    total = cond.estimates[-1] + cond.crossed_beyond_grid + cond.censored_fraction + cond.first_jump_fraction
    assert total == pytest.approx(1.0, abs=1e-12)


def test_conditional_at_v_is_zero(exp_model):
    cond = estimate_conditional_cdf(exp_model, 2.0, 3.0, [3.0, 10.0], SimulationPlan(5000, 10.0, seed=2))
    assert cond.estimates[0] == 0.0 and cond.estimates[1] > 0.0


def test_first_jump_fraction(exp_model):
    plan = SimulationPlan(100_000, 20.0, seed=6)
    for u, v in [(0.5, 0.2), (2.0, 0.0)]:
        cond = estimate_conditional_cdf(exp_model, u, v, [20.0], plan)
        p = jump_exceedance(u, 1.0, v, E1)
        assert abs(cond.first_jump_fraction - p) <= 4 * math.sqrt(p * (1 - p) / plan.n_paths)


def test_grid_jump_first_exceedance():
    grid = GridDensity.from_distribution(Gamma(3.0, 2.0))
    model = RenewalModel(E1, E1, grid, 1.0)
    plan = SimulationPlan(100_000, 5.0, seed=8)
    cond = estimate_conditional_cdf(model, 1.0, 0.5, [5.0], plan)
    p = jump_exceedance(1.0, 1.0, 0.5, grid)
    assert abs(cond.first_jump_fraction - p) <= 4 * math.sqrt(p * (1 - p) / plan.n_paths)


def test_interval_coverage_over_seeds(exp_model):
    # small u, short horizon: cheap paths, exact value from the specialised route
    target = borovkov_dickson_cdf(1.0, 1.0, 2.0, 1.0, E1, E1).value
    hits = 0
    for seed in range(100):
        mc = estimate_cdf(exp_model, 1.0, [2.0], SimulationPlan(2000, 2.0, seed=1000 + seed))
        hits += abs(mc.estimates[0] - target) <= mc.ci_half_widths[0]
    assert 90 <= hits <= 99


def test_plan_and_grid_validation(exp_model):
    with pytest.raises(ValueError, match="horizon"):
        estimate_cdf(exp_model, 1.0, [5.0, 20.0], SimulationPlan(10, 10.0))
    with pytest.raises(ValueError):
        estimate_cdf(exp_model, 1.0, [5.0, 2.0], SimulationPlan(10, 10.0))
    with pytest.raises(ValueError):
        SimulationPlan(0, 1.0)
    with pytest.raises(ValueError):
        SimulationPlan(10, 1.0, seed=-1)
    with pytest.raises(ValueError):
        EmpiricalCdf(np.array([1.0, 2.0]), np.array([0.5, 0.4]), np.array([0.1, 0.1]), 0.0, 10)


@given(st.floats(0.0, 1.0), st.integers(1, 10 ** 7))
def test_ci_half_width(p, n):
    h = ci_half_width(p, n)
    assert h >= 1.0 / n
    assert h == pytest.approx(max(1.96 * math.sqrt(p * (1 - p) / n), 1.0 / n))
