from __future__ import annotations

import logging
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from levelcross import exact
from levelcross.exact import (
    CountingPmf,
    SeriesControls,
    borovkov_dickson_cdf,
    conditional_cdf_exact,
    conditional_crossing_density,
    conv_pow_density,
    count_pmf_by_quadrature,
    count_tail_bound,
    counting_pmf,
    kendall_first_passage_density,
    m_count_pmf,
    truncation_terms,
    unconditional_cdf_exact,
)
from levelcross.model import Exponential, Gamma, GridDensity, RenewalModel
from levelcross.montecarlo import SimulationPlan, estimate_cdf, estimate_conditional_cdf

E1 = Exponential(1.0)


# -- counting process -------------------------------------------------------

def test_poisson_pmf_examples():
    assert m_count_pmf(2.0, E1, 0) == pytest.approx(math.exp(-2), rel=1e-15)
    assert m_count_pmf(1.0, Exponential(2.0), 3) == pytest.approx(math.exp(-2) * 8 / 6, rel=1e-14)
    assert m_count_pmf(1e4, E1, 10_000) == pytest.approx(stats.poisson.pmf(10_000, 1e4), rel=1e-10)


@pytest.mark.parametrize("jump", [Gamma(2.0, 1.0), GridDensity.from_distribution(Gamma(2.0, 1.0))])
def test_pmf_sums_to_one(jump):
    pmf = counting_pmf(3.0, jump)
    assert pmf.probabilities.sum() + pmf.tail == pytest.approx(1.0, abs=1e-9)
    assert np.all(pmf.probabilities >= 0)


@pytest.mark.parametrize("jump", [Gamma(2.0, 1.0), Gamma(1.5, 3.0), GridDensity.from_distribution(Gamma(2.0, 1.0))])
@pytest.mark.parametrize("n", [0, 1, 2, 5])
def test_pmf_matches_quadrature_oracle(jump, n):
    # grid powers are exact only at nodes, so the two grid routes differ at discretisation order
    tol = 1e-6 if isinstance(jump, GridDensity) else 1e-9
    assert m_count_pmf(3.0, jump, n) == pytest.approx(count_pmf_by_quadrature(3.0, jump, n), abs=tol)


def test_gamma_with_unit_shape_is_poisson():
    for n in range(8):
        assert m_count_pmf(2.5, Gamma(1.0, 1.3), n) == pytest.approx(m_count_pmf(2.5, Exponential(1.3), n), rel=1e-10)


def test_counting_pmf_validates():
    with pytest.raises(ValueError):
        CountingPmf(1.0, np.array([0.5, 0.2]), 0.0)
    with pytest.raises(ValueError):
        m_count_pmf(0.0, E1, 1)


@given(st.floats(0.1, 200.0), st.integers(1, 400))
def test_chernoff_bound_dominates_poisson_tail(s, n):
    assert stats.poisson.sf(n - 1, s) <= count_tail_bound(s, E1, n) * (1 + 1e-9) + 1e-300


def test_truncation_meets_target():
    n, bound = truncation_terms(100.0, E1, 1e-12, 100_000)
    assert bound < 1e-12
    assert stats.poisson.sf(n, 100.0) < 1e-12
    capped, loose = truncation_terms(100.0, E1, 1e-12, 50)
    assert capped == 50 and loose > 1e-12


# -- convolution powers -----------------------------------------------------

def test_conv_pow_closed_forms():
    assert float(conv_pow_density(E1, 2).pdf(1.0)) == pytest.approx(math.exp(-1), rel=1e-15)
    g = Gamma(1.5, 2.0)
    assert conv_pow_density(g, 1) is g
    assert conv_pow_density(g, 4) == Gamma(6.0, 2.0)
    with pytest.raises(ValueError):
        conv_pow_density(g, 0)


def test_grid_conv_pow_against_gamma():
    grid = GridDensity.from_distribution(E1)
    power = conv_pow_density(grid, 3)
    x = np.linspace(0, 20, 2001)
    assert np.max(np.abs(power.pdf(x) - Gamma(3.0, 1.0).pdf(x))) <= 1e-3
    assert power.renormalisation_drift <= 1e-6
    assert power.mass == pytest.approx(1.0, abs=1e-12)


def test_grid_conv_pow_overflow():
    grid = GridDensity.from_distribution(E1)
    with pytest.raises(ValueError, match="domain"):
        conv_pow_density(grid, 10, domain=5.0)


# -- densities --------------------------------------------------------------

@given(st.floats(0.5, 40.0), st.floats(0.3, 2.0), st.floats(0.0, 5.0), st.floats(0.01, 40.0))
def test_kendall_relation(u, c, v, lag):
    model = RenewalModel(E1, Gamma(2.0, 2.0), E1, c)
    t = v + lag
    lhs = c * kendall_first_passage_density(u + c * t, v + u / c, model)
    rhs = conditional_crossing_density(t, u, c, v, model)
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-300)


def test_density_vanishes_before_v(exp_model):
    assert conditional_crossing_density(1.0, 5.0, 1.0, 1.0, exp_model) == 0.0
    assert conditional_crossing_density(0.5, 5.0, 1.0, 1.0, exp_model) == 0.0
    assert kendall_first_passage_density(3.0, 5.0, exp_model) == 0.0


def test_density_is_derivative_of_cdf(exp_model):
    h = 1e-3
    for z in (1.01, 3.0, 20.0):
        fd = (conditional_cdf_exact(5.0, 1.0, 1.0, z + h, exp_model).value
              - conditional_cdf_exact(5.0, 1.0, 1.0, z - h, exp_model).value) / (2 * h)
        assert conditional_crossing_density(z, 5.0, 1.0, 1.0, exp_model) == pytest.approx(fd, abs=1e-5)


def test_cdf_matches_fixed_step_riemann_sum(exp_model):
    z = np.linspace(0.0, 40.0, 16001)
    f = conditional_crossing_density(z, 10.0, 1.0, 0.0, exp_model)
    trap = (z[1] - z[0]) * (f.sum() - 0.5 * (f[0] + f[-1]))
    assert conditional_cdf_exact(10.0, 1.0, 0.0, 40.0, exp_model).value == pytest.approx(trap, abs=1e-6)


def test_kendall_density_integrates_to_cdf(exp_model):
    from levelcross.quadrature import integrate_adaptive
    u, c, v, t = 8.0, 1.0, 2.0, 30.0
    res = integrate_adaptive(lambda s: kendall_first_passage_density(s, v + u / c, exp_model),
                             u + c * v, u + c * t, rel_tol=1e-11, abs_tol=1e-14)
    assert res.value == pytest.approx(conditional_cdf_exact(u, c, v, t, exp_model).value, abs=1e-6)


# -- distribution functions -------------------------------------------------

def test_cdf_edges(exp_model):
    assert conditional_cdf_exact(5.0, 1.0, 2.0, 2.0, exp_model).value == 0.0
    assert conditional_cdf_exact(5.0, 1.0, 2.0, 2.0 + 1e-9, exp_model).value < 1e-9
    assert unconditional_cdf_exact(5.0, 1.0, 1e-8, exp_model).value < 1e-7
    assert unconditional_cdf_exact(200.0, 1.0, 50.0, exp_model).value <= 1e-6
    with pytest.raises(ValueError, match="finite"):
        conditional_cdf_exact(5.0, 1.0, 0.0, math.inf, exp_model)


def test_unconditional_monotone_and_bounded(exp_model):
    vals = [unconditional_cdf_exact(5.0, 1.0, t, exp_model).value for t in (1.0, 5.0, 20.0, 60.0)]
    assert all(0.0 <= a <= b <= 1.0 for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("u,c,t", [(10.0, 1.0, 30.0), (3.0, 0.7, 12.0)])
def test_generic_route_equals_specialised_route(exp_model, u, c, t):
    model = RenewalModel(E1, E1, E1, c)
    generic = unconditional_cdf_exact(u, c, t, model).value
    special = borovkov_dickson_cdf(u, c, t, 1.0, E1, E1).value
    assert generic == pytest.approx(special, abs=1e-6)


def test_gamma_time_model_routes_agree(gamma_time_model):
    generic = unconditional_cdf_exact(6.0, 1.0, 15.0, gamma_time_model).value
    special = borovkov_dickson_cdf(6.0, 1.0, 15.0, 1.0, Gamma(2.0, 2.0), E1).value
    assert generic == pytest.approx(special, abs=1e-6)


def test_conditional_against_ig_consistency(exp_model):
    from levelcross.ig_approx import IntParams, int_tm
    ex = conditional_cdf_exact(15.0, 1.0, 0.0, 100.0, exp_model).value
    assert abs(ex - int_tm(IntParams(15.0, 1.0, 0.0, 100.0, 1.0, 2.0))) <= max(0.02, 2 * math.log(15) / 15)


def test_borovkov_against_ig_unconditional(exp_model):
    from levelcross.ig_approx import approx_unconditional_cdf
    special = borovkov_dickson_cdf(15.0, 1.0, 100.0, 1.0, E1, E1).value
    approx = approx_unconditional_cdf(exp_model, 15.0, 100.0).value
    assert abs(special - approx) <= max(0.02, 2 * math.log(15) / 15)


# -- Monte Carlo oracles ----------------------------------------------------

def _within(mc, ci, value, k=3.0):
    return abs(mc - value) <= k * max(ci / 1.96, 1e-12)


def test_conditional_against_monte_carlo(exp_model):
    grid = np.array([5.0, 20.0, 60.0])
    mc = estimate_conditional_cdf(exp_model, 5.0, 1.0, grid, SimulationPlan(100_000, 60.0, seed=11))
    for t, p, ci in zip(grid, mc.estimates, mc.ci_half_widths):
        assert _within(p, ci, conditional_cdf_exact(5.0, 1.0, 1.0, t, exp_model).value)


def test_density_window_against_monte_carlo(exp_model):
    lo, hi = 2.9, 3.1
    mc = estimate_conditional_cdf(exp_model, 5.0, 1.0, [lo, hi], SimulationPlan(100_000, hi, seed=12))
    p = mc.estimates[1] - mc.estimates[0]
    sigma = math.sqrt(p * (1 - p) / mc.n_paths)
    exact_mass = (conditional_cdf_exact(5.0, 1.0, 1.0, hi, exp_model).value
                  - conditional_cdf_exact(5.0, 1.0, 1.0, lo, exp_model).value)
    assert abs(p - exact_mass) <= 3 * sigma


def test_small_horizon_against_monte_carlo(exp_model):
    value = borovkov_dickson_cdf(0.0, 1.0, 0.1, 1.0, E1, E1).value
    # dominated by a crossing at the first renewal: int_0^t e^{-c v} e^{-v} dv
    first = (1 - math.exp(-0.2)) / 2
    assert value == pytest.approx(first, rel=0.05)
    mc = estimate_cdf(exp_model, 0.0, [0.1], SimulationPlan(1_000_000, 0.1, seed=13))
    assert _within(mc.estimates[0], mc.ci_half_widths[0], value)


# -- flags ------------------------------------------------------------------

def test_non_exponential_jumps_are_flagged(caplog):
    model = RenewalModel(E1, E1, Gamma(2.0, 2.0), 1.0)
    with caplog.at_level(logging.WARNING, logger=exact.__name__):
        est = conditional_cdf_exact(3.0, 1.0, 0.0, 5.0, model)
    assert est.meta["identity_exact"] is False
    assert "not the exact crossing law" in caplog.text


def test_truncated_series_is_partial(exp_model):
    est = conditional_cdf_exact(15.0, 1.0, 0.0, 30.0, exp_model, SeriesControls(max_terms=10))
    assert est.meta["partial"] and est.meta["tail_bound"] > 1e-12
    full = conditional_cdf_exact(15.0, 1.0, 0.0, 30.0, exp_model)
    assert not full.meta["partial"]
    with pytest.raises(ValueError):
        SeriesControls(tail_epsilon=0.0)


def test_grid_model_close_to_exponential(exp_model):
    grid_model = RenewalModel(E1, GridDensity.from_distribution(E1), E1, 1.0)
    a = conditional_cdf_exact(5.0, 1.0, 0.0, 10.0, grid_model).value
    b = conditional_cdf_exact(5.0, 1.0, 0.0, 10.0, exp_model).value
    assert a == pytest.approx(b, abs=1e-5)
