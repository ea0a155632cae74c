"""Seeded verification suites: identities, rational-integral closed forms, inverse
Gaussian integrity, and Int_t closed form against quadrature."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import ig_approx, special
from .model import (
    DerivedConstants,
    identity_residual_change_of_variables,
    identity_residual_lambda_recurrence,
    identity_residual_normalization,
    identity_residual_pythagorean,
)
from .quadrature import integrate_adaptive, integrate_semi_infinite

IDENTITY_TOL = 1e-11
LEMMA_TOL = 1e-8
TAIL_TOL = 0.01
IG_MASS_TOL = 1e-9
IG_CDF_TOL = 1e-10
INT_TOL = 1e-8

IG_GRID_MEANS = (0.5, 1.0, 2.0, 5.0)
IG_GRID_SHAPES = (0.5, 1.0, 5.0, 20.0)


@dataclass
class SuiteResult:
    name: str
    tolerance: float
    max_residual: float = 0.0
    worst_inputs: dict = field(default_factory=dict)
    cases: int = 0

    def record(self, residual: float, **inputs) -> None:
        self.cases += 1
        residual = float(residual) if math.isfinite(residual) else math.inf
        if self.cases == 1 or residual > self.max_residual:
            self.max_residual = residual
            self.worst_inputs = inputs

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tolerance


def _log_uniform(rng, lo, hi):
    return math.exp(rng.uniform(math.log(lo), math.log(hi)))


def random_constants(rng) -> DerivedConstants:
    return DerivedConstants.from_moments(_log_uniform(rng, 0.2, 5.0), _log_uniform(rng, 0.05, 10.0),
                                         _log_uniform(rng, 0.2, 5.0), _log_uniform(rng, 0.05, 10.0))


def identity_suite(seed: int = 0, draws: int = 1000,
                   constants_hook: Callable[[DerivedConstants], DerivedConstants] | None = None
                   ) -> list[SuiteResult]:
    """Residuals of the four score identities on random inputs.

    ``constants_hook`` may alter the constants before use (negative control).
    """
    rng = np.random.default_rng(seed)
    names = ("pythagorean", "lambda_recurrence", "normalization", "change_of_variables")
    results = {name: SuiteResult(name, IDENTITY_TOL) for name in names}
    for _ in range(draws):
        k = random_constants(rng)
        if constants_hook is not None:
            k = constants_hook(k)
        n = int(rng.integers(1, 2000))
        a = rng.uniform(0.2, 3.0) * n * k.mean_y
        b = rng.uniform(0.2, 3.0) * n * k.mean_t
        inputs = {"n": n, "a": a, "b": b, "mean_t": k.mean_t, "var_t": k.var_t,
                  "mean_y": k.mean_y, "var_y": k.var_y}
        results["pythagorean"].record(identity_residual_pythagorean(a, b, n, k), **inputs)
        results["lambda_recurrence"].record(identity_residual_lambda_recurrence(a, b, n, k), **inputs)
        results["normalization"].record(max(identity_residual_normalization(a, b, n, k)), **inputs)
        w = _log_uniform(rng, 1.0, 200.0)
        x = _log_uniform(rng, 0.01, 5.0)
        c = rng.uniform(0.05, 3.0) * k.c_star
        results["change_of_variables"].record(
            max(identity_residual_change_of_variables(w, x, c, n, k)), w=w, x=x, c=c, **inputs)
    return list(results.values())


def _rel_err(closed: float, numeric: float) -> float:
    return abs(closed - numeric) / max(abs(numeric), 1e-300)


def _quad(f, lo, hi=math.inf, points=None):
    if math.isinf(hi):
        return integrate_semi_infinite(f, lo, 1e-13, 1e-300, decay_hint="power", points=points).value
    return integrate_adaptive(f, lo, hi, 1e-13, 1e-300, points=points).value


def lemma_suite(seed: int = 0, draws: int = 200) -> list[SuiteResult]:
    """Closed forms of the rational integrals against adaptive quadrature,
    plus the large-R behaviour of the Gaussian-weighted tails."""
    rng = np.random.default_rng(seed)
    r1 = SuiteResult("rational_integral_1", LEMMA_TOL)
    r2 = SuiteResult("rational_integral_2", LEMMA_TOL)
    r3f = SuiteResult("rational_integral_3_full", LEMMA_TOL)
    r3p = SuiteResult("rational_integral_3_partial", LEMMA_TOL)
    r4 = SuiteResult("rational_integral_4", LEMMA_TOL)
    for _ in range(draws):
        l = rng.uniform(-5.0, 5.0)
        r = -l + _log_uniform(rng, 0.1, 10.0)
        m = _log_uniform(rng, 0.1, 5.0)
        p = special.RationalIntegralParams(l, r, m)
        pts = [0.0] if l < 0 else None
        num1 = _quad(lambda y: (y + r) ** -1 * (y * y + m * m) ** -1.5, l, points=pts)
        r1.record(_rel_err(special.rational_sqrt_integral_1(p), num1), L=l, R=r, M=m)
        num2 = _quad(lambda y: np.abs(y) * (y + r) ** -1 * (y * y + m * m) ** -1.5, l, points=pts)
        r2.record(_rel_err(special.rational_sqrt_integral_2(p), num2), L=l, R=r, M=m)

        k = _log_uniform(rng, 0.05, 20.0)
        cap = rng.uniform(0.01, 0.9) * k
        full, partial = special.rational_sqrt_integral_3(k, cap)
        num_full = _quad(lambda y: (k + y) ** -1 * (1.0 + np.sqrt(y)) ** -3, 0.0)
        r3f.record(_rel_err(full, num_full), K=k)
        num_part = _quad(lambda y: (k - y) ** -1 * (1.0 + np.sqrt(y)) ** -3, 0.0, cap)
        r3p.record(_rel_err(partial, num_part), K=k, P=cap)

        neg = -rng.uniform(0.01, 0.9) * k
        num4 = _quad(lambda y: np.abs(y) * (k + y) ** -1 * (1.0 + np.sqrt(np.abs(y))) ** -3, neg, points=[0.0])
        r4.record(_rel_err(special.rational_sqrt_integral_4(k, neg), num4), K=k, P=neg)

    big_r = 1e3
    t1 = SuiteResult("gauss_tail_one", TAIL_TOL)
    scaled = big_r * special.gauss_rational_tail(0.0, big_r, "one")
    t1.record(abs(scaled / math.sqrt(math.pi / 2.0) - 1.0), R=big_r, scaled=scaled)
    t2 = SuiteResult("gauss_tail_abs_y", TAIL_TOL)
    scaled = big_r * special.gauss_rational_tail(0.0, big_r, "abs_y")
    t2.record(abs(scaled - 1.0), R=big_r, scaled=scaled)
    return [r1, r2, r3f, r3p, r4, t1, t2]


def ig_suite() -> list[SuiteResult]:
    """Unit mass of the inverse Gaussian density and c.d.f. consistency on a 4x4 grid."""
    mass = SuiteResult("ig_normalization", IG_MASS_TOL)
    cdf = SuiteResult("ig_cdf_consistency", IG_CDF_TOL)
    for mu in IG_GRID_MEANS:
        for lam in IG_GRID_SHAPES:
            p = special.IGParams(mu, lam)

            def f(x):
                return special.ig_pdf(x, p)

            # mode of the density as a breakpoint
            mode = mu * (math.sqrt(1.0 + (1.5 * mu / lam) ** 2) - 1.5 * mu / lam)
            total = integrate_semi_infinite(f, 0.0, 1e-13, 1e-300, decay_hint="power",
                                            points=[mode, mu]).value
            mass.record(abs(total - 1.0), mu=mu, lam=lam)
            for frac in (0.25, 0.5, 1.0, 2.0, 4.0):
                x = frac * mu
                pts = [q for q in (mode,) if q < x]
                part = integrate_adaptive(f, 0.0, x, 1e-13, 1e-300, points=pts).value
                cdf.record(abs(part - float(special.ig_cdf(x, p))), mu=mu, lam=lam, x=x)
    return [mass, cdf]


def int_suite(seed: int = 0, draws: int = 500) -> list[SuiteResult]:
    """Int_t closed form against quadrature for c in (0.05 c*, 2 c*)."""
    rng = np.random.default_rng(seed)
    res = SuiteResult("int_closed_vs_quadrature", INT_TOL)
    for _ in range(draws):
        m = _log_uniform(rng, 0.2, 5.0)
        d2 = _log_uniform(rng, 0.1, 20.0)
        c = rng.uniform(0.05, 2.0) / m
        u = _log_uniform(rng, 0.5, 200.0)
        v = rng.uniform(0.0, 10.0)
        t = math.inf if rng.random() < 0.2 else v + _log_uniform(rng, 0.1, 500.0)
        p = ig_approx.IntParams(u, c, v, t, m, d2)
        closed = ig_approx.int_tm_closed(p)
        quad = ig_approx.int_tm_quadrature(p, rel_tol=1e-12, abs_tol=1e-15)
        res.record(abs(closed - quad), u=u, c=c, v=v, t=t, M=m, D2=d2)
    return [res]


def run_all(seed: int = 0, constants_hook=None) -> list[SuiteResult]:
    return (identity_suite(seed, constants_hook=constants_hook) + lemma_suite(seed)
            + ig_suite() + int_suite(seed))
