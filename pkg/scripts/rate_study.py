"""Empirical rate of the inverse Gaussian approximation.

For the exponential model with unit rates and c = 1, computes
e(u) = max_t |exact - approx| for P{0 < Theta <= t | T1 = 0} over t = u*x, and
prints e(u), e(u)*u/ln u and the horizon where the maximum sits. With
``--mc`` it also checks the exact value at that horizon by simulation.
"""

from __future__ import annotations

import argparse
import math

import numpy as np

from levelcross.exact import conditional_cdf_exact
from levelcross.ig_approx import approx_conditional_cdf
from levelcross.model import CrossingQuery, Exponential, RenewalModel
from levelcross.montecarlo import SimulationPlan, estimate_conditional_cdf


def gap_profile(u: float, model: RenewalModel, xs: np.ndarray):
    out = []
    for x in xs:
        t = float(u * x)
        ex = conditional_cdf_exact(u, 1.0, 0.0, t, model).value
        ap = approx_conditional_cdf(model, CrossingQuery(u, 1.0, 0.0, t)).value
        out.append((t, ex, ap))
    return out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--levels", default="10,20,40,80")
    ap.add_argument("--points", type=int, default=121)
    ap.add_argument("--mc", type=int, default=0, help="paths for a Monte Carlo check at the worst t")
    args = ap.parse_args()
    e1 = Exponential(1.0)
    model = RenewalModel(e1, e1, e1, 1.0)
    xs = np.geomspace(0.01, 1000.0, args.points)
    print(f"{'u':>6} {'e(u)':>10} {'e*u/ln u':>10} {'t_max':>10} {'exact':>10} {'approx':>10}")
    for u in (float(s) for s in args.levels.split(",")):
        prof = gap_profile(u, model, xs)
        t, ex, apx = max(prof, key=lambda r: abs(r[1] - r[2]))
        e = abs(ex - apx)
        print(f"{u:6.0f} {e:10.5f} {e * u / math.log(u):10.4f} {t:10.1f} {ex:10.5f} {apx:10.5f}")
        if args.mc:
            mc = estimate_conditional_cdf(model, u, 0.0, [t], SimulationPlan(args.mc, t, seed=int(u)))
            print(f"{'':6} monte carlo {mc.estimates[0]:.5f} +- {mc.ci_half_widths[0]:.5f}")


if __name__ == "__main__":
    main()
