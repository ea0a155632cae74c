"""Approximation, both exact routes and simulation side by side for the
unconditional crossing probability of the unit-rate exponential model."""

from __future__ import annotations

import argparse
import time

from levelcross.exact import borovkov_dickson_cdf, unconditional_cdf_exact
from levelcross.ig_approx import approx_unconditional_cdf
from levelcross.model import Exponential, RenewalModel
from levelcross.montecarlo import SimulationPlan, estimate_cdf


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("-u", type=float, default=15.0)
    ap.add_argument("-c", type=float, default=1.0)
    ap.add_argument("--t-grid", default="5,10,25,50,100")
    ap.add_argument("--paths", type=int, default=200_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    e1 = Exponential(1.0)
    model = RenewalModel(e1, e1, e1, args.c)
    ts = [float(x) for x in args.t_grid.split(",")]
    mc = estimate_cdf(model, args.u, ts, SimulationPlan(args.paths, max(ts), args.seed))
    print(f"{'t':>7} {'approx':>9} {'generic':>11} {'specialised':>11} {'route gap':>10} {'mc':>9} {'ci':>8} {'sec':>6}")
    for t, p, ci in zip(ts, mc.estimates, mc.ci_half_widths):
        start = time.perf_counter()
        gen = unconditional_cdf_exact(args.u, args.c, t, model).value
        cor = borovkov_dickson_cdf(args.u, args.c, t, 1.0, e1, e1).value
        apx = approx_unconditional_cdf(model, args.u, t).value
        sec = time.perf_counter() - start
        print(f"{t:7.1f} {apx:9.5f} {gen:11.8f} {cor:11.8f} {abs(gen - cor):10.1e} {p:9.5f} {ci:8.5f} {sec:6.2f}")


if __name__ == "__main__":
    main()
