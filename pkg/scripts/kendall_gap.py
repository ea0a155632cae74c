"""How far the Kendall series is from the true crossing law when jumps are not
exponential.

The series representation needs the jump counting process to have independent
increments, which holds only for exponential jumps. This script prints
z-scores of (simulation - series) for the conditional c.d.f. under a few jump
laws; exponential jumps give z of order one, gamma jumps do not.
"""

from __future__ import annotations

import argparse
import logging
import math

from levelcross.exact import conditional_cdf_exact
from levelcross.model import Exponential, Gamma, RenewalModel
from levelcross.montecarlo import SimulationPlan, estimate_conditional_cdf

CASES = {
    "T exp, Y exp": (Exponential(1.0), Exponential(1.0)),
    "T gamma(2,2), Y exp": (Gamma(2.0, 2.0), Exponential(1.0)),
    "T exp, Y gamma(3,3)": (Exponential(1.0), Gamma(3.0, 3.0)),
    "T gamma(2,2), Y gamma(2,2)": (Gamma(2.0, 2.0), Gamma(2.0, 2.0)),
}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("-u", type=float, default=5.0)
    ap.add_argument("--t-grid", default="5,10,20,40")
    ap.add_argument("--paths", type=int, default=200_000)
    ap.add_argument("--seed", type=int, default=3)
    args = ap.parse_args()
    logging.getLogger("levelcross.exact").setLevel(logging.ERROR)
    ts = [float(x) for x in args.t_grid.split(",")]
    for name, (inter, jump) in CASES.items():
        model = RenewalModel(Exponential(1.0), inter, jump, 1.0)
        mc = estimate_conditional_cdf(model, args.u, 0.0, ts, SimulationPlan(args.paths, max(ts), args.seed))
        zs = []
        for t, p in zip(ts, mc.estimates):
            series = conditional_cdf_exact(args.u, 1.0, 0.0, t, model).value
            sigma = max(math.sqrt(p * (1 - p) / args.paths), 1.0 / args.paths)
            zs.append((p - series) / sigma)
        print(f"{name:28s} " + " ".join(f"z(t={t:g})={z:+7.1f}" for t, z in zip(ts, zs)))


if __name__ == "__main__":
    main()
