"""Tabulate Int_inf and Int_t over premium rates for the M=1, D^2=6, u=15 setting."""

from __future__ import annotations

import argparse

import numpy as np

from levelcross.cli import render, run_figure1


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="figure1.csv")
    ap.add_argument("--c-max", type=float, default=3.0)
    ap.add_argument("--points", type=int, default=301)
    args = ap.parse_args()
    rows = run_figure1(c_grid=np.linspace(0.0, args.c_max, args.points))
    with open(args.out, "w") as fh:
        fh.write(render(("c", "int_inf", "int_t"), rows, "csv"))
    by_c = {round(r[0], 6): r for r in rows}
    print(f"wrote {len(rows)} rows to {args.out}")
    print(f"c=0: int_inf={by_c[0.0][1]:.4f}")
    if 1.0 in by_c:
        print(f"c=1: int_inf={by_c[1.0][1]:.4f} int_t={by_c[1.0][2]:.4f}")


if __name__ == "__main__":
    main()
