"""Command-line interface: ``levelcross {approx,exact,simulate,compare,figure1,selfcheck}``.

Exit codes: 0 success, 1 failed check, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import sys
from typing import Sequence

import numpy as np

from . import checks, exact, ig_approx, montecarlo
from .config import ConfigError, load_model, parse_float, parse_inline
from .model import CrossingQuery, ModelError, RenewalModel

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# Output


def _fmt_csv(x) -> str:
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{x:.12g}"
    return str(x)


def _json_value(x):
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
        return x
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, dict):
        return {k: _json_value(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_value(v) for v in x]
    return x


def render(columns: Sequence[str], rows: Sequence[Sequence], fmt: str, meta: dict | None = None) -> str:
    if fmt == "json":
        payload = {"columns": list(columns),
                   "rows": [dict(zip(columns, (_json_value(v) for v in row))) for row in rows]}
        if meta:
            payload["meta"] = _json_value(meta)
        return json.dumps(payload, indent=2) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt_csv(v) for v in row])
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# Argument helpers


def _float_list(text: str) -> list[float]:
    return [parse_float(x) for x in text.split(",") if x.strip()]


def _model_from_args(args) -> RenewalModel:
    if args.model:
        return load_model(args.model)
    inline = (args.t1, args.inter, args.jump, args.c)
    if any(x is None for x in inline):
        raise UsageError("give --model FILE, or all of --t1, --inter, --jump and --c")
    try:
        return RenewalModel(parse_inline(args.t1), parse_inline(args.inter), parse_inline(args.jump), args.c)
    except ModelError as exc:
        raise UsageError(str(exc)) from None


def _add_model_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model")
    g.add_argument("--model", help="INI model file")
    g.add_argument("--t1", help="first inter-arrival law, e.g. exponential:1")
    g.add_argument("--inter", help="inter-arrival law, e.g. gamma:2,2")
    g.add_argument("--jump", help="jump law, e.g. exponential:1")
    g.add_argument("--c", type=parse_float, help="premium rate")
    p.add_argument("-u", type=parse_float, required=True, help="initial level u >= 0")
    p.add_argument("-t", dest="horizons", type=_float_list, required=True,
                   help="comma-separated horizons t ('inf' allowed where meaningful)")
    p.add_argument("-v", type=parse_float, default=None, help="condition on T1 = v")


def _add_output_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", help="write to this path instead of standard output")


def _add_mc_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--paths", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--block-size", type=int, default=1 << 16, help="paths per work unit")
    p.add_argument("--horizon", type=parse_float, default=None,
                   help="censoring horizon (default 10x the largest t)")


def _check_finite(ts, what):
    if any(math.isinf(t) for t in ts):
        raise UsageError(f"{what} needs finite horizons")


# ---------------------------------------------------------------------------
# Subcommands


def cmd_approx(args) -> int:
    model = _model_from_args(args)
    rows = []
    for t in args.horizons:
        if args.v is None:
            _check_finite([t], "the unconditional approximation")
            est = ig_approx.approx_unconditional_cdf(model, args.u, t)
        else:
            est = ig_approx.approx_conditional_cdf(model, CrossingQuery(args.u, model.c, args.v, t))
        rows.append((t, est.value, est.error))
    _emit(render(("t", "value", "error"), rows, args.format, {"method": "ig_approx"}), args.out)
    return EXIT_OK


def _exact_value(model, u, t, v, ctl, route):
    if v is not None:
        return exact.conditional_cdf_exact(u, model.c, v, t, model, ctl)
    if route == "specialised":
        if model.jump.kind != "exponential":
            raise UsageError("the specialised route needs exponential jumps")
        return exact.borovkov_dickson_cdf(u, model.c, t, model.jump.rate, model.inter_arrival,
                                          model.first_arrival, ctl)
    return exact.unconditional_cdf_exact(u, model.c, t, model, ctl)


def cmd_exact(args) -> int:
    model = _model_from_args(args)
    _check_finite(args.horizons, "the exact route")
    ctl = exact.SeriesControls(tail_epsilon=args.tail_eps)
    rows = []
    for t in args.horizons:
        est = _exact_value(model, args.u, t, args.v, ctl, args.route)
        rows.append((t, est.value, est.error))
    _emit(render(("t", "value", "error"), rows, args.format, {"method": "exact_series"}), args.out)
    return EXIT_OK


def _plan(args, ts) -> montecarlo.SimulationPlan:
    horizon = args.horizon if args.horizon is not None else 10.0 * max(ts, default=1.0)
    return montecarlo.SimulationPlan(args.paths, horizon, args.seed, None, args.workers, args.block_size)


def _simulate(model, u, v, ts, plan):
    if v is None:
        return montecarlo.estimate_cdf(model, u, ts, plan)
    return montecarlo.estimate_conditional_cdf(model, u, v, ts, plan)


def cmd_simulate(args) -> int:
    model = _model_from_args(args)
    ts = sorted(args.horizons)
    _check_finite(ts, "simulation")
    est = _simulate(model, args.u, args.v, ts, _plan(args, ts))
    rows = list(zip(est.t_grid, est.estimates, est.ci_half_widths))
    meta = {"n_paths": est.n_paths, "censored_fraction": est.censored_fraction,
            "crossed_beyond_grid": est.crossed_beyond_grid}
    if est.first_jump_fraction is not None:
        meta["first_jump_fraction"] = est.first_jump_fraction
    _emit(render(("t", "estimate", "ci_half_width"), rows, args.format, meta), args.out)
    return EXIT_OK


def _guarded(label, t, fn):
    try:
        return fn()
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"{label} failed at t={t}: {exc}", file=sys.stderr)
        return None


def run_compare(model: RenewalModel, u: float, t_grid, plan: montecarlo.SimulationPlan,
                v: float | None = None, ctl: exact.SeriesControls = exact.SeriesControls()):
    """Rows ``(t, approx, exact, mc, mc_ci, |approx - exact|)``; failures become NaN."""
    t_grid = sorted(t_grid)
    if not t_grid:
        return []
    mc = _guarded("simulation", t_grid[-1], lambda: _simulate(model, u, v, t_grid, plan))
    rows = []
    for j, t in enumerate(t_grid):
        if v is None:
            approx = _guarded("approximation", t, lambda: ig_approx.approx_unconditional_cdf(model, u, t))
        else:
            approx = _guarded("approximation", t, lambda: ig_approx.approx_conditional_cdf(
                model, CrossingQuery(u, model.c, v, t)))
        ex = _guarded("exact series", t, lambda: _exact_value(model, u, t, v, ctl, "generic"))
        a = approx.value if approx else math.nan
        e = ex.value if ex else math.nan
        m = float(mc.estimates[j]) if mc else math.nan
        ci = float(mc.ci_half_widths[j]) if mc else math.nan
        rows.append((t, a, e, m, ci, abs(a - e)))
    return rows


def cmd_compare(args) -> int:
    model = _model_from_args(args)
    ts = sorted(args.horizons)
    _check_finite(ts, "compare")
    rows = run_compare(model, args.u, ts, _plan(args, ts), args.v)
    _emit(render(("t", "approx", "exact", "mc", "mc_ci", "abs_diff"), rows, args.format), args.out)
    return EXIT_OK


def run_figure1(m_ratio: float = 1.0, d_squared: float = 6.0, u: float = 15.0, t: float = 100.0,
                c_grid=None):
    """Rows ``(c, Int_inf, Int_t)`` at ``v = 0``."""
    if c_grid is None:
        c_grid = np.round(np.arange(0, 301) * 0.01, 10)
    c_grid = np.asarray(c_grid, dtype=float)
    if c_grid.ndim != 1 or c_grid.size == 0 or np.any(c_grid < 0) or np.any(np.diff(c_grid) <= 0):
        raise UsageError("c grid must be a nonempty increasing sequence of nonnegative numbers")
    rows = []
    for c in c_grid:
        inf_val = ig_approx.int_tm(ig_approx.IntParams(u, c, 0.0, math.inf, m_ratio, d_squared))
        t_val = ig_approx.int_tm(ig_approx.IntParams(u, c, 0.0, t, m_ratio, d_squared))
        rows.append((float(c), inf_val, t_val))
    return rows


def cmd_figure1(args) -> int:
    if not args.c_step > 0 or args.c_max < args.c_min:
        raise UsageError("need --c-step > 0 and --c-max >= --c-min")
    count = int(math.floor((args.c_max - args.c_min) / args.c_step + 1e-9)) + 1
    grid = args.c_min + args.c_step * np.arange(count)
    rows = run_figure1(args.m, args.d2, args.u, args.t, np.round(grid, 12))
    _emit(render(("c", "int_inf", "int_t"), rows, args.format), args.out)
    return EXIT_OK


def run_selfcheck(seed: int = 0, corrupt_b1: float | None = None) -> tuple[str, int]:
    hook = None
    if corrupt_b1 is not None:
        def hook(k):
            return dataclasses.replace(k, b1=k.b1 * corrupt_b1)
    results = checks.run_all(seed, constants_hook=hook)
    lines = [f"selfcheck seed={seed}"]
    failed = []
    for r in results:
        status = "ok" if r.passed else "FAIL"
        lines.append(f"{r.name:32s} max_residual={r.max_residual:.3e} tol={r.tolerance:.0e} "
                     f"cases={r.cases} {status}")
        if not r.passed:
            failed.append(r)
    for r in failed:
        inputs = ", ".join(f"{k}={v!r}" for k, v in r.worst_inputs.items())
        lines.append(f"failing case for {r.name}: {inputs}")
    lines.append("all suites passed" if not failed else f"{len(failed)} suite(s) failed")
    return "\n".join(lines) + "\n", EXIT_OK if not failed else EXIT_CHECK_FAILED


def cmd_selfcheck(args) -> int:
    report, code = run_selfcheck(args.seed, args.corrupt_b1)
    _emit(report, args.out)
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="levelcross",
                                     description="Distribution of the first level-crossing time.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("approx", help="inverse Gaussian approximation")
    _add_model_args(p)
    _add_output_args(p)
    p.set_defaults(func=cmd_approx)

    p = sub.add_parser("exact", help="exact Kendall-series route")
    _add_model_args(p)
    _add_output_args(p)
    p.add_argument("--tail-eps", type=float, default=1e-12)
    p.add_argument("--route", choices=("generic", "specialised"), default="generic")
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("simulate", help="Monte Carlo estimate")
    _add_model_args(p)
    _add_output_args(p)
    _add_mc_args(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="all three routes side by side")
    _add_model_args(p)
    _add_output_args(p)
    _add_mc_args(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("figure1", help="Int_inf and Int_t over a grid of premium rates")
    p.add_argument("--m", type=parse_float, default=1.0, help="M = E T / E Y")
    p.add_argument("--d2", type=parse_float, default=6.0, help="D^2")
    p.add_argument("-u", type=parse_float, default=15.0)
    p.add_argument("-t", type=parse_float, default=100.0)
    p.add_argument("--c-min", type=parse_float, default=0.0)
    p.add_argument("--c-max", type=parse_float, default=3.0)
    p.add_argument("--c-step", type=parse_float, default=0.01)
    _add_output_args(p)
    p.set_defaults(func=cmd_figure1)

    p = sub.add_parser("selfcheck", help="run the verification suites")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--corrupt-b1", type=float, default=None, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_selfcheck)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError, ModelError) as exc:
        print(f"levelcross: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        print(f"levelcross: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
