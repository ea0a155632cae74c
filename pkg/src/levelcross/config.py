"""Model configuration from INI files or compact inline specs.

INI layout::

    premium_rate = 1.0

    [first_arrival]
    kind = exponential
    rate = 1.0

    [inter_arrival]
    kind = gamma
    shape = 2
    rate = 2

    [jump]
    kind = grid
    step = 0.01
    values = 0 0.5 1.0 ...      # or: tabulate = gamma, shape = 2, rate = 1

Inline specs look like ``exponential:1``, ``gamma:2,1`` (shape, rate).
"""

from __future__ import annotations

import configparser
import math
from pathlib import Path

import numpy as np

from .model import Exponential, Gamma, GridDensity, ModelError, RenewalModel

SECTIONS = ("first_arrival", "inter_arrival", "jump")
_TOP = "__top__"


class ConfigError(ValueError):
    pass


def parse_float(text: str) -> float:
    """Float parser accepting ``inf`` spellings."""
    text = text.strip().lower()
    if text in ("inf", "+inf", "infinity"):
        return math.inf
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"not a number: {text!r}") from None


def _parametric(kind: str, params: dict[str, str]):
    try:
        if kind == "exponential":
            return Exponential(parse_float(params["rate"]))
        if kind == "gamma":
            return Gamma(parse_float(params["shape"]), parse_float(params["rate"]))
    except KeyError as exc:
        raise ConfigError(f"{kind} distribution needs parameter {exc.args[0]!r}") from None
    raise ConfigError(f"unknown distribution kind {kind!r}")


def distribution_from_mapping(params: dict[str, str]):
    kind = params.get("kind", "").strip().lower()
    if kind in ("exponential", "gamma"):
        return _parametric(kind, params)
    if kind != "grid":
        raise ConfigError(f"unknown distribution kind {kind!r}")
    step = parse_float(params["step"]) if "step" in params else None
    if "values" in params:
        if step is None:
            raise ConfigError("grid with explicit values needs a step")
        values = np.array([parse_float(x) for x in params["values"].replace(",", " ").split()])
        origin = parse_float(params.get("origin", "0"))
        # tabulated values are renormalised to unit trapezoid mass
        mass = step * (values.sum() - 0.5 * (values[0] + values[-1]))
        if not mass > 0:
            raise ConfigError("grid values have no mass")
        return GridDensity(origin, step, values / mass)
    if "tabulate" in params:
        base = _parametric(params["tabulate"].strip().lower(), params)
        upper = parse_float(params["upper"]) if "upper" in params else None
        return GridDensity.from_distribution(base, step=step, upper=upper)
    raise ConfigError("grid distribution needs 'values' or 'tabulate'")


def parse_inline(spec: str):
    """``exponential:RATE`` or ``gamma:SHAPE,RATE``."""
    kind, _, rest = spec.partition(":")
    args = [a for a in rest.split(",") if a.strip()]
    kind = kind.strip().lower()
    names = {"exponential": ("rate",), "gamma": ("shape", "rate")}.get(kind)
    if names is None:
        raise ConfigError(f"unknown distribution kind {kind!r} in {spec!r}")
    if len(args) != len(names):
        raise ConfigError(f"{kind} needs {len(names)} parameter(s): {spec!r}")
    return _parametric(kind, dict(zip(names, args)))


def load_model(path: str | Path) -> RenewalModel:
    text = Path(path).read_text()
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(f"[{_TOP}]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    top = parser[_TOP]
    if "premium_rate" not in top:
        raise ConfigError("missing top-level premium_rate")
    dists = {}
    for name in SECTIONS:
        if name not in parser:
            raise ConfigError(f"missing section [{name}]")
        dists[name] = distribution_from_mapping(dict(parser[name]))
    try:
        return RenewalModel(dists["first_arrival"], dists["inter_arrival"], dists["jump"],
                            parse_float(top["premium_rate"]))
    except ModelError as exc:
        raise ConfigError(str(exc)) from None


def model_to_ini(model: RenewalModel) -> str:
    """Inverse of ``load_model`` for parametric and grid distributions."""
    lines = [f"premium_rate = {model.premium_rate!r}", ""]
    for name in SECTIONS:
        d = getattr(model, name)
        lines.append(f"[{name}]")
        if isinstance(d, Exponential):
            lines += ["kind = exponential", f"rate = {d.rate!r}"]
        elif isinstance(d, Gamma):
            lines += ["kind = gamma", f"shape = {d.shape!r}", f"rate = {d.rate!r}"]
        else:
            lines += ["kind = grid", f"origin = {d.origin!r}", f"step = {d.step!r}",
                      "values = " + " ".join(repr(float(x)) for x in d.values)]
        lines.append("")
    return "\n".join(lines)
