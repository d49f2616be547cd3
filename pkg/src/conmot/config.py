"""Run configurations: schema validation and exact-number loading.

A configuration is parsed twice from the same text. The first pass is plain
JSON for schema validation with helpful paths in error messages. The second
pass re-reads every float as a Fraction, so step sizes, payoff entries, and
initial states reach the exact engine without a detour through float64.
Decimal strings like "0.1" or "1/10" are accepted wherever exactness matters
and mean exactly what they say.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .errors import ConfigError
from .invariants import (
    WeightFunction,
    constant_weight,
    coordinate_weight,
    gaussian_bump_weight,
)
from .maps import (
    MapInstance,
    alternating_play,
    gradient_descent,
    mwu_exponential,
    mwu_linear,
    sphere_rgd,
)
from .objectives import ObjectiveSpec, PayoffData, bump, double_well, linear, quadratic
from .rationals import as_fraction
from .state import State

__all__ = ["RunConfig", "load_config", "build_weight"]

DEFAULT_TOLERANCE = 1e-9
DEFAULT_PREFIX = "run"


@dataclass(frozen=True)
class RunConfig:
    """Everything a CLI command needs, already constructed and validated."""

    map: MapInstance
    initial_states: tuple[State, ...]
    initial_exact: tuple[tuple[Fraction, ...], ...]
    n_forward: int
    n_backward: int
    invariant_spec: dict | None
    scan_spec: dict | None
    classify_spec: dict | None
    seed: int | None
    tolerance: float
    output_prefix: str


def _schema() -> dict:
    text = resources.files("conmot").joinpath("schema/run_config.schema.json").read_text()
    return json.loads(text)


def _build_objective(section: dict) -> ObjectiveSpec:
    name = section["name"]
    if name == "quadratic":
        return quadratic(section.get("dimension", 2))
    if name == "double_well":
        return double_well(section.get("dimension", 1))
    if name == "bump":
        return bump(section.get("dimension", 2))
    coeffs = section.get("coefficients")
    if coeffs is None:
        raise ConfigError(
            "a linear objective needs coefficients", json_path="map.objective"
        )
    return linear(np.array([float(as_fraction(c)) for c in coeffs]))


def _require(section: dict, key: str, where: str):
    if key not in section:
        raise ConfigError(f"{where} requires {key!r}", json_path=where)
    return section[key]


def _build_map(section: dict) -> MapInstance:
    kind = section["kind"]
    if kind == "alt_play":
        payoff_section = _require(section, "payoff", "map")
        rates = _require(section, "step_sizes", "map")
        if len(rates) != 2:
            raise ConfigError(
                "alt_play needs exactly two step sizes", json_path="map.step_sizes"
            )
        matrix = [[as_fraction(v) for v in row] for row in payoff_section["matrix"]]
        widths = {len(row) for row in matrix}
        if len(widths) != 1:
            raise ConfigError("payoff rows must all have the same length",
                              json_path="map.payoff.matrix")
        payoff = PayoffData.from_matrix(matrix)
        return alternating_play(payoff, as_fraction(rates[0]), as_fraction(rates[1]))

    objective = _build_objective(_require(section, "objective", "map"))
    if kind in ("mwu_exp", "mwu_lin"):
        blocks = _require(section, "blocks", "map")
        if "step_sizes" in section:
            eps = tuple(as_fraction(v) for v in section["step_sizes"])
        else:
            eps = as_fraction(_require(section, "step_size", "map"))
        maker = mwu_exponential if kind == "mwu_exp" else mwu_linear
        return maker(objective, eps, blocks)
    eta = as_fraction(_require(section, "step_size", "map"))
    if kind == "gd":
        return gradient_descent(objective, eta)
    return sphere_rgd(objective, eta)


def build_weight(section: dict | None) -> WeightFunction:
    """Weight function from an invariant.weight config section."""
    if section is None:
        return constant_weight(1.0)
    kind = section["kind"]
    if kind == "constant":
        return constant_weight(float(section.get("value", 1.0)))
    if kind == "coordinate":
        if "index" not in section:
            raise ConfigError("coordinate weight needs an index",
                              json_path="invariant.weight")
        return coordinate_weight(section["index"])
    if "center" not in section or "width" not in section:
        raise ConfigError("gaussian-bump weight needs center and width",
                          json_path="invariant.weight")
    center = [float(v) for v in section["center"]]
    return gaussian_bump_weight(center, float(section["width"]))


def load_config(path) -> RunConfig:
    """Read, validate, and construct a run configuration from a JSON file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        plain = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(plain, _schema())
    except jsonschema.ValidationError as exc:
        path_str = "$" + "".join(
            f"[{p!r}]" if isinstance(p, str) else f"[{p}]" for p in exc.absolute_path
        )
        raise ConfigError(f"{exc.message} (at {path_str})", json_path=path_str) from exc

    # Second pass: floats become Fractions; ints and strings are unchanged.
    doc = json.loads(text, parse_float=Fraction)

    map_instance = _build_map(doc["map"])

    initial_exact: list[tuple[Fraction, ...]] = []
    initial_states: list[State] = []
    for idx, row in enumerate(doc.get("initial_states", [])):
        vals = tuple(as_fraction(v) for v in row)
        if len(vals) != map_instance.chart.dimension:
            raise ConfigError(
                f"initial state {idx} has length {len(vals)}, the chart needs "
                f"{map_instance.chart.dimension}",
                json_path=f"initial_states[{idx}]",
            )
        initial_exact.append(vals)
        initial_states.append(
            State(np.array([float(v) for v in vals]), map_instance.chart)
        )

    steps = doc.get("steps", {})
    invariant_spec = doc.get("invariant")
    if invariant_spec is not None and invariant_spec["kind"] == "closed-form":
        if map_instance.kind != "alt_play":
            raise ConfigError(
                "the closed-form invariant only exists for alt_play",
                json_path="invariant.kind",
            )

    tolerance = doc.get("tolerance", DEFAULT_TOLERANCE)
    return RunConfig(
        map=map_instance,
        initial_states=tuple(initial_states),
        initial_exact=tuple(initial_exact),
        n_forward=int(steps.get("forward", 0)),
        n_backward=int(steps.get("backward", 0)),
        invariant_spec=invariant_spec,
        scan_spec=doc.get("scan"),
        classify_spec=doc.get("classify"),
        seed=doc.get("seed"),
        tolerance=float(tolerance),
        output_prefix=doc.get("output", {}).get("prefix", DEFAULT_PREFIX),
    )
