"""The map families: construction and forward steps.

Five kinds are supported, each a map T on its chart:

- ``gd``: x -> x - eta * grad f(x) on a euclidean chart.
- ``mwu_exp``: per-agent exponential weights on a product of simplices.
- ``mwu_lin``: the linearized variant; agrees with mwu_exp to O(eps^2).
- ``alt_play``: alternating bipartite play. The X update runs first and the
  Y update sees the already-updated X; that sequencing is what makes the
  closed-form invariant exact.
- ``rgd_sphere``: projected gradient plus normalization retraction on the
  unit sphere.

Forward steps renormalize simplex and sphere states every step and report the
pre-renormalization chart defect, so float drift never accumulates and is
distinguishable from algorithmic non-conservation.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import state as charts
from .errors import ChartViolation, RegionError, StepSizeError
from .objectives import ObjectiveSpec, PayoffData, region_contains
from .rationals import as_fraction
from .state import Chart, State, renormalize

__all__ = [
    "MAP_KINDS",
    "MapInstance",
    "gradient_descent",
    "mwu_exponential",
    "mwu_linear",
    "alternating_play",
    "sphere_rgd",
    "gd_step",
    "mwu_exp_step",
    "mwu_lin_step",
    "alt_play_step",
    "rgd_sphere_step",
    "step",
    "step_with_defect",
    "descent_check",
]

MAP_KINDS = ("gd", "mwu_exp", "mwu_lin", "alt_play", "rgd_sphere")


@dataclass(frozen=True)
class MapInstance:
    """One concrete map: kind, parameters, and the chart it acts on.

    Step sizes are stored as exact Fractions (floats convert exactly, decimal
    strings are taken at face value); float views are derived on demand. For
    mwu kinds step_sizes holds one entry per simplex block, for alt_play the
    pair (eta1, eta2), otherwise a single entry.
    """

    kind: str
    chart: Chart
    step_sizes: tuple[Fraction, ...]
    objective: ObjectiveSpec | None = None
    payoff: PayoffData | None = None

    def __post_init__(self) -> None:
        if self.kind not in MAP_KINDS:
            raise ValueError(f"unknown map kind {self.kind!r}")
        if any(s <= 0 for s in self.step_sizes):
            raise StepSizeError("step sizes must be positive")

    @property
    def float_step_sizes(self) -> tuple[float, ...]:
        return tuple(float(s) for s in self.step_sizes)


def gradient_descent(objective: ObjectiveSpec, eta) -> MapInstance:
    """Gradient descent with step size eta on the objective's euclidean chart."""
    chart = objective.chart or charts.euclidean(objective.dimension)
    if chart.kind not in ("euclidean", "bipartite-pair"):
        raise ChartViolation("gradient descent runs on euclidean coordinates")
    return MapInstance("gd", chart, (as_fraction(eta),), objective=objective)


def _mwu(kind: str, objective: ObjectiveSpec, eps, blocks) -> MapInstance:
    chart = charts.simplex_product(*blocks)
    if objective.dimension != chart.dimension:
        raise ChartViolation(
            f"objective dimension {objective.dimension} does not match blocks {tuple(blocks)}"
        )
    if np.ndim(eps) == 0:
        rates = (as_fraction(eps),) * len(chart.blocks)
    else:
        rates = tuple(as_fraction(e) for e in eps)
        if len(rates) != len(chart.blocks):
            raise StepSizeError("need one learning rate per agent block")
    return MapInstance(kind, chart, rates, objective=objective)


def mwu_exponential(objective: ObjectiveSpec, eps, blocks) -> MapInstance:
    """Exponential-weights update on a product of simplices.

    eps is a scalar or one rate per agent; the same per-agent rate is used in
    the numerator weights and the normalizing sum.
    """
    return _mwu("mwu_exp", objective, eps, blocks)


def mwu_linear(objective: ObjectiveSpec, eps, blocks) -> MapInstance:
    """Linearized multiplicative-weights update on a product of simplices."""
    return _mwu("mwu_lin", objective, eps, blocks)


def alternating_play(payoff: PayoffData, eta1, eta2) -> MapInstance:
    """Alternating bipartite play with rates (eta1, eta2)."""
    chart = charts.bipartite_pair(payoff.dimension_x, payoff.dimension_y)
    return MapInstance(
        "alt_play", chart, (as_fraction(eta1), as_fraction(eta2)), payoff=payoff
    )


def sphere_rgd(objective: ObjectiveSpec, eta) -> MapInstance:
    """Riemannian gradient descent on the unit sphere with the normalization retraction."""
    return MapInstance(
        "rgd_sphere", charts.sphere(objective.dimension), (as_fraction(eta),), objective=objective
    )


# ---------------------------------------------------------------------------
# raw step rules (array in, array out; each includes the map's own
# normalization where the definition has one)


def gd_step(objective: ObjectiveSpec, eta: float, x: np.ndarray) -> np.ndarray:
    return x - eta * objective.gradient(x)


def mwu_exp_step(
    objective: ObjectiveSpec, eps: tuple[float, ...], blocks: tuple[int, ...], x: np.ndarray
) -> np.ndarray:
    """Blockwise x_ij <- x_ij exp(-eps_i g_ij) / sum_s x_is exp(-eps_i g_is).

    Zero coordinates keep zero weight, so simplex faces are preserved. The
    exponent is shifted by the block minimum of g, which cancels in the ratio
    and prevents overflow.
    """
    g = objective.gradient(x)
    out = np.empty_like(x, dtype=float)
    start = 0
    for bi, size in enumerate(blocks):
        sl = slice(start, start + size)
        xb, gb = x[sl], g[sl]
        w = xb * np.exp(-eps[bi] * (gb - gb.min()))
        s = float(w.sum())
        if s <= 0.0:
            raise ChartViolation("a whole simplex block lost all mass in the mwu_exp update")
        out[sl] = w / s
        start += size
    return out


def mwu_lin_step(
    objective: ObjectiveSpec, eps: tuple[float, ...], blocks: tuple[int, ...], x: np.ndarray
) -> np.ndarray:
    """Blockwise x_ij <- x_ij (1 - eps_i g_ij) / (1 - eps_i <x_i, g_i>).

    Every multiplicative factor on the support must stay positive; a
    non-positive factor means the step size is too large for this orbit and
    raises StepSizeError rather than leaving the simplex.
    """
    g = objective.gradient(x)
    out = np.empty_like(x, dtype=float)
    start = 0
    for bi, size in enumerate(blocks):
        sl = slice(start, start + size)
        xb, gb = x[sl], g[sl]
        factors = 1.0 - eps[bi] * gb
        support = xb > 0
        if np.any(factors[support] <= 0.0):
            raise StepSizeError(
                f"mwu_lin factor {factors[support].min():.6g} is not positive; "
                "reduce the learning rate"
            )
        w = xb * factors
        s = float(w.sum())
        if s <= 0.0:
            raise ChartViolation("a whole simplex block lost all mass in the mwu_lin update")
        out[sl] = w / s
        start += size
    return out


def alt_play_step(payoff: PayoffData, eta1: float, eta2: float, xy: np.ndarray) -> np.ndarray:
    """One round of alternating play. X moves first; Y responds to the new X."""
    dx = payoff.dimension_x
    a = payoff.matrix
    x1 = xy[:dx] + eta1 * (a @ xy[dx:])
    y1 = xy[dx:] + eta2 * (a.T @ x1)
    return np.concatenate([x1, y1])


def rgd_sphere_step(objective: ObjectiveSpec, eta: float, x: np.ndarray) -> np.ndarray:
    """Project the gradient to the tangent space, step, retract by normalizing."""
    g = objective.gradient(x)
    tangent = g - x * float(x @ g)
    z = x - eta * tangent
    n = float(np.linalg.norm(z))
    if n <= 0.0:
        raise ChartViolation("retraction hit the origin; step size far too large")
    return z / n


# ---------------------------------------------------------------------------
# dispatch


def _raw_step(map_instance: MapInstance, coords: np.ndarray) -> np.ndarray:
    kind = map_instance.kind
    rates = map_instance.float_step_sizes
    if kind == "gd":
        obj = map_instance.objective
        if obj.region is not None and not region_contains(obj.region, coords):
            raise RegionError("state lies outside the objective's declared region")
        return gd_step(obj, rates[0], coords)
    if kind == "mwu_exp":
        return mwu_exp_step(map_instance.objective, rates, map_instance.chart.blocks, coords)
    if kind == "mwu_lin":
        return mwu_lin_step(map_instance.objective, rates, map_instance.chart.blocks, coords)
    if kind == "alt_play":
        return alt_play_step(map_instance.payoff, rates[0], rates[1], coords)
    return rgd_sphere_step(map_instance.objective, rates[0], coords)


def step_with_defect(map_instance: MapInstance, x: State) -> tuple[State, float]:
    """Apply the map once; return the new state and the chart defect removed."""
    if x.chart != map_instance.chart:
        raise ChartViolation(
            f"state chart {x.chart} does not match map chart {map_instance.chart}"
        )
    raw = _raw_step(map_instance, x.coordinates)
    coords, defect = renormalize(raw, map_instance.chart)
    return State(coords, map_instance.chart), defect


def step(map_instance: MapInstance, x: State) -> State:
    """T(x): one forward application of the map."""
    return step_with_defect(map_instance, x)[0]


def descent_check(objective: ObjectiveSpec, map_instance: MapInstance, x: State) -> float:
    """f(x) - f(T(x)); positive when the step strictly decreased the objective."""
    after = step(map_instance, x)
    return objective.evaluate(x.coordinates) - objective.evaluate(after.coordinates)
