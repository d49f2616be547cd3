"""States and the charts they live on.

A chart names the set a state belongs to and fixes the validity checks:

- ``euclidean``: any finite vector of the declared dimension.
- ``simplex-product``: concatenated probability blocks, one per agent; every
  block sums to 1 within SUM_TOL and coordinates are >= -CLAMP_TOL (tiny
  negatives are clamped to exactly 0 on construction).
- ``sphere``: unit vector, | ||x|| - 1 | <= SUM_TOL.
- ``bipartite-pair``: two stacked euclidean blocks (X then Y) of declared sizes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ChartViolation

__all__ = [
    "CHART_KINDS",
    "SUM_TOL",
    "Chart",
    "State",
    "euclidean",
    "simplex_product",
    "sphere",
    "bipartite_pair",
    "renormalize",
    "sample_chart",
]

CHART_KINDS = ("euclidean", "simplex-product", "sphere", "bipartite-pair")

# Chart residual tolerance (block sums, sphere norm) and the negativity clamp.
SUM_TOL = 1e-12
CLAMP_TOL = 1e-12


@dataclass(frozen=True)
class Chart:
    """Chart descriptor: a kind plus the block structure it needs.

    ``blocks`` means strategies-per-agent for simplex products, the pair
    (x_dim, y_dim) for bipartite pairs, and (dimension,) otherwise.
    """

    kind: str
    blocks: tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        if self.kind not in CHART_KINDS:
            raise ChartViolation(f"unknown chart kind {self.kind!r}; expected one of {CHART_KINDS}")
        blocks = tuple(int(b) for b in self.blocks)
        if not blocks or any(b < 1 for b in blocks):
            raise ChartViolation(f"chart blocks must be positive, got {blocks}")
        if self.kind == "bipartite-pair" and len(blocks) != 2:
            raise ChartViolation("bipartite-pair chart needs exactly two block sizes (x_dim, y_dim)")
        object.__setattr__(self, "blocks", blocks)

    @property
    def dimension(self) -> int:
        return sum(self.blocks)

    def block_slices(self) -> tuple[slice, ...]:
        """Slices of the coordinate vector covering each block in order."""
        out = []
        start = 0
        for size in self.blocks:
            out.append(slice(start, start + size))
            start += size
        return tuple(out)


def euclidean(dimension: int) -> Chart:
    return Chart("euclidean", (dimension,))


def simplex_product(*sizes: int) -> Chart:
    """Product of simplices; each entry is one agent's strategy count."""
    return Chart("simplex-product", tuple(sizes))


def sphere(dimension: int) -> Chart:
    """Unit sphere embedded in R^dimension."""
    return Chart("sphere", (dimension,))


def bipartite_pair(x_dim: int, y_dim: int) -> Chart:
    return Chart("bipartite-pair", (x_dim, y_dim))


def _chart_residual(coords: np.ndarray, chart: Chart) -> float:
    """Worst violation of the chart's defining equations (0 for euclidean kinds)."""
    if chart.kind == "simplex-product":
        worst = 0.0
        for sl in chart.block_slices():
            worst = max(worst, abs(float(coords[sl].sum()) - 1.0))
        neg = float(coords.min())
        if neg < 0:
            worst = max(worst, -neg)
        return worst
    if chart.kind == "sphere":
        return abs(float(np.linalg.norm(coords)) - 1.0)
    return 0.0


@dataclass(frozen=True)
class State:
    """An immutable point on a chart.

    Coordinates are copied to a read-only float64 array. Construction fails on
    wrong dimension, non-finite entries, or chart residual above SUM_TOL.
    """

    coordinates: np.ndarray
    chart: Chart

    def __post_init__(self) -> None:
        coords = np.array(self.coordinates, dtype=float).reshape(-1)
        if coords.shape[0] != self.chart.dimension:
            raise ChartViolation(
                f"state has dimension {coords.shape[0]} but chart "
                f"{self.chart.kind} expects {self.chart.dimension}"
            )
        if not np.all(np.isfinite(coords)):
            raise ChartViolation("state coordinates must be finite")
        if self.chart.kind == "simplex-product":
            # Tiny negatives from float updates are clamped to exactly 0.
            tiny = (coords < 0) & (coords >= -CLAMP_TOL)
            coords[tiny] = 0.0
        residual = _chart_residual(coords, self.chart)
        if residual > SUM_TOL:
            raise ChartViolation(
                f"chart residual {residual:.3e} exceeds {SUM_TOL:.0e} on {self.chart.kind}"
            )
        coords.setflags(write=False)
        object.__setattr__(self, "coordinates", coords)

    @property
    def dimension(self) -> int:
        return self.chart.dimension

    def replace_coordinates(self, coords: np.ndarray) -> "State":
        return State(coords, self.chart)

    def distance_to(self, other: "State") -> float:
        return float(np.linalg.norm(self.coordinates - other.coordinates))


def renormalize(coords: np.ndarray, chart: Chart) -> tuple[np.ndarray, float]:
    """Project coordinates back onto the chart exactly.

    Returns the renormalized copy and the pre-renormalization defect (the chart
    residual that was removed). Euclidean kinds pass through with defect 0.
    Raises ChartViolation when renormalization is impossible (a zero block, a
    zero vector on the sphere, or a negative beyond the clamp tolerance).
    """
    out = np.array(coords, dtype=float).reshape(-1)
    defect = _chart_residual(out, chart)
    if chart.kind == "simplex-product":
        neg = float(out.min())
        if neg < -CLAMP_TOL:
            raise ChartViolation(f"coordinate {neg:.3e} is below the clamp tolerance")
        out[out < 0] = 0.0
        for sl in chart.block_slices():
            s = float(out[sl].sum())
            if s <= 0.0:
                raise ChartViolation("cannot renormalize a block with zero total mass")
            out[sl] = out[sl] / s
    elif chart.kind == "sphere":
        n = float(np.linalg.norm(out))
        if n <= 0.0:
            raise ChartViolation("cannot renormalize the zero vector onto the sphere")
        out = out / n
    return out, defect


def sample_chart(chart: Chart, rng: np.random.Generator, scale: float = 1.0) -> State:
    """Draw a random state on the chart.

    Euclidean kinds use centered normals with the given scale; simplex blocks
    are Dirichlet(1) draws; sphere points are normalized normals.
    """
    if chart.kind == "simplex-product":
        parts = [rng.dirichlet(np.ones(size)) for size in chart.blocks]
        coords, _ = renormalize(np.concatenate(parts), chart)
        return State(coords, chart)
    if chart.kind == "sphere":
        v = rng.normal(size=chart.dimension)
        coords, _ = renormalize(v, chart)
        return State(coords, chart)
    return State(scale * rng.normal(size=chart.dimension), chart)
