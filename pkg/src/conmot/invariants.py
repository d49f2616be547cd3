"""Constants of motion and how to check them.

Two constructions live here. The closed-form bipartite quadratic is conserved
exactly by alternating play and is certified through the exact engine. The
truncated series invariant works for the dissipative maps: it sums weighted
one-step drops of the objective along the bi-infinite orbit, truncated
symmetrically, and reports its own convergence diagnostics instead of
pretending to be exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .dynamics import InverseConfig, inverse_step
from .errors import ConmotError, InversionError, RegionError, StepSizeError
from .exact import ExactAltOrbit, verify_conservation_identity
from .maps import MapInstance, step, step_with_defect
from .objectives import (
    PayoffData,
    validate_step_size_gd,
    validate_step_size_manifold,
)
from .rationals import as_fraction
from .state import State

__all__ = [
    "WeightFunction",
    "constant_weight",
    "coordinate_weight",
    "gaussian_bump_weight",
    "BipartiteInvariant",
    "bipartite_invariant",
    "InvariantReport",
    "series_invariant",
    "make_series_invariant",
    "invariance_defect",
    "dphi_rank",
]

TERM_STOP_TOL = 1e-14
DIVERGENCE_PATIENCE = 32


@dataclass(frozen=True)
class WeightFunction:
    """Scalar weight p(x) used inside the series invariant."""

    kind: str
    func: Callable[[np.ndarray], float]

    def __call__(self, x) -> float:
        coords = x.coordinates if isinstance(x, State) else np.asarray(x, dtype=np.float64)
        return float(self.func(coords))


def constant_weight(value: float = 1.0) -> WeightFunction:
    return WeightFunction(kind="constant", func=lambda x: value)


def coordinate_weight(index: int) -> WeightFunction:
    if index < 0:
        raise ValueError("coordinate index must be nonnegative")
    return WeightFunction(kind="coordinate", func=lambda x: float(x[index]))


def gaussian_bump_weight(center, width: float) -> WeightFunction:
    center = np.asarray(center, dtype=np.float64)
    if width <= 0:
        raise ValueError("width must be positive")
    two_w2 = 2.0 * width * width

    def bump(x: np.ndarray) -> float:
        d = x - center
        return math.exp(-float(d @ d) / two_w2)

    return WeightFunction(kind="gaussian-bump", func=bump)


class BipartiteInvariant:
    """Phi(X, Y) = |X|^2/eta1 - |Y|^2/eta2 + X.T A Y.

    Callable on a State or a raw coordinate vector. Float evaluation goes
    through exact rational arithmetic first (float64 inputs are exact binary
    rationals), so the only rounding is the final conversion.
    """

    def __init__(self, payoff: PayoffData, eta1, eta2) -> None:
        self.payoff = payoff
        self.eta1 = as_fraction(eta1)
        self.eta2 = as_fraction(eta2)
        if self.eta1 <= 0 or self.eta2 <= 0:
            raise ConmotError("step sizes must be positive")

    def exact(self, xy) -> Fraction:
        dx = self.payoff.dimension_x
        vals = [as_fraction(v) for v in xy]
        if len(vals) != dx + self.payoff.dimension_y:
            raise ConmotError("state length does not match the payoff dimensions")
        x, y = vals[:dx], vals[dx:]
        a = self.payoff.exact
        quad = sum(v * v for v in x) / self.eta1 - sum(v * v for v in y) / self.eta2
        cross = sum(x[i] * a[i][j] * y[j] for i in range(len(x)) for j in range(len(y)))
        return quad + cross

    def __call__(self, xy) -> float:
        coords = xy.coordinates if isinstance(xy, State) else xy
        return float(self.exact(coords))


def bipartite_invariant(payoff: PayoffData, eta1, eta2, xy) -> float:
    """One-shot evaluation of the conserved bipartite quadratic."""
    return BipartiteInvariant(payoff, eta1, eta2)(xy)


@dataclass(frozen=True)
class InvariantReport:
    """Value and diagnostics of one truncated series evaluation."""

    value: float
    truncation_n: int
    partial_sums: tuple[float, ...]
    tail_estimate: float
    per_step_defect: tuple[float, ...] = ()
    divergent: bool = False
    one_sided: bool = False
    fixed_point: bool = False
    converged_early: bool = False
    notes: tuple[str, ...] = field(default=())


def _series_preconditions(map_instance: MapInstance, objective) -> list[str]:
    """Raise when the construction has no hope; return advisory notes."""
    notes: list[str] = []
    kind = map_instance.kind
    if kind == "alt_play":
        raise ConmotError(
            "the series invariant needs bounded objective values along the "
            "orbit; alternating-play orbits are unbounded, use the closed-form "
            "quadratic instead"
        )
    obj = map_instance.objective
    if kind == "gd":
        if not objective.bounded and objective.region is None:
            raise ConmotError(
                "gradient descent needs a bounded objective or a declared "
                "region for the series invariant"
            )
        verdict = validate_step_size_gd(obj, map_instance.step_sizes[0])
        if verdict.accepted is False:
            raise StepSizeError(
                f"step size {float(map_instance.step_sizes[0])} fails the "
                f"contraction bound {verdict.bound}"
            )
        if verdict.accepted is None:
            notes.append("step size could not be verified against a curvature bound")
    elif kind == "rgd_sphere":
        verdict = validate_step_size_manifold(obj, map_instance.step_sizes[0])
        if verdict.accepted is False:
            raise StepSizeError(
                f"step size {float(map_instance.step_sizes[0])} fails the "
                f"manifold bound {verdict.bound}"
            )
        if verdict.accepted is None:
            notes.append("step size could not be verified against a curvature bound")
    else:
        # mwu variants: the chart is compact; the payoff is bounded on it.
        if map_instance.objective is None:
            raise ConmotError("mwu series invariant needs the game objective")
    return notes


class _OrbitCache:
    """Lazily extended forward/backward orbit with objective values."""

    def __init__(self, map_instance: MapInstance, origin: State, cfg: InverseConfig | None):
        self.map = map_instance
        self.cfg = cfg
        self.states = {0: origin}
        self.fmax = 0
        self.bmax = 0
        self.backward_blocked: str | None = None
        self.forward_blocked: str | None = None

    def get(self, n: int) -> State | None:
        if n in self.states:
            return self.states[n]
        if n > 0:
            if self.forward_blocked is not None:
                return None
            while self.fmax < n:
                try:
                    nxt = step(self.map, self.states[self.fmax])
                except RegionError as exc:
                    self.forward_blocked = f"forward step {self.fmax + 1}: {exc}"
                    return None
                self.fmax += 1
                self.states[self.fmax] = nxt
            return self.states[n]
        if self.backward_blocked is not None:
            return None
        while self.bmax > n:
            try:
                prev = inverse_step(self.map, self.states[self.bmax], self.cfg)
            except (InversionError, RegionError) as exc:
                self.backward_blocked = f"backward step {self.bmax - 1}: {exc}"
                return None
            self.bmax -= 1
            self.states[self.bmax] = prev
        return self.states[n]


def series_invariant(
    map_instance: MapInstance,
    objective,
    weight: WeightFunction,
    state: State,
    truncation: int,
    *,
    defect_horizon: int = 0,
    inverse_config: InverseConfig | None = None,
) -> InvariantReport:
    """Truncated series sum_n p(T^n x) (f(T^{n-1} x) - f(T^n x)).

    f comes from the objective argument (pass None for the map's own), p from
    the weight. Terms are added in the ring order 0, -1, +1, -2, +2, ... out
    to the truncation depth. Evaluation stops early once a whole ring falls
    below 1e-14, flags divergence when 32 consecutive rings fail to set a new
    smallest ring magnitude, and falls back to the computable side when a
    backward step cannot be continued (the report says so). truncation_n in
    the report is the deepest completed ring, so a full two-sided run has
    exactly 2 * truncation_n + 1 partial sums.
    """
    if truncation < 0:
        raise ValueError("truncation must be nonnegative")
    if objective is None:
        objective = map_instance.objective
    notes = _series_preconditions(map_instance, objective)
    obj = objective
    cache = _OrbitCache(map_instance, state, inverse_config)

    def f_at(n: int) -> float | None:
        s = cache.get(n)
        return None if s is None else float(obj.evaluate(s.coordinates))

    def term(n: int) -> float | None:
        here = cache.get(n)
        f_prev = f_at(n - 1)
        if here is None or f_prev is None:
            return None
        return weight(here) * (f_prev - f_at(n))

    # A point that does not move contributes nothing anywhere on its orbit.
    nxt, _ = step_with_defect(map_instance, state)
    if state.distance_to(nxt) <= 1e-12:
        return InvariantReport(
            value=0.0,
            truncation_n=0,
            partial_sums=(),
            tail_estimate=0.0,
            fixed_point=True,
            converged_early=True,
            notes=tuple(notes),
        )

    partial: list[float] = []
    total = 0.0
    divergent = False
    converged_early = False
    best_ring = math.inf
    stale_rings = 0
    last_increment = 0.0
    completed_depth = 0

    t0 = term(0)
    if t0 is None:
        notes.append(cache.backward_blocked or "the base term could not be computed")
        notes.append("series evaluated one-sided from ring 1")
        one_sided = True
        partial.append(0.0)
    else:
        one_sided = False
        total = t0
        partial.append(total)
        last_increment = abs(t0)

    for k in range(1, truncation + 1):
        ring_terms: list[float] = []
        t_minus = None if one_sided else term(-k)
        if t_minus is None and not one_sided:
            one_sided = True
            notes.append(cache.backward_blocked or f"backward orbit stopped before ring {k}")
        if t_minus is not None:
            total += t_minus
            partial.append(total)
            ring_terms.append(t_minus)
        t_plus = term(k)
        if t_plus is None:
            notes.append(cache.forward_blocked or f"forward orbit stopped before ring {k}")
            break
        total += t_plus
        partial.append(total)
        ring_terms.append(t_plus)
        completed_depth = k

        last_increment = abs(ring_terms[-1])
        ring_mag = max(abs(v) for v in ring_terms)
        if ring_mag < best_ring:
            best_ring = ring_mag
            stale_rings = 0
        else:
            stale_rings += 1
        if all(abs(v) < TERM_STOP_TOL for v in ring_terms):
            converged_early = True
            break
        if stale_rings >= DIVERGENCE_PATIENCE:
            divergent = True
            notes.append(
                f"no ring below {best_ring:.3e} in {DIVERGENCE_PATIENCE} "
                "consecutive rings; the series is not settling and the "
                "construction only yields the trivial invariant here"
            )
            break

    value = math.nan if divergent else total
    defects: tuple[float, ...] = ()
    if defect_horizon > 0 and not divergent:
        evaluator = make_series_invariant(
            map_instance, obj, weight, truncation, inverse_config=inverse_config
        )
        walker = state
        out = []
        for _ in range(defect_horizon):
            walker = step(map_instance, walker)
            out.append(abs(evaluator(walker) - value))
        defects = tuple(out)

    return InvariantReport(
        value=value,
        truncation_n=completed_depth,
        partial_sums=tuple(partial),
        tail_estimate=last_increment,
        per_step_defect=defects,
        divergent=divergent,
        one_sided=one_sided,
        fixed_point=False,
        converged_early=converged_early,
        notes=tuple(notes),
    )


def make_series_invariant(
    map_instance: MapInstance,
    objective,
    weight: WeightFunction,
    truncation: int,
    *,
    inverse_config: InverseConfig | None = None,
) -> Callable[[State], float]:
    """Evaluator closure over the truncated series at a fixed depth."""

    def evaluate(x: State) -> float:
        report = series_invariant(
            map_instance, objective, weight, x, truncation,
            inverse_config=inverse_config,
        )
        return report.value

    return evaluate


def invariance_defect(
    phi,
    map_instance: MapInstance,
    state: State,
    horizon: int,
    *,
    check_every: int = 200,
) -> float:
    """max over k in [1, horizon] of |phi(T^k x) - phi(x)| / (1 + |phi(x)|).

    When phi is the closed-form bipartite quadratic of this exact
    alternating-play instance the defect is certified in integer arithmetic
    (and is exactly 0.0); otherwise the orbit is iterated in float64 and the
    drift is measured numerically.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if (
        isinstance(phi, BipartiteInvariant)
        and map_instance.kind == "alt_play"
        and phi.payoff.exact == map_instance.payoff.exact
        and (phi.eta1, phi.eta2) == map_instance.step_sizes
    ):
        if verify_conservation_identity(phi.payoff, phi.eta1, phi.eta2):
            return 0.0
        exact_orbit = ExactAltOrbit(
            phi.payoff, phi.eta1, phi.eta2, [as_fraction(v) for v in state.coordinates]
        )
        worst = 0.0
        done = 0
        while done < horizon:
            chunk = min(check_every, horizon - done)
            exact_orbit.advance(chunk)
            done += chunk
            worst = max(worst, exact_orbit.phi_defect_float())
        return worst
    base = float(phi(state))
    if math.isnan(base):
        return math.nan
    scale = 1.0 + abs(base)
    worst = 0.0
    walker = state
    for _ in range(horizon):
        walker = step(map_instance, walker)
        worst = max(worst, abs(float(phi(walker)) - base) / scale)
    return worst


def dphi_rank(
    payoff: PayoffData, eta1, eta2, *, tolerance_factor: float = 1e-10
) -> tuple[np.ndarray, int]:
    """Gradient matrix of the bipartite quadratic and its numerical rank.

    Phi is the quadratic form z -> z.T H z with H assembled below up to the
    factor 2 on the diagonal blocks, so its differential at z is 2 H z and
    the rank of H counts independent directions of variation. H is always
    nonsingular for positive step sizes, hence the rank equals the full
    bipartite dimension.
    """
    e1, e2 = float(as_fraction(eta1)), float(as_fraction(eta2))
    if e1 <= 0 or e2 <= 0:
        raise ConmotError("step sizes must be positive")
    a = payoff.matrix
    dx, dy = payoff.dimension_x, payoff.dimension_y
    h = np.zeros((dx + dy, dx + dy))
    h[:dx, :dx] = (2.0 / e1) * np.eye(dx)
    h[:dx, dx:] = a
    h[dx:, :dx] = a.T
    h[dx:, dx:] = (-2.0 / e2) * np.eye(dy)
    sv = np.linalg.svd(h, compute_uv=False)
    rank = int(np.sum(sv > tolerance_factor * sv[0]))
    return h, rank
