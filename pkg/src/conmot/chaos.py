"""Chaos diagnostics: scrambled pairs, level-set confinement, orbit identity.

A pair is scrambled when its orbits come arbitrarily close infinitely often
yet also separate beyond a fixed gap infinitely often. On a finite horizon we
estimate liminf/limsup of the pair distance over a tail window and classify
conservatively: the scramble-candidate verdict is a flag for closer scrutiny,
never a proof. A conserved quantity with a nondegenerate differential confines
orbits to level sets, so candidates whose invariants disagree are refuted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import InverseConfig, detect_fixed_point, inverse_step
from .errors import ChartViolation, InversionError, NumericsError, RegionError
from .exact import difference_log_stats, verify_conservation_identity
from .invariants import BipartiteInvariant, invariance_defect
from .maps import MapInstance, step
from .state import State

__all__ = [
    "ChaosReport",
    "scrambled_pair_estimate",
    "batched_pair_reports",
    "ConfinementReport",
    "level_set_confinement",
    "OrbitSignature",
    "orbit_signature",
    "SameOrbitVerdict",
    "same_orbit",
]

EPS_LOW = 1e-6
EPS_HIGH = 1e-3
CONFINEMENT_PRECONDITION_TOL = 1e-9
# Norm ratio beyond which a diverging orbit cannot swing back to the target.
ESCAPE_FACTOR = 1e8


def _relative_gap(phi, x: State, y: State) -> float:
    """|phi(x) - phi(y)| / (1 + max |phi|): symmetric in the pair."""
    if phi is None:
        return math.nan
    px, py = float(phi(x)), float(phi(y))
    return abs(px - py) / (1.0 + max(abs(px), abs(py)))


def _exp2_safe(log2_value: float) -> float:
    if log2_value > 1023.0:
        return math.inf
    return float(2.0 ** log2_value)


def _verdict_from_log2(lim_lo: float, lim_hi: float, eps_low: float, eps_high: float) -> str:
    lo_thr = math.log2(eps_low)
    hi_thr = math.log2(eps_high)
    if lim_hi <= lo_thr:
        return "converging-pair"
    if lim_lo <= lo_thr and lim_hi >= hi_thr:
        return "scramble-candidate"
    if lim_lo > lo_thr:
        return "separated"
    return "inconclusive"


@dataclass(frozen=True)
class ChaosReport:
    """Tail statistics of the distance between two orbits."""

    x: State
    y: State
    horizon: int
    tail_start: int
    liminf_estimate: float
    limsup_estimate: float
    invariant_gap: float
    eps_low: float
    eps_high: float
    verdict: str


def scrambled_pair_estimate(
    map_instance: MapInstance,
    x: State,
    y: State,
    horizon: int,
    *,
    eps_low: float = EPS_LOW,
    eps_high: float = EPS_HIGH,
    phi=None,
) -> ChaosReport:
    """Classify one pair by the tail behavior of its orbit distance.

    Alternating play is linear, so the pair distance is the evolved difference
    vector and is tracked in log space to any horizon. The nonlinear kinds
    iterate both float64 orbits directly. The invariant gap is the symmetric
    relative disagreement |phi(x) - phi(y)| / (1 + max(|phi(x)|, |phi(y)|))
    when phi is supplied.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if x.chart != map_instance.chart or y.chart != map_instance.chart:
        raise ChartViolation("pair charts must match the map chart")
    if np.array_equal(x.coordinates, y.coordinates):
        raise ValueError("the two points of a pair must differ")

    tail_start = horizon - max(1, horizon // 5)
    invariant_gap = _relative_gap(phi, x, y)

    if map_instance.kind == "alt_play":
        e1, e2 = map_instance.float_step_sizes
        diff = (x.coordinates - y.coordinates)[None, :]
        lo_log2, hi_log2 = difference_log_stats(
            map_instance.payoff, e1, e2, diff, horizon
        )
        verdict = _verdict_from_log2(float(lo_log2[0]), float(hi_log2[0]), eps_low, eps_high)
        lim_lo, lim_hi = _exp2_safe(float(lo_log2[0])), _exp2_safe(float(hi_log2[0]))
    else:
        wx, wy = x, y
        lim_lo, lim_hi = math.inf, -math.inf
        for t in range(1, horizon + 1):
            try:
                wx = step(map_instance, wx)
                wy = step(map_instance, wy)
            except ChartViolation as exc:
                raise NumericsError(
                    f"pair orbit left float range at step {t}: {exc}", step_index=t
                ) from exc
            if t > tail_start:
                d = wx.distance_to(wy)
                lim_lo = min(lim_lo, d)
                lim_hi = max(lim_hi, d)
        if lim_hi <= eps_low:
            verdict = "converging-pair"
        elif lim_lo <= eps_low and lim_hi >= eps_high:
            verdict = "scramble-candidate"
        elif lim_lo > eps_low:
            verdict = "separated"
        else:
            verdict = "inconclusive"

    return ChaosReport(
        x=x,
        y=y,
        horizon=horizon,
        tail_start=tail_start,
        liminf_estimate=lim_lo,
        limsup_estimate=lim_hi,
        invariant_gap=invariant_gap,
        eps_low=eps_low,
        eps_high=eps_high,
        verdict=verdict,
    )


def batched_pair_reports(
    map_instance: MapInstance,
    pairs,
    horizon: int,
    *,
    eps_low: float = EPS_LOW,
    eps_high: float = EPS_HIGH,
    phi=None,
) -> list[ChaosReport]:
    """scrambled_pair_estimate over many pairs, vectorized where possible.

    For alternating play all difference vectors evolve under one matrix, so
    the whole batch advances with a single matrix product per step. Other
    kinds fall back to the per-pair path.
    """
    pairs = list(pairs)
    if map_instance.kind != "alt_play":
        return [
            scrambled_pair_estimate(
                map_instance, x, y, horizon,
                eps_low=eps_low, eps_high=eps_high, phi=phi,
            )
            for x, y in pairs
        ]
    if not pairs:
        return []
    for x, y in pairs:
        if x.chart != map_instance.chart or y.chart != map_instance.chart:
            raise ChartViolation("pair charts must match the map chart")
        if np.array_equal(x.coordinates, y.coordinates):
            raise ValueError("the two points of a pair must differ")
    diffs = np.stack([x.coordinates - y.coordinates for x, y in pairs])
    e1, e2 = map_instance.float_step_sizes
    lo_log2, hi_log2 = difference_log_stats(
        map_instance.payoff, e1, e2, diffs, horizon
    )
    tail_start = horizon - max(1, horizon // 5)
    reports = []
    for (x, y), lo, hi in zip(pairs, lo_log2, hi_log2):
        gap = _relative_gap(phi, x, y)
        reports.append(
            ChaosReport(
                x=x,
                y=y,
                horizon=horizon,
                tail_start=tail_start,
                liminf_estimate=_exp2_safe(float(lo)),
                limsup_estimate=_exp2_safe(float(hi)),
                invariant_gap=gap,
                eps_low=eps_low,
                eps_high=eps_high,
                verdict=_verdict_from_log2(float(lo), float(hi), eps_low, eps_high),
            )
        )
    return reports


@dataclass(frozen=True)
class ConfinementReport:
    """Outcome of a level-set confinement scan over a batch of pairs."""

    status: str
    reason: str
    checked_pairs: int
    verdict_counts: dict
    refutations: tuple
    continuity_caveat: bool


def level_set_confinement(
    map_instance: MapInstance,
    phi,
    pairs,
    horizon: int,
    *,
    tolerance: float = 1e-9,
    eps_low: float = EPS_LOW,
    eps_high: float = EPS_HIGH,
    reports: list[ChaosReport] | None = None,
) -> ConfinementReport:
    """Scan pairs for scramble candidates that would cross level sets.

    Precondition: phi must actually be conserved by this map. For the
    closed-form quadratic under its own alternating-play instance that is
    discharged by the exact matrix identity; for anything else the drift is
    sampled on a few tested orbits first. A failed precondition produces a
    skipped report rather than classifications that would mean nothing.

    A scramble-candidate whose invariant gap exceeds ``tolerance`` is recorded
    as a refutation: the pair cannot be scrambled if phi is conserved and
    continuous, so either the map is not the one phi belongs to or the
    finite-horizon verdict is noise.

    Pass precomputed ``reports`` (one per pair, same order, evaluated with
    this phi) to avoid re-running the pair orbits.
    """
    pairs = list(pairs)
    if reports is not None and len(reports) != len(pairs):
        raise ValueError("reports must match pairs one to one")
    continuity_caveat = map_instance.kind in ("gd", "mwu_exp", "mwu_lin")
    exactly_conserved = (
        isinstance(phi, BipartiteInvariant)
        and map_instance.kind == "alt_play"
        and phi.payoff.exact == map_instance.payoff.exact
        and (phi.eta1, phi.eta2) == map_instance.step_sizes
        and verify_conservation_identity(phi.payoff, phi.eta1, phi.eta2)
    )
    if not exactly_conserved:
        probe_horizon = min(horizon, 50)
        for x, _ in pairs[:3]:
            defect = invariance_defect(phi, map_instance, x, probe_horizon)
            if not defect <= CONFINEMENT_PRECONDITION_TOL:
                return ConfinementReport(
                    status="skipped",
                    reason=(
                        "phi is not conserved under this map: sampled drift "
                        f"{defect:.3e} over {probe_horizon} steps exceeds "
                        f"{CONFINEMENT_PRECONDITION_TOL:.0e}"
                    ),
                    checked_pairs=0,
                    verdict_counts={},
                    refutations=(),
                    continuity_caveat=continuity_caveat,
                )

    if reports is None:
        reports = batched_pair_reports(
            map_instance, pairs, horizon, eps_low=eps_low, eps_high=eps_high, phi=phi
        )
    counts: dict[str, int] = {}
    refutations = []
    for idx, report in enumerate(reports):
        counts[report.verdict] = counts.get(report.verdict, 0) + 1
        if report.verdict == "scramble-candidate" and report.invariant_gap > tolerance:
            refutations.append((idx, report.invariant_gap))
    return ConfinementReport(
        status="completed",
        reason="",
        checked_pairs=len(pairs),
        verdict_counts=counts,
        refutations=tuple(refutations),
        continuity_caveat=continuity_caveat,
    )


@dataclass(frozen=True)
class OrbitSignature:
    """Invariant values at a point; constant along the point's orbit."""

    values: tuple[float, ...]

    def gap_to(self, other: "OrbitSignature") -> float:
        if len(self.values) != len(other.values):
            raise ValueError("signatures must have the same length")
        if not self.values:
            return 0.0
        return max(
            abs(a - b) / (1.0 + abs(a)) for a, b in zip(self.values, other.values)
        )


def orbit_signature(map_instance: MapInstance, x: State, phis) -> OrbitSignature:
    if x.chart != map_instance.chart:
        raise ChartViolation("state chart does not match map chart")
    return OrbitSignature(values=tuple(float(phi(x)) for phi in phis))


@dataclass(frozen=True)
class SameOrbitVerdict:
    """Answer to 'do x and y lie on one orbit?' with the evidence found."""

    answer: str
    index: int | None
    closest_approach: float
    invariant_gap: float
    search_mode: str


def same_orbit(
    map_instance: MapInstance,
    x: State,
    y: State,
    max_iterations: int,
    tolerance: float,
    *,
    phis=(),
    inverse_config: InverseConfig | None = None,
) -> SameOrbitVerdict:
    """Decide orbit membership by invariants first, then bidirectional search.

    Any invariant disagreeing beyond the relative tolerance settles the
    question negatively without iterating. Otherwise the orbit of x is walked
    up to max_iterations steps each way looking for y within tolerance. An
    exhausted or escape-guarded search returns inconclusive: absence within a
    finite window proves nothing.
    """
    if max_iterations < 0:
        raise ValueError("max_iterations must be nonnegative")
    sig_x = orbit_signature(map_instance, x, phis)
    sig_y = orbit_signature(map_instance, y, phis)
    gap = sig_x.gap_to(sig_y)
    if gap > tolerance:
        return SameOrbitVerdict(
            answer="no",
            index=None,
            closest_approach=x.distance_to(y),
            invariant_gap=gap,
            search_mode="invariant-filter",
        )

    closest = x.distance_to(y)
    if closest <= tolerance:
        return SameOrbitVerdict(
            answer="yes", index=0, closest_approach=closest,
            invariant_gap=gap, search_mode="bidirectional",
        )

    # Two distinct fixed points sit on two distinct constant orbits.
    if detect_fixed_point(map_instance, x) and detect_fixed_point(map_instance, y):
        return SameOrbitVerdict(
            answer="no", index=None, closest_approach=closest,
            invariant_gap=gap, search_mode="fixed-points",
        )

    escape_norm = (1.0 + float(np.linalg.norm(y.coordinates))) * ESCAPE_FACTOR
    search_mode = "bidirectional"

    walker = x
    for k in range(1, max_iterations + 1):
        try:
            walker = step(map_instance, walker)
        except ChartViolation:
            break
        d = walker.distance_to(y)
        closest = min(closest, d)
        if d <= tolerance:
            return SameOrbitVerdict(
                answer="yes", index=k, closest_approach=d,
                invariant_gap=gap, search_mode=search_mode,
            )
        if float(np.linalg.norm(walker.coordinates)) > escape_norm:
            break

    walker = x
    for k in range(1, max_iterations + 1):
        try:
            walker = inverse_step(map_instance, walker, inverse_config)
        except (InversionError, RegionError):
            search_mode = "forward-only"
            break
        d = walker.distance_to(y)
        closest = min(closest, d)
        if d <= tolerance:
            return SameOrbitVerdict(
                answer="yes", index=-k, closest_approach=d,
                invariant_gap=gap, search_mode=search_mode,
            )
        if float(np.linalg.norm(walker.coordinates)) > escape_norm:
            break

    return SameOrbitVerdict(
        answer="inconclusive",
        index=None,
        closest_approach=closest,
        invariant_gap=gap,
        search_mode=search_mode,
    )
