"""Closed-form and series invariants, their defects, and the rank diagnostic."""

import math
from fractions import Fraction

import numpy as np
import pytest

from conmot.dynamics import orbit
from conmot.errors import ConmotError, StepSizeError
from conmot.invariants import (
    BipartiteInvariant,
    bipartite_invariant,
    constant_weight,
    coordinate_weight,
    dphi_rank,
    gaussian_bump_weight,
    invariance_defect,
    make_series_invariant,
    series_invariant,
)
from conmot.maps import alternating_play, gradient_descent, mwu_exponential
from conmot.objectives import Box, ObjectiveSpec, PayoffData, double_well, linear, quadratic
from conmot.state import State, bipartite_pair, euclidean, simplex_product

PAY = PayoffData.from_matrix([[1]])

DOUBLE_WELL_GD = gradient_descent(double_well(1), 0.1)
HALF = State([0.5], euclidean(1))
ONES = constant_weight()


def test_bipartite_invariant_reference_values():
    assert bipartite_invariant(PAY, "0.1", "0.2", [60.0, -25.0]) == 31375.0
    assert bipartite_invariant(PAY, "0.05", "0.02", [-14.0, -5.0]) == 2740.0
    assert bipartite_invariant(PAY, "0.1", "0.2", [0.0, 0.0]) == 0.0


def test_bipartite_invariant_exact_arithmetic():
    phi = BipartiteInvariant(PAY, Fraction(1, 10), Fraction(1, 5))
    assert phi.exact([60, -25]) == Fraction(31375)
    assert phi.exact([Fraction(1, 3), Fraction(1, 7)]) == (
        Fraction(1, 9) * 10 - Fraction(1, 49) * 5 + Fraction(1, 21)
    )


def test_bipartite_invariant_accepts_states_and_checks_length():
    phi = BipartiteInvariant(PAY, "0.1", "0.2")
    s = State([60.0, -25.0], bipartite_pair(1, 1))
    assert phi(s) == 31375.0
    with pytest.raises(ConmotError):
        phi.exact([1.0, 2.0, 3.0])


def test_weight_catalog():
    assert constant_weight(2.5)([9.0]) == 2.5
    assert coordinate_weight(1)([3.0, 7.0]) == 7.0
    g = gaussian_bump_weight([0.0], 1.0)
    assert g([0.0]) == 1.0
    assert g([1.0]) == pytest.approx(math.exp(-0.5))
    with pytest.raises(ValueError):
        coordinate_weight(-1)
    with pytest.raises(ValueError):
        gaussian_bump_weight([0.0], 0.0)


def test_series_converges_to_the_telescoped_well_gap():
    """Partial sums from the double-well saddle rise to f(0) - f(1) = 1/4."""
    values = {}
    for n in (4, 8, 16, 32, 64):
        rep = series_invariant(DOUBLE_WELL_GD, None, ONES, HALF, n)
        values[n] = rep.value
        assert not rep.divergent and not rep.one_sided
    assert values[4] == pytest.approx(0.114871, abs=1e-5)
    assert values[16] == pytest.approx(0.241527, abs=1e-5)
    assert abs(values[64] - 0.25) < 1e-6
    # deeper truncation only improves the estimate
    ordered = [values[n] for n in (4, 8, 16, 32, 64)]
    assert ordered == sorted(ordered)


def test_series_partial_sums_are_nondecreasing_for_unit_weight():
    rep = series_invariant(DOUBLE_WELL_GD, None, ONES, HALF, 32)
    sums = rep.partial_sums
    assert len(sums) == 2 * rep.truncation_n + 1
    assert all(b >= a - 1e-15 for a, b in zip(sums, sums[1:]))


def test_series_telescopes_to_the_orbit_endpoint_gap():
    rep = series_invariant(DOUBLE_WELL_GD, None, ONES, HALF, 12)
    n = rep.truncation_n
    seg = orbit(DOUBLE_WELL_GD, HALF, n, n + 1)
    f = double_well(1).evaluate
    endpoints = f(seg.state_at(-(n + 1)).coordinates) - f(seg.state_at(n).coordinates)
    assert abs(rep.value - endpoints) <= 1e-12


def test_series_tail_estimate_is_the_last_increment():
    rep = series_invariant(DOUBLE_WELL_GD, None, ONES, HALF, 10)
    sums = rep.partial_sums
    assert rep.tail_estimate == pytest.approx(abs(sums[-1] - sums[-2]))


def test_series_at_a_fixed_point_is_zero_with_an_empty_trace():
    rep = series_invariant(DOUBLE_WELL_GD, None, ONES, State([1.0], euclidean(1)), 40)
    assert rep.value == 0.0
    assert rep.fixed_point is True
    assert rep.converged_early is True
    assert rep.partial_sums == ()
    assert rep.truncation_n == 0


def test_series_downgrades_to_one_sided_when_backward_exits_the_region():
    """From x=9 under x -> x/2 the preimage 18 leaves the ball of radius 10,
    so only the forward half of the series is computable."""
    m = gradient_descent(quadratic(1), 0.5)
    rep = series_invariant(m, None, ONES, State([9.0], euclidean(1)), 60)
    assert rep.one_sided is True
    assert rep.value == pytest.approx(40.5, abs=1e-9)
    assert any("backward" in note for note in rep.notes)


def test_series_flags_divergence_on_a_two_cycle():
    """A crafted period-2 gradient field never lets the increments decay, so
    the construction only yields the trivial invariant and must say so."""
    eta = 0.1
    seesaw = ObjectiveSpec(
        name="seesaw",
        dimension=2,
        evaluate=lambda z: float(z[0] + z[1]),
        gradient=lambda z: np.array([(2.0 * z[0] - 1.0) / eta, 0.0]),
        region=Box(lower=(-2.0, -2.0), upper=(2.0, 2.0)),
    )
    m = gradient_descent(seesaw, eta)
    rep = series_invariant(m, None, ONES, State([0.2, 0.3], euclidean(2)), 40)
    assert rep.divergent is True
    assert math.isnan(rep.value)
    assert any("not settling" in note for note in rep.notes)


def test_series_rejects_hopeless_constructions():
    with pytest.raises(ConmotError):
        series_invariant(
            alternating_play(PAY, 0.1, 0.2), None, ONES,
            State([60.0, -25.0], bipartite_pair(1, 1)), 8,
        )
    unbounded = gradient_descent(linear([1.0]), 0.1)
    with pytest.raises(ConmotError):
        series_invariant(unbounded, None, ONES, State([0.0], euclidean(1)), 8)
    too_fast = gradient_descent(double_well(1), 0.4)  # bound is ~0.3478
    with pytest.raises(StepSizeError):
        series_invariant(too_fast, None, ONES, HALF, 8)


def test_series_accepts_an_explicit_objective():
    """The sampled function may differ from the one driving the dynamics."""
    probe = quadratic(1)
    rep = series_invariant(DOUBLE_WELL_GD, probe, ONES, HALF, 48)
    # telescoped limit of x^2/2 along the same orbit: q(0) - q(1) = -1/2
    assert rep.value == pytest.approx(-0.5, abs=1e-3)


def test_make_series_invariant_matches_the_report_value():
    phi = make_series_invariant(DOUBLE_WELL_GD, None, ONES, 24)
    rep = series_invariant(DOUBLE_WELL_GD, None, ONES, HALF, 24)
    assert phi(HALF) == rep.value


def test_invariance_defect_is_exactly_zero_on_the_certified_instance():
    phi = BipartiteInvariant(PAY, Fraction(1, 10), Fraction(1, 5))
    m = alternating_play(PAY, Fraction(1, 10), Fraction(1, 5))
    s = State([60.0, -25.0], bipartite_pair(1, 1))
    assert invariance_defect(phi, m, s, 1000) == 0.0


def test_invariance_defect_of_a_constant_function_is_zero():
    m = DOUBLE_WELL_GD
    assert invariance_defect(lambda s: 3.0, m, HALF, 50) == 0.0


def test_invariance_defect_sees_truncation_bias_at_depth_zero():
    phi0 = make_series_invariant(DOUBLE_WELL_GD, None, ONES, 0)
    assert invariance_defect(phi0, DOUBLE_WELL_GD, HALF, 3) > 1e-4


def test_invariance_defect_shrinks_with_truncation_depth():
    defects = [
        invariance_defect(
            make_series_invariant(DOUBLE_WELL_GD, None, ONES, n),
            DOUBLE_WELL_GD, HALF, 3,
        )
        for n in (4, 8, 16, 32, 64)
    ]
    assert all(a > b for a, b in zip(defects, defects[1:]))
    assert defects[-1] < 1e-6


def test_series_defect_horizon_populates_the_report():
    rep = series_invariant(DOUBLE_WELL_GD, None, ONES, HALF, 48, defect_horizon=4)
    assert len(rep.per_step_defect) == 4
    assert max(rep.per_step_defect) < 1e-4


def test_dphi_rank_reference_instance():
    h, rank = dphi_rank(PAY, 0.1, 0.2)
    assert rank == 2
    np.testing.assert_allclose(h, [[20.0, 1.0], [1.0, -10.0]])


def test_dphi_rank_zero_payoff_keeps_full_rank():
    h, rank = dphi_rank(PayoffData.from_matrix([[0]]), 0.3, 0.7)
    assert rank == 2
    assert h[0, 1] == 0.0


def test_dphi_rank_rectangular_payoff():
    rng = np.random.default_rng(21)
    pay = PayoffData.from_matrix(rng.uniform(-1, 1, size=(3, 2)))
    _, rank = dphi_rank(pay, 0.2, 0.4)
    assert rank >= 2


def test_mwu_series_runs_on_the_simplex():
    m = mwu_exponential(quadratic(3), 0.1, (3,))
    s = State([0.5, 0.3, 0.2], simplex_product(3))
    rep = series_invariant(m, None, ONES, s, 30)
    assert math.isfinite(rep.value)
    assert rep.truncation_n > 0
