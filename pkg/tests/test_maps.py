"""Forward update rules: worked one-step values, fixed points, error paths."""

import math

import numpy as np
import pytest

from conmot.errors import ChartViolation, RegionError, StepSizeError
from conmot.maps import (
    alternating_play,
    descent_check,
    gradient_descent,
    mwu_exponential,
    mwu_linear,
    sphere_rgd,
    step,
    step_with_defect,
)
from conmot.objectives import PayoffData, double_well, linear, quadratic, bump
from conmot.state import State, bipartite_pair, euclidean, simplex_product, sphere


def test_gd_contracts_the_quadratic():
    m = gradient_descent(quadratic(1), 0.1)
    out = step(m, State([2.0], euclidean(1)))
    assert out.coordinates[0] == pytest.approx(1.8)


def test_gd_two_dimensional_example():
    m = gradient_descent(quadratic(2), 0.1)
    out = step(m, State([2.0, 0.0], euclidean(2)))
    np.testing.assert_allclose(out.coordinates, [1.8, 0.0])


def test_gd_double_well_stationary_and_moving_points():
    m = gradient_descent(double_well(1), 0.1)
    minimizer = step(m, State([1.0], euclidean(1)))
    assert minimizer.coordinates[0] == pytest.approx(1.0)
    moved = step(m, State([0.5], euclidean(1)))
    # 0.5 - 0.1 * (0.125 - 0.5)
    assert moved.coordinates[0] == pytest.approx(0.5375)


def test_gd_refuses_points_outside_the_declared_region():
    m = gradient_descent(double_well(1), 0.1)
    with pytest.raises(RegionError):
        step(m, State([2.0], euclidean(1)))


def test_descent_check_values():
    m = gradient_descent(quadratic(1), 0.1)
    assert descent_check(quadratic(1), m, State([2.0], euclidean(1))) == pytest.approx(0.38)
    assert descent_check(quadratic(1), m, State([0.0], euclidean(1))) == 0.0
    dw = double_well(1)
    mdw = gradient_descent(dw, 0.1)
    assert descent_check(dw, mdw, State([0.5], euclidean(1))) > 0.0


def test_mwu_exp_worked_example():
    """Gradient (1, 0) at rate ln 2 reweights (1/2, 1/2) by (1/2, 1)."""
    m = mwu_exponential(linear([1.0, 0.0]), math.log(2.0), (2,))
    out = step(m, State([0.5, 0.5], simplex_product(2)))
    np.testing.assert_allclose(out.coordinates, [1 / 3, 2 / 3], atol=1e-15)


def test_mwu_lin_worked_example():
    m = mwu_linear(linear([1.0, 0.0]), 0.5, (2,))
    out = step(m, State([0.5, 0.5], simplex_product(2)))
    np.testing.assert_allclose(out.coordinates, [1 / 3, 2 / 3], atol=1e-15)


@pytest.mark.parametrize("ctor", [mwu_exponential, mwu_linear])
def test_mwu_constant_gradient_within_a_block_is_fixed(ctor):
    m = ctor(linear([3.0, 3.0, 5.0, 5.0]), 0.1, (2, 2))
    s = State([0.2, 0.8, 0.6, 0.4], simplex_product(2, 2))
    assert step(m, s).distance_to(s) == 0.0


@pytest.mark.parametrize("ctor", [mwu_exponential, mwu_linear])
def test_mwu_vertices_are_fixed(ctor):
    m = ctor(quadratic(2), 0.25, (2,))
    vertex = State([1.0, 0.0], simplex_product(2))
    out = step(m, vertex)
    np.testing.assert_array_equal(out.coordinates, [1.0, 0.0])


def test_mwu_lin_rejects_rate_that_kills_a_factor():
    """1 - eps * g must stay positive on the support."""
    m = mwu_linear(linear([3.0, 0.0]), 0.5, (2,))
    with pytest.raises(StepSizeError, match="factor"):
        step(m, State([0.5, 0.5], simplex_product(2)))


def test_mwu_needs_one_rate_per_block_when_not_scalar():
    with pytest.raises(StepSizeError):
        mwu_exponential(quadratic(5), (0.1, 0.1, 0.1), (3, 2))


def test_alt_play_worked_example():
    m = alternating_play(PayoffData.from_matrix([[1]]), 0.1, 0.2)
    out = step(m, State([60.0, -25.0], bipartite_pair(1, 1)))
    np.testing.assert_allclose(out.coordinates, [57.5, -13.5])


def test_alt_play_zero_y_moves_only_y():
    """With Y = 0 the X update degenerates and Y reacts to the unchanged X."""
    m = alternating_play(PayoffData.from_matrix([[1]]), 0.1, 0.2)
    out = step(m, State([4.0, 0.0], bipartite_pair(1, 1)))
    np.testing.assert_allclose(out.coordinates, [4.0, 0.8])


def test_alt_play_origin_is_fixed():
    m = alternating_play(PayoffData.from_matrix([[1]]), 0.1, 0.2)
    out = step(m, State([0.0, 0.0], bipartite_pair(1, 1)))
    np.testing.assert_array_equal(out.coordinates, [0.0, 0.0])


def test_alt_play_strict_sequencing_not_simultaneous():
    """Y must react to the already-updated X: with A=[1] from (1, 1),
    X' = 1.1 and Y' = 1 + 0.2 * 1.1, not 1 + 0.2 * 1."""
    m = alternating_play(PayoffData.from_matrix([[1]]), 0.1, 0.2)
    out = step(m, State([1.0, 1.0], bipartite_pair(1, 1)))
    np.testing.assert_allclose(out.coordinates, [1.1, 1.22])


def test_rgd_worked_example():
    m = sphere_rgd(linear([1.0, 0.0]), 0.1)
    out = step(m, State([0.0, 1.0], sphere(2)))
    np.testing.assert_allclose(
        out.coordinates, np.array([-0.1, 1.0]) / math.hypot(0.1, 1.0)
    )
    assert out.coordinates[0] == pytest.approx(-0.09950372, abs=1e-8)
    assert out.coordinates[1] == pytest.approx(0.99503719, abs=1e-8)


def test_rgd_radial_gradient_is_fixed():
    """When the ambient gradient is parallel to x the tangent part vanishes."""
    m = sphere_rgd(linear([0.6, 0.8]), 0.1)
    s = State([0.6, 0.8], sphere(2))
    assert step(m, s).distance_to(s) <= 1e-16


def test_rgd_descends_under_a_validated_rate():
    obj = bump(3)
    m = sphere_rgd(obj, 0.1)
    rng = np.random.default_rng(8)
    from conmot.state import sample_chart

    for _ in range(50):
        s = sample_chart(sphere(3), rng)
        assert descent_check(obj, m, s) >= -1e-15


def test_step_rejects_chart_mismatch():
    m = gradient_descent(quadratic(2), 0.1)
    with pytest.raises(ChartViolation):
        step(m, State([1.0, 0.0], simplex_product(2)))


def test_step_with_defect_reports_float_noise_only():
    m = mwu_exponential(quadratic(3), 0.05, (3,))
    s = State([0.2, 0.3, 0.5], simplex_product(3))
    out, defect = step_with_defect(m, s)
    assert 0.0 <= defect < 1e-14
    assert out.coordinates.sum() == pytest.approx(1.0, abs=1e-15)


def test_map_constructors_reject_nonpositive_rates():
    with pytest.raises(StepSizeError):
        gradient_descent(quadratic(1), 0.0)
    with pytest.raises(StepSizeError):
        alternating_play(PayoffData.from_matrix([[1]]), 0.1, -0.2)


def test_step_sizes_are_stored_exactly():
    from fractions import Fraction

    m = alternating_play(PayoffData.from_matrix([[1]]), "0.1", Fraction(1, 5))
    assert m.step_sizes == (Fraction(1, 10), Fraction(1, 5))
    assert m.float_step_sizes == (0.1, 0.2)
