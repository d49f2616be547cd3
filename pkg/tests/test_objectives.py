"""Objective catalog: analytic derivatives, payoff assembly, step-size checks."""

import numpy as np
import pytest

from conmot.objectives import (
    Ball,
    Box,
    PayoffData,
    bilinear,
    bump,
    double_well,
    estimate_hessian_entry_bound,
    linear,
    quadratic,
    region_contains,
    sample_region,
    validate_step_size_gd,
    validate_step_size_manifold,
)

CATALOG = [quadratic(2), double_well(2), bump(2), linear([1.0, -2.0])]


def _fd_gradient(f, x, h=1e-6):
    g = np.empty_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


@pytest.mark.parametrize("obj", CATALOG, ids=lambda o: o.name)
def test_gradient_matches_central_differences(obj):
    rng = np.random.default_rng(11)
    for _ in range(100):
        x = sample_region(obj.region, rng, obj.dimension)
        fd = _fd_gradient(obj.evaluate, x)
        scale = 1.0 + np.linalg.norm(fd)
        assert np.linalg.norm(obj.gradient(x) - fd) / scale < 1e-6


@pytest.mark.parametrize("obj", CATALOG, ids=lambda o: o.name)
def test_hessian_matches_differences_of_the_gradient(obj):
    rng = np.random.default_rng(12)
    h = 1e-6
    for _ in range(25):
        x = sample_region(obj.region, rng, obj.dimension)
        d = obj.dimension
        fd = np.empty((d, d))
        for j in range(d):
            e = np.zeros(d)
            e[j] = h
            fd[:, j] = (obj.gradient(x + e) - obj.gradient(x - e)) / (2 * h)
        scale = 1.0 + np.abs(fd).max()
        assert np.abs(obj.hessian(x) - fd).max() / scale < 1e-5


@pytest.mark.parametrize("obj", CATALOG, ids=lambda o: o.name)
def test_declared_curvature_bound_dominates_sampled_entries(obj):
    rng = np.random.default_rng(13)
    worst = 0.0
    for _ in range(1000):
        x = sample_region(obj.region, rng, obj.dimension)
        worst = max(worst, float(np.abs(obj.hessian(x)).max()))
    assert worst <= obj.hessian_entry_bound + 1e-12


def test_double_well_curvature_bound_value():
    # |3 x^2 - 1| peaks at the box corner 1.5: 3 * 2.25 - 1.
    assert double_well(1).hessian_entry_bound == pytest.approx(5.75)


def test_region_membership_and_sampling():
    box = Box(lower=(-1.0, -1.0), upper=(1.0, 1.0))
    ball = Ball(center=(0.0, 0.0), radius=2.0)
    assert region_contains(box, np.array([0.5, -0.5]))
    assert not region_contains(box, np.array([1.5, 0.0]))
    assert region_contains(ball, np.array([1.0, 1.0]))
    assert not region_contains(ball, np.array([2.0, 1.0]))
    rng = np.random.default_rng(3)
    for region in (box, ball, None):
        for _ in range(50):
            assert region_contains(region, sample_region(region, rng, 2))


def test_payoff_blocks_assemble_in_agent_order():
    blocks = [
        [[[1, 2]], [[3, 4]]],
        [[[5, 6]], [[7, 8]]],
    ]  # n=2 row agents, m=2 column agents, each block 1x2
    p = PayoffData(blocks)
    assert (p.n, p.m, p.k1, p.k2) == (2, 2, 1, 2)
    assert p.dimension_x == 2 and p.dimension_y == 4
    np.testing.assert_array_equal(p.matrix, [[1, 2, 3, 4], [5, 6, 7, 8]])
    np.testing.assert_array_equal(p.block(1, 0), [[5, 6]])


def test_payoff_from_matrix_and_exact_entries():
    p = PayoffData.from_matrix([["0.1", 2]])
    from fractions import Fraction

    assert p.exact[0][0] == Fraction(1, 10)  # decimal strings stay exact
    assert p.matrix[0][1] == 2.0


def test_payoff_rejects_ragged_blocks():
    with pytest.raises(ValueError):
        PayoffData([[[[1, 2]]], [[[1, 2], [3, 4]]]])


def test_gd_validator_quadratic_worked_example():
    v = validate_step_size_gd(quadratic(2), 0.9)
    assert v.accepted is True
    assert v.bound == pytest.approx(1.0)
    assert v.margin == pytest.approx(0.1)
    assert validate_step_size_gd(quadratic(2), 1.0).accepted is False


def test_gd_validator_double_well_example():
    v = validate_step_size_gd(double_well(1), 0.1)
    assert v.accepted is True
    assert v.bound == pytest.approx(2.0 / 5.75)


def test_gd_validator_flat_objective_accepts_everything():
    v = validate_step_size_gd(linear([1.0, 0.0]), 100.0)
    assert v.accepted is True
    assert v.bound == np.inf


def test_gd_validator_unverifiable_is_not_a_rejection():
    from conmot.objectives import ObjectiveSpec

    blind = ObjectiveSpec(
        name="blind", dimension=1,
        evaluate=lambda x: float(np.sin(x[0])),
        gradient=lambda x: np.cos(x),
    )
    v = validate_step_size_gd(blind, 0.5)
    assert v.accepted is None
    assert "not requested" in v.detail
    # With an rng the bound is estimated by sampling and marked as such.
    v2 = validate_step_size_gd(blind, 0.5, rng=np.random.default_rng(0))
    assert v2.accepted in (True, False)
    assert v2.estimated is True
    assert v2.curvature_bound is not None


def test_manifold_validator_boundary_cases():
    obj = bump(3)
    assert validate_step_size_manifold(obj, 0.4, 2.0).accepted is True
    assert validate_step_size_manifold(obj, 0.5, 2.0).accepted is False
    v = validate_step_size_manifold(obj, 0.1, rng=np.random.default_rng(1))
    assert v.estimated is True
    assert v.curvature_bound is not None


def test_nonpositive_step_sizes_are_rejected_outright():
    assert validate_step_size_gd(quadratic(1), 0.0).accepted is False
    assert validate_step_size_manifold(bump(2), -0.1, 1.0).accepted is False


def test_sampled_curvature_estimate_dominates_true_bound_for_quadratic():
    """f = ||x||^2/2 has Hessian I everywhere, so the sampled bound must
    come back at least 1 (it carries a safety factor on top)."""
    est = estimate_hessian_entry_bound(quadratic(3), np.random.default_rng(2))
    assert est >= 1.0


def test_bilinear_objective_evaluates_the_pairing():
    p = PayoffData.from_matrix([[2.0]])
    obj = bilinear(p)
    z = np.array([3.0, 4.0])
    assert obj.evaluate(z) == pytest.approx(24.0)
    np.testing.assert_allclose(obj.gradient(z), [8.0, 6.0])
