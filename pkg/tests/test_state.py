"""Charts, state validation, renormalization, and chart sampling."""

import numpy as np
import pytest

from conmot.errors import ChartViolation
from conmot.state import (
    State,
    bipartite_pair,
    euclidean,
    renormalize,
    sample_chart,
    simplex_product,
    sphere,
)


def test_chart_dimensions_and_block_slices():
    c = simplex_product(3, 2)
    assert c.dimension == 5
    assert c.block_slices() == (slice(0, 3), slice(3, 5))
    assert bipartite_pair(2, 4).dimension == 6
    assert euclidean(3).blocks == (3,)


def test_chart_rejects_bad_blocks():
    with pytest.raises(ChartViolation):
        simplex_product()
    with pytest.raises(ChartViolation):
        simplex_product(2, 0)


def test_state_rejects_wrong_dimension_and_nonfinite():
    with pytest.raises(ChartViolation):
        State([1.0, 2.0], euclidean(3))
    with pytest.raises(ChartViolation):
        State([np.nan, 0.0], euclidean(2))


def test_state_coordinates_are_readonly():
    s = State([1.0, 2.0], euclidean(2))
    with pytest.raises(ValueError):
        s.coordinates[0] = 5.0


def test_simplex_state_requires_unit_block_sums():
    c = simplex_product(2)
    State([0.25, 0.75], c)
    with pytest.raises(ChartViolation):
        State([0.25, 0.70], c)


def test_simplex_state_clamps_float_noise_negatives():
    """A -1e-14 coordinate from an update is noise, not a chart exit."""
    c = simplex_product(2)
    s = State([-1e-14, 1.0 + 1e-14], c)
    assert s.coordinates[0] == 0.0


def test_sphere_state_requires_unit_norm():
    c = sphere(2)
    State([0.6, 0.8], c)
    with pytest.raises(ChartViolation):
        State([1.0, 1.0], c)


def test_renormalize_reports_the_removed_defect():
    c = simplex_product(2)
    coords, defect = renormalize(np.array([0.5, 0.6]), c)
    assert coords == pytest.approx([0.5 / 1.1, 0.6 / 1.1])
    assert defect == pytest.approx(0.1)

    coords, defect = renormalize(np.array([3.0, 4.0]), sphere(2))
    assert np.linalg.norm(coords) == pytest.approx(1.0, abs=1e-15)
    assert defect == pytest.approx(4.0)

    coords, defect = renormalize(np.array([7.0, -2.0]), euclidean(2))
    assert defect == 0.0
    assert coords == pytest.approx([7.0, -2.0])


def test_renormalize_refuses_unrecoverable_inputs():
    with pytest.raises(ChartViolation):
        renormalize(np.array([0.0, 0.0]), sphere(2))
    with pytest.raises(ChartViolation):
        renormalize(np.array([-0.5, 1.5]), simplex_product(2))


def test_sample_chart_lands_on_each_chart():
    rng = np.random.default_rng(0)
    for chart in (euclidean(4), simplex_product(3, 2), sphere(3), bipartite_pair(2, 2)):
        for _ in range(20):
            s = sample_chart(chart, rng)
            assert s.chart == chart  # State construction re-validated it


def test_distance_to():
    a = State([0.0, 0.0], euclidean(2))
    b = State([3.0, 4.0], euclidean(2))
    assert a.distance_to(b) == pytest.approx(5.0)
