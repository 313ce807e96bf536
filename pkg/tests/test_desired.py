import math

import numpy as np
import pytest

from rlsfi import (
    DesiredResponse,
    Direction,
    DirectionGrid,
    build_desired_1d,
    build_desired_2d,
    great_circle_distance,
    make_uniform_grid,
    taper,
)
from rlsfi.geometry import FOUR_PI, distances_to

LOOK = Direction(90.0, 90.0)
FIVE_DEG = make_uniform_grid(5.0, 5.0, include_poles=True)


class TestTaper:
    def test_look_direction_is_one(self):
        assert taper(0.0, 20.0) == 1.0

    def test_three_db_point_at_half_beamwidth(self):
        v = taper(10.0, 20.0)
        assert v == pytest.approx(2 ** -0.5, abs=1e-12)
        assert 20 * math.log10(v) == pytest.approx(-3.01, abs=0.01)

    def test_closed_form_values(self):
        assert taper(5.0, 20.0) == pytest.approx(math.cos(math.radians(22.5)), abs=1e-12)
        assert taper(5.0, 20.0) == pytest.approx(0.92388, abs=1e-5)
        assert taper(15.0, 20.0) == pytest.approx(0.38268, abs=1e-5)
        assert taper(17.0, 20.0) == pytest.approx(0.23345, abs=1e-5)

    def test_zero_outside_support(self):
        assert taper(20.0, 20.0) == 0.0
        assert taper(175.0, 20.0) == 0.0

    def test_monotone_nonincreasing(self):
        deltas = np.linspace(0.0, 30.0, 400)
        values = taper(deltas, 20.0)
        assert np.all(np.diff(values) <= 1e-15)

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            taper(1.0, 0.0)
        with pytest.raises(ValueError):
            taper(-1.0, 20.0)


class TestDesired1D:
    def test_fig2_analogue(self):
        des = build_desired_1d(5.0, 90.0, LOOK, 20.0)
        assert des.grid.size == 72
        assert des.values[des.look_index] == 1.0
        for phi in (80.0, 100.0):
            assert des.values[des.grid.index_of(Direction(phi, 90.0))] == pytest.approx(
                0.70711, abs=1e-5
            )
        for i in range(des.grid.size):
            az = des.grid.azimuths[i]
            wrap = min(abs(az - 90.0), 360.0 - abs(az - 90.0))
            if wrap >= 20.0:
                assert des.values[i] == 0.0

    def test_wraparound_support(self):
        des = build_desired_1d(5.0, 90.0, Direction(0.0, 90.0), 20.0)
        nonzero = set(des.grid.azimuths[des.values > 0.0])
        assert nonzero == {345.0, 350.0, 355.0, 0.0, 5.0, 10.0, 15.0}

    def test_sum_invariant_under_look_rotation(self):
        base = build_desired_1d(5.0, 90.0, Direction(0.0, 90.0), 20.0).values.sum()
        for az in (35.0, 90.0, 180.0, 275.0):
            total = build_desired_1d(5.0, 90.0, Direction(az, 90.0), 20.0).values.sum()
            assert total == pytest.approx(base, abs=1e-12)

    def test_off_ring_look_rejected(self):
        with pytest.raises(ValueError):
            build_desired_1d(5.0, 90.0, Direction(90.0, 85.0), 20.0)
        with pytest.raises(ValueError):
            build_desired_1d(5.0, 90.0, Direction(92.0, 90.0), 20.0)
        with pytest.raises(ValueError):
            build_desired_1d(7.0, 90.0, LOOK, 20.0)


class TestDesired2D:
    def test_fig6_analogue_support(self):
        des = build_desired_2d(FIVE_DEG, LOOK, 20.0)
        dist = distances_to(FIVE_DEG, LOOK)
        assert np.array_equal(des.values > 0.0, dist < 20.0)
        assert des.values[des.look_index] == 1.0
        assert np.count_nonzero(des.values == 1.0) == 1

    def test_direction_at_17_degrees(self):
        # the 73-degree interferer elevation sits 17 degrees from the look
        off_plane = Direction(90.0, 73.0)
        assert great_circle_distance(LOOK, off_plane) == pytest.approx(17.0, abs=1e-12)
        assert taper(great_circle_distance(LOOK, off_plane), 20.0) == pytest.approx(0.23345, abs=1e-5)
        # nearest actual grid node on the same meridian
        des = build_desired_2d(FIVE_DEG, LOOK, 20.0)
        idx = FIVE_DEG.index_of(Direction(90.0, 75.0))
        assert des.values[idx] == pytest.approx(taper(15.0, 20.0), abs=1e-12)

    def test_degenerate_single_direction_grid(self):
        grid = DirectionGrid(np.array([90.0]), np.array([90.0]), np.array([FOUR_PI]))
        des = build_desired_2d(grid, LOOK, 20.0)
        assert np.array_equal(des.values, [1.0])

    def test_look_must_be_grid_node(self):
        with pytest.raises(ValueError):
            build_desired_2d(FIVE_DEG, Direction(92.0, 90.0), 20.0)

    def test_equatorial_symmetry(self):
        des = build_desired_2d(FIVE_DEG, LOOK, 20.0)
        for delta in (5.0, 10.0, 15.0):
            lo = des.values[FIVE_DEG.index_of(Direction(90.0 - delta, 90.0))]
            hi = des.values[FIVE_DEG.index_of(Direction(90.0 + delta, 90.0))]
            assert lo == pytest.approx(hi, abs=1e-12)

    def test_support_bound(self):
        des = build_desired_2d(FIVE_DEG, LOOK, 20.0)
        dist = distances_to(FIVE_DEG, LOOK)
        assert np.all(dist[des.values > 0.0] <= 20.0)

    def test_monotone_decay_along_rays(self):
        des = build_desired_2d(FIVE_DEG, LOOK, 20.0)
        # along the meridian phi = 90 and along the equator theta = 90
        meridian = np.flatnonzero(FIVE_DEG.azimuths == 90.0)
        order = np.argsort(np.abs(FIVE_DEG.elevations[meridian] - 90.0))
        ray = des.values[meridian][order]
        dist = np.abs(FIVE_DEG.elevations[meridian][order] - 90.0)
        for a in range(len(ray) - 1):
            if dist[a + 1] >= dist[a]:
                assert ray[a + 1] <= ray[a] + 1e-12


class TestDesiredResponseType:
    def test_invariants(self):
        grid = make_uniform_grid(90.0, 90.0)
        values = np.zeros(grid.size)
        with pytest.raises(ValueError):
            DesiredResponse(grid, values, 0)  # look value not 1
        values[0] = 1.0
        values[1] = 1.5
        with pytest.raises(ValueError):
            DesiredResponse(grid, values, 0)  # out of range
