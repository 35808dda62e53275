"""
Shared fixtures: canned buildings, their truth voxel maps and seeded generators.
"""

import numpy as np
import pytest

from multifloor.synth.building import (
    five_floor_building,
    generate_building,
    hall_building,
    two_floor_building,
)

FLOOR_HEIGHT = 3.64


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def two_floor():
    spec = two_floor_building()
    geometry, voxel_map = generate_building(spec)
    return spec, geometry, voxel_map


@pytest.fixture(scope="session")
def five_floor():
    spec = five_floor_building()
    geometry, voxel_map = generate_building(spec)
    return spec, geometry, voxel_map


@pytest.fixture(scope="session")
def hall():
    spec = hall_building(2)
    geometry, _ = generate_building(spec)
    return spec, geometry


def elevator_ride_route(floors: int, x_start: float = 12.0, x_end: float = 20.0):
    """
    Route through hall_building(floors): walk to the cab, ride up one floor at
    a time, walk along the top floor, ride back down one floor at a time.
    """
    cab_x, y = 15.75, 1.35
    top = (floors - 1) * FLOOR_HEIGHT
    route = [(x_start, y, 0.0), (cab_x, y, 0.0)]
    route += [(cab_x, y, f * FLOOR_HEIGHT) for f in range(1, floors)]
    route += [(x_end, y, top), (cab_x, y, top)]
    route += [(cab_x, y, f * FLOOR_HEIGHT) for f in range(floors - 2, -1, -1)]
    route += [(x_start, y, 0.0)]
    return route


@pytest.fixture
def ride_route():
    return elevator_ride_route
