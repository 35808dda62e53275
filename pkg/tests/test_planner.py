"""
Tests for the accessibility rules, elevator-aware A* and multi-destination planning.
"""

import heapq

import numpy as np
import pytest

from multifloor.config import PlanConfig
from multifloor.errors import InvalidInputError, SizeLimitError, UnreachableError
from multifloor.models import MoveMode, VoxelClass
from multifloor.planning.planner import (
    NEIGHBOR_OFFSETS,
    Mode,
    SearchState,
    accessible,
    astar,
    heuristic,
    order_destinations,
    plan_multi,
)
from multifloor.planning.voxel import ElevatorInfo, VoxelMap

C, S, E = VoxelClass.CORRIDOR, VoxelClass.STAIR, VoxelClass.ELEVATOR

START = (2, 3, 0)    # (0.75, 1.05, 0) on floor 0
GOAL = (13, 3, 12)   # (4.05, 1.05, 3.64) on floor 1


def _map(occupied, elevators=()):
    return VoxelMap(occupied=dict(occupied), elevators=list(elevators))


# ============================================
# ACCESSIBILITY
# ============================================

def test_pure_vertical_only_inside_elevator():
    elevator = ElevatorInfo(id="e0", column=(5, 5), k_min=0, k_max=1, initial_z=0.15)
    voxel_map = _map(
        {(0, 0, 0): C, (0, 0, 1): C, (0, 1, 0): S, (0, 1, 1): S, (5, 5, 0): E, (5, 5, 1): E},
        [elevator],
    )
    assert not accessible(voxel_map, (0, 0, 0), (0, 0, 1))
    assert not accessible(voxel_map, (0, 1, 0), (0, 1, 1))
    assert accessible(voxel_map, (5, 5, 0), (5, 5, 1))
    assert accessible(voxel_map, (5, 5, 1), (5, 5, 0))


def test_height_change_needs_stair():
    voxel_map = _map({(0, 0, 0): C, (1, 0, 1): C, (1, 1, 1): S})
    assert not accessible(voxel_map, (0, 0, 0), (1, 0, 1))
    voxel_map = _map({(0, 0, 0): C, (1, 0, 1): S})
    assert accessible(voxel_map, (0, 0, 0), (1, 0, 1))
    assert accessible(voxel_map, (1, 0, 1), (0, 0, 0))


def test_diagonal_cannot_cut_corners():
    voxel_map = _map({(0, 0, 0): C, (1, 1, 0): C})
    assert not accessible(voxel_map, (0, 0, 0), (1, 1, 0))
    voxel_map = _map({(0, 0, 0): C, (1, 1, 0): C, (1, 0, 0): C})
    assert not accessible(voxel_map, (0, 0, 0), (1, 1, 0))
    voxel_map = _map({(0, 0, 0): C, (1, 1, 0): C, (1, 0, 0): C, (0, 1, 0): C})
    assert accessible(voxel_map, (0, 0, 0), (1, 1, 0))


def test_climbing_diagonal_cannot_cut_corners():
    """A stair move across a corner needs both side columns open at the source or target level"""
    assert not accessible(_map({(0, 0, 0): C, (1, 1, 1): S}), (0, 0, 0), (1, 1, 1))
    assert not accessible(_map({(0, 0, 0): C, (1, 1, 1): S, (1, 0, 0): C}), (0, 0, 0), (1, 1, 1))
    # A voxel far above the move does not open the corner
    assert not accessible(_map({(0, 0, 0): C, (1, 1, 1): S, (1, 0, 0): C, (0, 1, 7): C}), (0, 0, 0), (1, 1, 1))
    assert accessible(_map({(0, 0, 0): C, (1, 1, 1): S, (1, 0, 0): C, (0, 1, 1): S}), (0, 0, 0), (1, 1, 1))
    assert accessible(_map({(0, 0, 0): C, (1, 1, 1): S, (1, 0, 0): C, (0, 1, 1): S}), (1, 1, 1), (0, 0, 0))


def test_only_neighbors_in_s():
    voxel_map = _map({(0, 0, 0): C, (2, 0, 0): C})
    assert not accessible(voxel_map, (0, 0, 0), (2, 0, 0))
    assert not accessible(voxel_map, (0, 0, 0), (1, 0, 0))
    with pytest.raises(InvalidInputError):
        accessible(voxel_map, (1, 0, 0), (0, 0, 0))


# ============================================
# HEURISTIC
# ============================================

def test_heuristic_on_elevator_voxel(two_floor):
    """Waiting counts only before boarding"""
    _, _, voxel_map = two_floor
    cfg = PlanConfig()
    boarding = (7, 3, 0)
    cabs = {"e0": 3.64}
    walking = heuristic(SearchState(boarding), GOAL, voxel_map, cfg, cabs)
    riding = heuristic(SearchState(boarding, Mode.RIDING, "e0"), GOAL, voxel_map, cfg, cabs)
    assert walking == pytest.approx(3.6 + 3.6)
    assert riding == pytest.approx(3.6)


def test_heuristic_off_elevator_is_walking_time(two_floor):
    _, _, voxel_map = two_floor
    h = heuristic(SearchState(START), (12, 3, 0), voxel_map, PlanConfig(v_rbt=2.0))
    assert h == pytest.approx(10 * 0.3 / 2.0)


# ============================================
# SINGLE ROUTE
# ============================================

def test_cab_waiting_below_takes_elevator(two_floor):
    """Cab on the start floor: riding beats the stairs"""
    _, _, voxel_map = two_floor
    trajectory = astar(voxel_map, START, GOAL, elevator_z={"e0": 0.0})
    assert MoveMode.ELEV in trajectory.modes()
    assert MoveMode.WAIT in trajectory.modes()
    assert trajectory.total_time == pytest.approx(6.9, abs=1e-6)
    assert trajectory.waypoints[0].index == START
    assert trajectory.waypoints[-1].index == GOAL
    assert trajectory.elevator_final_z == {"e0": pytest.approx(3.75)}


def test_cab_waiting_above_takes_stairs(two_floor):
    """Cab on the goal floor: waiting makes the stairs faster"""
    _, _, voxel_map = two_floor
    trajectory = astar(voxel_map, START, GOAL, elevator_z={"e0": 3.64})
    assert MoveMode.STAIR in trajectory.modes()
    assert MoveMode.ELEV not in trajectory.modes()
    assert trajectory.total_time < 10.5
    assert trajectory.elevator_final_z == {}


def test_waypoint_times_increase(two_floor):
    _, _, voxel_map = two_floor
    trajectory = astar(voxel_map, START, GOAL, elevator_z={"e0": 0.0})
    times = [w.time for w in trajectory.waypoints]
    assert times[0] == 0.0
    assert all(b >= a for a, b in zip(times, times[1:]))


def test_endpoints_must_be_in_s(two_floor):
    _, _, voxel_map = two_floor
    with pytest.raises(InvalidInputError):
        astar(voxel_map, (0, 0, 5), GOAL)


def test_unknown_elevator_rejected(two_floor):
    _, _, voxel_map = two_floor
    with pytest.raises(InvalidInputError):
        astar(voxel_map, START, GOAL, elevator_z={"e7": 0.0})


def test_unreachable_reports_components():
    voxel_map = _map({(0, 0, 0): C, (1, 0, 0): C, (5, 5, 0): C})
    with pytest.raises(UnreachableError) as excinfo:
        astar(voxel_map, (0, 0, 0), (5, 5, 0))
    assert excinfo.value.start_component == 2
    assert excinfo.value.goal_component == 1
    assert excinfo.value.exit_code == 4


def _dijkstra(voxel_map: VoxelMap, start, goal, v_rbt: float):
    best = {start: 0.0}
    frontier = [(0.0, start)]
    while frontier:
        g, idx = heapq.heappop(frontier)
        if idx == goal:
            return g
        if g > best[idx]:
            continue
        for offset in NEIGHBOR_OFFSETS:
            nxt = (idx[0] + offset[0], idx[1] + offset[1], idx[2] + offset[2])
            if accessible(voxel_map, idx, nxt):
                cost = g + voxel_map.resolution * float(np.linalg.norm(offset)) / v_rbt
                if cost < best.get(nxt, float("inf")):
                    best[nxt] = cost
                    heapq.heappush(frontier, (cost, nxt))
    return None


def _random_stair_map(rng) -> VoxelMap:
    """Two patchy levels joined by a two-voxel stair."""
    occupied = {}
    for k in (0, 3):
        for i, j in zip(*np.nonzero(rng.random((8, 8)) < 0.7)):
            occupied[(int(i), int(j), k)] = C
    row = int(rng.integers(0, 8))
    x0 = int(rng.integers(1, 5))
    occupied[(x0 - 1, row, 0)] = C
    occupied[(x0, row, 1)] = S
    occupied[(x0 + 1, row, 2)] = S
    occupied[(x0 + 2, row, 3)] = C
    return _map(occupied)


def test_astar_matches_dijkstra_on_random_maps():
    """Without elevators A* times equal a plain shortest-path search"""
    rng = np.random.default_rng(2024)
    cfg = PlanConfig(v_rbt=1.5)
    for _ in range(20):
        voxel_map = _random_stair_map(rng)
        voxels = sorted(voxel_map.occupied)
        for _ in range(5):
            start = voxels[int(rng.integers(len(voxels)))]
            goal = voxels[int(rng.integers(len(voxels)))]
            expected = _dijkstra(voxel_map, start, goal, cfg.v_rbt)
            if expected is None:
                with pytest.raises(UnreachableError):
                    astar(voxel_map, start, goal, cfg)
            else:
                # Equal-time paths may add the same edge times in another order:
                # a few ulps per move, far under 1e-12 relative on these short paths
                assert astar(voxel_map, start, goal, cfg).total_time == pytest.approx(expected, rel=1e-12, abs=1e-12)


# ============================================
# MULTI-DESTINATION
# ============================================

def test_cab_stays_where_the_robot_left_it(two_floor):
    """The return leg boards a cab already waiting on the upper floor"""
    _, _, voxel_map = two_floor
    trajectory = plan_multi(voxel_map, [START, GOAL], return_to_start=True, elevator_z={"e0": 0.0})
    assert len(trajectory.legs) == 2
    assert all(MoveMode.ELEV in modes for modes in trajectory.leg_modes())
    assert trajectory.leg_times() == [pytest.approx(6.9), pytest.approx(6.9)]
    assert trajectory.total_time == pytest.approx(13.8)
    assert trajectory.elevator_final_z == {"e0": pytest.approx(0.15)}
    assert trajectory.waypoints[-1].index == START
    assert {w.leg for w in trajectory.waypoints} == {0, 1}


def test_five_floor_tour(five_floor):
    """Stairs between neighboring floors, elevator for the long climb"""
    _, _, voxel_map = five_floor
    height = 3.64
    a = voxel_map.world_to_index((0.75, 3.45, 4 * height))
    b = voxel_map.world_to_index((6.6, 3.45, 3 * height))
    c = voxel_map.world_to_index((0.75, 1.05, 0.0))
    assert all(voxel_map.contains(v) for v in (a, b, c))

    trajectory = plan_multi(voxel_map, [a, b, c], return_to_start=True)
    leg_modes = trajectory.leg_modes()
    assert len(leg_modes) == 3
    assert MoveMode.STAIR in leg_modes[0] and MoveMode.ELEV not in leg_modes[0]
    assert MoveMode.ELEV in leg_modes[2]
    assert trajectory.waypoints[-1].index == a
    times = [w.time for w in trajectory.waypoints]
    assert all(later >= earlier for earlier, later in zip(times, times[1:]))
    assert trajectory.total_time == pytest.approx(sum(trajectory.leg_times()))


def test_plan_multi_needs_two_waypoints(two_floor):
    _, _, voxel_map = two_floor
    with pytest.raises(InvalidInputError):
        plan_multi(voxel_map, [START])


def test_unreachable_leg_is_numbered():
    voxel_map = _map({(0, 0, 0): C, (1, 0, 0): C, (5, 5, 0): C})
    with pytest.raises(UnreachableError) as excinfo:
        plan_multi(voxel_map, [(0, 0, 0), (1, 0, 0), (5, 5, 0)])
    assert excinfo.value.leg == 1


def test_order_destinations_picks_fastest(two_floor):
    _, _, voxel_map = two_floor
    order = order_destinations(voxel_map, START, [(20, 3, 0), (10, 3, 0)])
    assert order == [(10, 3, 0), (20, 3, 0)]


def test_order_destinations_size_limit(two_floor):
    _, _, voxel_map = two_floor
    destinations = [(i, 3, 0) for i in range(10, 19)]
    with pytest.raises(SizeLimitError):
        order_destinations(voxel_map, START, destinations)
