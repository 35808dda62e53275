"""
Elevator-Aware Planner

A* over the voxel set S with time costs:
- walking and stair moves: center distance / v_rbt
- boarding an elevator: waiting time |z_cab - z_boarding| / v_elv, paid once
- riding: one voxel of height per step, resolution / v_elv
- alighting: free (the next walking move leaves the cab)

The heuristic is the elevator estimate (waiting + operating time) on
elevator voxels and straight-line walking time elsewhere. Waiting is charged
in g at boarding; the RIDING mode zeroes it in h.
"""

import heapq
import itertools
import logging
from collections import deque
from enum import Enum
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Set, Tuple

import numpy as np
from pydantic import BaseModel, Field

from ..config import PlanConfig
from ..errors import InvalidInputError, SizeLimitError, UnreachableError
from ..models import Index3, MoveMode, Point3, VoxelClass
from .voxel import ElevatorInfo, VoxelMap

logger = logging.getLogger(__name__)

MAX_ORDERED_DESTINATIONS = 8

NEIGHBOR_OFFSETS = sorted(
    offset for offset in itertools.product((-1, 0, 1), repeat=3) if offset != (0, 0, 0)
)


class Mode(str, Enum):
    WALKING = "walking"
    RIDING = "riding"


class SearchState(NamedTuple):
    """Voxel plus whether the robot is inside a cab (and which one)."""
    idx: Index3
    mode: Mode = Mode.WALKING
    elevator: str = ""


class Waypoint(BaseModel):
    position: Point3
    index: Index3
    time: float
    mode: MoveMode
    leg: int = 0


class Trajectory(BaseModel):
    """
    Time-stamped voxel-center waypoints.

    legs holds inclusive (first, last) waypoint positions per destination leg.
    A WAIT waypoint repeats the boarding voxel with the time after waiting.
    """
    waypoints: List[Waypoint] = Field(default_factory=list)
    total_time: float = 0.0
    legs: List[Tuple[int, int]] = Field(default_factory=list)
    elevator_final_z: Dict[str, float] = Field(default_factory=dict)

    def modes(self) -> Set[MoveMode]:
        return {w.mode for w in self.waypoints}

    def leg_modes(self) -> List[Set[MoveMode]]:
        return [{w.mode for w in self.waypoints[a:b + 1]} for a, b in self.legs]

    def leg_times(self) -> List[float]:
        return [self.waypoints[b].time - self.waypoints[a].time for a, b in self.legs]


# ============================================
# MOVES
# ============================================

def _add(idx: Index3, offset: Tuple[int, int, int]) -> Index3:
    return (idx[0] + offset[0], idx[1] + offset[1], idx[2] + offset[2])


def accessible(voxel_map: VoxelMap, source: Index3, target: Index3) -> bool:
    """
    Whether the robot can move from one voxel to a neighboring one.

    Rules:
    - target must be in S and at Chebyshev distance 1
    - pure vertical moves only inside one elevator column
    - moves changing both height and position need a STAIR endpoint
    - diagonal horizontal motion must not cut a corner outside S

    Raises:
        InvalidInputError: source not in S
    """
    source, target = tuple(source), tuple(target)
    source_cls = voxel_map.voxel_class(source)
    if source_cls is None:
        raise InvalidInputError(f"voxel {source} is not traversable")
    target_cls = voxel_map.voxel_class(target)
    if target_cls is None:
        return False
    dx, dy, dz = (target[a] - source[a] for a in range(3))
    if max(abs(dx), abs(dy), abs(dz)) != 1:
        return False

    if dx == 0 and dy == 0:
        return source_cls == VoxelClass.ELEVATOR and target_cls == VoxelClass.ELEVATOR
    if dz != 0 and VoxelClass.STAIR not in (source_cls, target_cls):
        return False
    if dx != 0 and dy != 0:
        levels = {source[2], target[2]}
        for corner in ((source[0] + dx, source[1]), (source[0], source[1] + dy)):
            if not any(voxel_map.contains((corner[0], corner[1], k)) for k in levels):
                return False
    return True


def _move_mode(voxel_map: VoxelMap, source: Index3, target: Index3) -> MoveMode:
    if source[2] != target[2] or VoxelClass.STAIR in (voxel_map.voxel_class(source), voxel_map.voxel_class(target)):
        return MoveMode.STAIR
    return MoveMode.WALK


def _distance(voxel_map: VoxelMap, a: Index3, b: Index3) -> float:
    return float(np.linalg.norm(np.subtract(voxel_map.index_to_world(a), voxel_map.index_to_world(b))))


def cab_z(voxel_map: VoxelMap, elevator: ElevatorInfo, elevator_z: Dict[str, float]) -> float:
    """Cab position snapped to the center of a voxel in its column."""
    z = elevator_z.get(elevator.id, elevator.initial_z)
    k = voxel_map.world_to_index((0.0, 0.0, z))[2]
    k = min(max(k, elevator.k_min), elevator.k_max)
    return voxel_map.index_to_world((*elevator.column, k))[2]


def _elevator_state(voxel_map: VoxelMap, cfg: PlanConfig, elevator_z: Optional[Dict[str, float]]) -> Dict[str, float]:
    state = {e.id: e.initial_z for e in voxel_map.elevators}
    state.update(cfg.elevator_z)
    if elevator_z:
        state.update(elevator_z)
    unknown = set(state) - {e.id for e in voxel_map.elevators}
    if unknown:
        raise InvalidInputError(f"unknown elevators: {sorted(unknown)}")
    return state


def heuristic(
    state: SearchState,
    goal: Index3,
    voxel_map: VoxelMap,
    cfg: PlanConfig,
    elevator_z: Optional[Dict[str, float]] = None,
) -> float:
    """
    Estimated remaining time in seconds.

    On an elevator voxel: waiting time (zero once riding) plus the ride from
    the current height to the goal height. Elsewhere: straight-line distance
    to the goal at walking speed.
    """
    current = voxel_map.index_to_world(state.idx)
    target = voxel_map.index_to_world(goal)
    if voxel_map.voxel_class(state.idx) == VoxelClass.ELEVATOR:
        elevator = voxel_map.elevator_at(state.idx[:2])
        waiting = 0.0
        if state.mode == Mode.WALKING:
            z_cab = cab_z(voxel_map, elevator, elevator_z or {})
            waiting = abs(z_cab - current[2]) / cfg.v_elv
        operating = abs(target[2] - current[2]) / cfg.v_elv
        return waiting + operating
    return float(np.linalg.norm(np.subtract(target, current))) / cfg.v_rbt


def _component_size(voxel_map: VoxelMap, seed: Index3) -> int:
    seen = {seed}
    queue = deque([seed])
    while queue:
        idx = queue.popleft()
        for offset in NEIGHBOR_OFFSETS:
            nxt = _add(idx, offset)
            if nxt not in seen and accessible(voxel_map, idx, nxt):
                seen.add(nxt)
                queue.append(nxt)
    return len(seen)


def _successors(
    voxel_map: VoxelMap,
    state: SearchState,
    cfg: PlanConfig,
    elevator_z: Dict[str, float],
) -> Iterable[Tuple[SearchState, float, MoveMode]]:
    idx = state.idx
    cls = voxel_map.voxel_class(idx)

    if cls == VoxelClass.ELEVATOR:
        elevator = voxel_map.elevator_at(idx[:2])
        if state.mode == Mode.WALKING:
            waiting = abs(cab_z(voxel_map, elevator, elevator_z) - voxel_map.index_to_world(idx)[2]) / cfg.v_elv
            yield SearchState(idx, Mode.RIDING, elevator.id), waiting, MoveMode.WAIT
        else:
            for dz in (-1, 1):
                above = (idx[0], idx[1], idx[2] + dz)
                if accessible(voxel_map, idx, above):
                    yield SearchState(above, Mode.RIDING, elevator.id), voxel_map.resolution / cfg.v_elv, MoveMode.ELEV

    for offset in NEIGHBOR_OFFSETS:
        if offset[0] == 0 and offset[1] == 0:
            continue
        nxt = _add(idx, offset)
        if accessible(voxel_map, idx, nxt):
            yield SearchState(nxt), _distance(voxel_map, idx, nxt) / cfg.v_rbt, _move_mode(voxel_map, idx, nxt)


def _state_key(state: SearchState) -> Tuple:
    return (*state.idx, 0 if state.mode == Mode.WALKING else 1, state.elevator)


def astar(
    voxel_map: VoxelMap,
    start: Index3,
    goal: Index3,
    cfg: Optional[PlanConfig] = None,
    elevator_z: Optional[Dict[str, float]] = None,
) -> Trajectory:
    """
    Fastest route between two voxels of S.

    Best-first on f = g + h; ties go to the smaller h, then the smaller state
    in lexicographic order. States may be re-expanded when a cheaper g turns up.

    Args:
        elevator_z: Cab positions by elevator id; overrides cfg and map metadata

    Raises:
        InvalidInputError: start or goal outside S
        UnreachableError: no route
    """
    cfg = cfg or PlanConfig()
    start, goal = tuple(start), tuple(goal)
    for name, idx in (("start", start), ("goal", goal)):
        if not voxel_map.contains(idx):
            raise InvalidInputError(f"{name} voxel {idx} is not in S")
    cabs = _elevator_state(voxel_map, cfg, elevator_z)

    initial = SearchState(start)
    best_g: Dict[SearchState, float] = {initial: 0.0}
    parents: Dict[SearchState, Tuple[SearchState, MoveMode]] = {}
    h0 = heuristic(initial, goal, voxel_map, cfg, cabs)
    frontier = [(h0, h0, _state_key(initial), 0.0, initial)]
    expansions = 0

    while frontier:
        _, _, _, g, state = heapq.heappop(frontier)
        if g > best_g.get(state, float("inf")):
            continue
        if state.idx == goal:
            logger.debug(f"A* reached {goal} after {expansions} expansions")
            return _build_trajectory(voxel_map, state, parents, best_g)
        expansions += 1
        for nxt, cost, move in _successors(voxel_map, state, cfg, cabs):
            g_next = g + cost
            if g_next < best_g.get(nxt, float("inf")):
                best_g[nxt] = g_next
                parents[nxt] = (state, move)
                h = heuristic(nxt, goal, voxel_map, cfg, cabs)
                heapq.heappush(frontier, (g_next + h, h, _state_key(nxt), g_next, nxt))

    raise UnreachableError(
        start, goal,
        start_component=_component_size(voxel_map, start),
        goal_component=_component_size(voxel_map, goal),
    )


def _build_trajectory(
    voxel_map: VoxelMap,
    end: SearchState,
    parents: Dict[SearchState, Tuple[SearchState, MoveMode]],
    best_g: Dict[SearchState, float],
) -> Trajectory:
    chain = [(end, MoveMode.WALK)]
    while chain[-1][0] in parents:
        previous, move = parents[chain[-1][0]]
        chain[-1] = (chain[-1][0], move)
        chain.append((previous, MoveMode.WALK))
    chain.reverse()

    waypoints = []
    final_z: Dict[str, float] = {}
    for state, move in chain:
        position = voxel_map.index_to_world(state.idx)
        waypoints.append(Waypoint(position=position, index=state.idx, time=best_g[state], mode=move))
        if state.mode == Mode.RIDING:
            final_z[state.elevator] = position[2]
    return Trajectory(
        waypoints=waypoints,
        total_time=best_g[end],
        legs=[(0, len(waypoints) - 1)],
        elevator_final_z=final_z,
    )


# ============================================
# MULTI-DESTINATION
# ============================================

def plan_multi(
    voxel_map: VoxelMap,
    waypoints: Sequence[Index3],
    return_to_start: bool = False,
    cfg: Optional[PlanConfig] = None,
    elevator_z: Optional[Dict[str, float]] = None,
) -> Trajectory:
    """
    Chains A* legs through the waypoints in the given order.

    After a leg that rides an elevator, that cab stays where the robot got
    off for every later leg. Times are cumulative across legs.

    Raises:
        InvalidInputError: fewer than two waypoints
        UnreachableError: a leg has no route (leg number attached)
    """
    cfg = cfg or PlanConfig()
    stops = [tuple(w) for w in waypoints]
    if len(stops) < 2:
        raise InvalidInputError("at least two waypoints are required")
    if return_to_start:
        stops.append(stops[0])
    cabs = _elevator_state(voxel_map, cfg, elevator_z)

    chained = Trajectory()
    elapsed = 0.0
    for leg, (a, b) in enumerate(zip(stops[:-1], stops[1:])):
        try:
            part = astar(voxel_map, a, b, cfg, cabs)
        except UnreachableError as e:
            raise UnreachableError(a, b, leg=leg, start_component=e.start_component, goal_component=e.goal_component) from e
        cabs.update(part.elevator_final_z)
        chained.elevator_final_z.update(part.elevator_final_z)

        first = len(chained.waypoints) - 1 if chained.waypoints else 0
        points = part.waypoints if not chained.waypoints else part.waypoints[1:]
        for w in points:
            chained.waypoints.append(w.model_copy(update={"time": w.time + elapsed, "leg": leg}))
        chained.legs.append((first, len(chained.waypoints) - 1))
        elapsed += part.total_time
        logger.info(f"Leg {leg}: {a} -> {b} in {part.total_time:.2f} s via {sorted(m.value for m in part.modes())}")

    chained.total_time = elapsed
    return chained


def order_destinations(
    voxel_map: VoxelMap,
    start: Index3,
    destinations: Iterable[Index3],
    cfg: Optional[PlanConfig] = None,
    elevator_z: Optional[Dict[str, float]] = None,
) -> List[Index3]:
    """
    Visiting order with the smallest total time (exhaustive, at most 8 stops).

    Permutations are explored in lexicographic order with branch-and-bound, so
    the first optimal order in that order wins ties. Leg costs include elevator
    state propagation.

    Raises:
        SizeLimitError: more than 8 destinations
        UnreachableError: no order visits every destination
    """
    cfg = cfg or PlanConfig()
    targets = sorted({tuple(d) for d in destinations})
    if len(targets) > MAX_ORDERED_DESTINATIONS:
        raise SizeLimitError(f"at most {MAX_ORDERED_DESTINATIONS} destinations can be ordered, got {len(targets)}")
    if not targets:
        return []
    cabs = _elevator_state(voxel_map, cfg, elevator_z)
    cache: Dict[Tuple, Optional[Trajectory]] = {}

    def leg(a: Index3, b: Index3, state: Dict[str, float]) -> Optional[Trajectory]:
        key = (a, b, tuple(sorted(state.items())))
        if key not in cache:
            try:
                cache[key] = astar(voxel_map, a, b, cfg, state)
            except UnreachableError:
                cache[key] = None
        return cache[key]

    best_order: Optional[List[Index3]] = None
    best_time = float("inf")

    def search(position: Index3, remaining: List[Index3], state: Dict[str, float], elapsed: float, order: List[Index3]) -> None:
        nonlocal best_order, best_time
        if not remaining:
            if elapsed < best_time:
                best_time, best_order = elapsed, list(order)
            return
        for n, target in enumerate(remaining):
            part = leg(position, target, state)
            if part is None or elapsed + part.total_time >= best_time:
                continue
            search(
                target,
                remaining[:n] + remaining[n + 1:],
                {**state, **part.elevator_final_z},
                elapsed + part.total_time,
                order + [target],
            )

    search(tuple(start), targets, cabs, 0.0, [])
    if best_order is None:
        raise UnreachableError(tuple(start), targets[0])
    logger.info(f"Best order of {len(targets)} destinations takes {best_time:.2f} s")
    return best_order
