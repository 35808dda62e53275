"""
Voxel Map

The traversable voxel set S used by the planner:
- CORRIDOR: bottoms of corridors, from ground-channel points
- STAIR: the n_z best-populated voxels of each column among the remaining points
- ELEVATOR: one vertical stack per synthesized elevator shell
"""

import logging
from collections import defaultdict
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator
from scipy import ndimage

from ..config import VoxelizeConfig
from ..errors import InvalidInputError
from ..models import Index3, Point3, Scan, SourceClass, VoxelClass

logger = logging.getLogger(__name__)


class ElevatorInfo(BaseModel):
    """One elevator stack: its column, vertical extent and the cab's current z."""
    id: str
    column: Tuple[int, int]
    k_min: int
    k_max: int
    initial_z: float

    @model_validator(mode="after")
    def _ordered(self) -> "ElevatorInfo":
        if self.k_min >= self.k_max:
            raise ValueError(f"elevator {self.id}: k_min must be below k_max")
        return self


class VoxelMap(BaseModel):
    """Set S of traversable voxels with class tags."""
    resolution: float = 0.3
    origin: Point3 = (0.0, 0.0, 0.0)
    occupied: Dict[Index3, VoxelClass] = Field(default_factory=dict)
    elevators: List[ElevatorInfo] = Field(default_factory=list)

    @model_validator(mode="after")
    def _consistent(self) -> "VoxelMap":
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        columns = {e.column for e in self.elevators}
        for (i, j, k), cls in self.occupied.items():
            if cls == VoxelClass.ELEVATOR and (i, j) not in columns:
                raise ValueError(f"elevator voxel {(i, j, k)} has no elevator column")
        for e in self.elevators:
            for k in range(e.k_min, e.k_max + 1):
                if self.occupied.get((*e.column, k)) != VoxelClass.ELEVATOR:
                    raise ValueError(f"elevator {e.id} column is missing voxel k={k}")
        return self

    def contains(self, idx: Index3) -> bool:
        return tuple(idx) in self.occupied

    def voxel_class(self, idx: Index3) -> Optional[VoxelClass]:
        return self.occupied.get(tuple(idx))

    def world_to_index(self, point: Sequence[float]) -> Index3:
        rel = (np.asarray(point, dtype=float) - np.asarray(self.origin)) / self.resolution
        i, j, k = np.floor(rel).astype(int)
        return int(i), int(j), int(k)

    def index_to_world(self, idx: Index3) -> Point3:
        """Center of a voxel."""
        center = np.asarray(self.origin) + (np.asarray(idx, dtype=float) + 0.5) * self.resolution
        return float(center[0]), float(center[1]), float(center[2])

    def elevator_at(self, column: Tuple[int, int]) -> Optional[ElevatorInfo]:
        for elevator in self.elevators:
            if elevator.column == tuple(column):
                return elevator
        return None

    def elevator_by_id(self, elevator_id: str) -> ElevatorInfo:
        for elevator in self.elevators:
            if elevator.id == elevator_id:
                return elevator
        raise InvalidInputError(f"unknown elevator '{elevator_id}'")

    def counts(self) -> Dict[VoxelClass, int]:
        totals = {cls: 0 for cls in VoxelClass}
        for cls in self.occupied.values():
            totals[cls] += 1
        return totals


def contains(voxel_map: VoxelMap, idx: Index3) -> bool:
    return voxel_map.contains(idx)


def extract_ground(scan: Scan, max_ground_channel: int) -> np.ndarray:
    """Points whose ring index is at most max_ground_channel (sensor parallel to the floor)."""
    return scan.points[scan.channels <= max_ground_channel]


def _azimuth_gap(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.abs((a - b + np.pi) % (2.0 * np.pi) - np.pi)


def extract_step_tops(scan: Scan, sensor_height: float, cfg: VoxelizeConfig) -> np.ndarray:
    """
    Mask of non-ground points lying on a raised horizontal surface.

    A candidate sits below the sensor, at least cfg.min_step_rise above the
    robot's own floor and within cfg.max_step_range of it. It is a step top
    when the next steeper ring at the same azimuth lands closer to the robot.
    A return at the same horizontal range means a vertical face such as a wall.
    With 2 degree rings and the default settings, the lowest ring that still
    hits a wall inside max_step_range lands under min_step_rise.

    Returns:
        (N,) bool array over scan.points
    """
    points, channels = scan.points, scan.channels
    mask = np.zeros(len(points), dtype=bool)
    if not len(points):
        return mask

    horizontal = np.hypot(points[:, 0], points[:, 1])
    azimuth = np.arctan2(points[:, 1], points[:, 0])
    elevation = points[:, 2] + sensor_height
    candidate = (
        (channels > cfg.max_ground_channel)
        & (points[:, 2] < 0)
        & (elevation >= cfg.min_step_rise)
        & (horizontal <= cfg.max_step_range)
    )
    tolerance = np.deg2rad(cfg.azimuth_tolerance_deg)

    for channel in np.unique(channels[candidate]):
        steeper = np.flatnonzero(channels == channel - 1)
        if not len(steeper):
            continue
        rows = np.flatnonzero(candidate & (channels == channel))
        order = steeper[np.argsort(azimuth[steeper])]
        slot = np.searchsorted(azimuth[order], azimuth[rows])
        left = order[(slot - 1) % len(order)]
        right = order[slot % len(order)]
        gap_left = _azimuth_gap(azimuth[rows], azimuth[left])
        gap_right = _azimuth_gap(azimuth[rows], azimuth[right])
        partner = np.where(gap_left <= gap_right, left, right)
        found = np.minimum(gap_left, gap_right) <= tolerance
        mask[rows] = found & (horizontal[partner] < horizontal[rows] - cfg.face_tolerance)
    return mask


def _indices(points: np.ndarray, origin: np.ndarray, resolution: float) -> np.ndarray:
    return np.floor((points - origin) / resolution).astype(np.int64)


def _corridor_voxels(idx: np.ndarray) -> Iterable[Index3]:
    """
    Lowest voxel of every contiguous vertical run per column.

    Each separate run gets its own bottom so upper floors keep their
    corridors. The no-voxel-below rule therefore holds only within a run:
    a corridor voxel may sit above a lower run once an empty voxel separates
    them, never directly on top of another ground voxel.
    """
    columns: Dict[Tuple[int, int], set] = defaultdict(set)
    for i, j, k in idx:
        columns[(int(i), int(j))].add(int(k))
    for (i, j), ks in columns.items():
        previous = None
        for k in sorted(ks):
            if previous is None or k != previous + 1:
                yield (i, j, k)
            previous = k


def _stair_voxels(idx: np.ndarray, n_z: int) -> Iterable[Index3]:
    """Per column, the n_z voxels holding the most points (ties to the lower k)."""
    keys, counts = np.unique(idx, axis=0, return_counts=True)
    columns: Dict[Tuple[int, int], List[Tuple[int, int]]] = defaultdict(list)
    for (i, j, k), count in zip(keys, counts):
        columns[(int(i), int(j))].append((-int(count), int(k)))
    for (i, j), ranked in columns.items():
        for _, k in sorted(ranked)[:n_z]:
            yield (i, j, k)


def _elevator_stacks(
    points: np.ndarray, origin: np.ndarray, resolution: float, lift: float = 0.0,
) -> List[Tuple[Tuple[int, int], int, int]]:
    """Collapses each 8-connected footprint of elevator points into one column; lift raises the cab floor."""
    idx = _indices(points, origin, resolution)
    lo = idx[:, :2].min(axis=0)
    hi = idx[:, :2].max(axis=0)
    grid = np.zeros(tuple(hi - lo + 1), dtype=bool)
    grid[idx[:, 0] - lo[0], idx[:, 1] - lo[1]] = True
    labels, n_components = ndimage.label(grid, structure=np.ones((3, 3), dtype=int))
    point_labels = labels[idx[:, 0] - lo[0], idx[:, 1] - lo[1]]

    stacks = []
    for component in range(1, n_components + 1):
        members = points[point_labels == component]
        center = members[:, :2].mean(axis=0)
        i, j = np.floor((center - origin[:2]) / resolution).astype(int)
        k_min = int(np.floor((members[:, 2].min() + lift - origin[2]) / resolution))
        k_max = int(np.floor((members[:, 2].max() - origin[2]) / resolution))
        stacks.append(((int(i), int(j)), k_min, k_max))
    return sorted(stacks)


def voxelize(points: np.ndarray, sources: Sequence, cfg: VoxelizeConfig) -> VoxelMap:
    """
    Builds the traversable voxel set from a classified world-frame cloud.

    Args:
        points: (N, 3) world-frame points
        sources: SourceClass (or its string value) per point
        cfg: Resolution, origin and n_z

    Returns:
        VoxelMap with CORRIDOR, STAIR and ELEVATOR voxels

    Raises:
        InvalidInputError: empty cloud or length mismatch
    """
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    labels = np.array([SourceClass(s).value for s in sources], dtype=object)
    if len(points) == 0:
        raise InvalidInputError("cannot voxelize an empty cloud")
    if len(labels) != len(points):
        raise InvalidInputError("one source class per point is required")

    origin = np.asarray(cfg.origin, dtype=float)
    # Surfaces sitting on a voxel boundary belong to the voxel above
    lift = np.array([0.0, 0.0, cfg.surface_tolerance])
    occupied: Dict[Index3, VoxelClass] = {}

    ground = points[labels == SourceClass.GROUND.value]
    if len(ground):
        for voxel in _corridor_voxels(_indices(ground + lift, origin, cfg.resolution)):
            occupied[voxel] = VoxelClass.CORRIDOR

    other = points[labels == SourceClass.OTHER.value]
    if len(other):
        for voxel in _stair_voxels(_indices(other + lift, origin, cfg.resolution), cfg.n_z):
            occupied.setdefault(voxel, VoxelClass.STAIR)

    elevators: List[ElevatorInfo] = []
    shell = points[labels == SourceClass.ELEVATOR.value]
    if len(shell):
        for column, k_min, k_max in _elevator_stacks(shell, origin, cfg.resolution, cfg.surface_tolerance):
            if k_min >= k_max:
                logger.warning(f"Elevator shell at column {column} spans a single voxel, skipped")
                continue
            for k in range(k_min, k_max + 1):
                occupied[(*column, k)] = VoxelClass.ELEVATOR
            initial_z = float(origin[2] + (k_min + 0.5) * cfg.resolution)
            elevators.append(ElevatorInfo(
                id=f"e{len(elevators)}", column=column, k_min=k_min, k_max=k_max, initial_z=initial_z,
            ))

    voxel_map = VoxelMap(
        resolution=cfg.resolution,
        origin=tuple(float(v) for v in origin),
        occupied=occupied,
        elevators=elevators,
    )
    logger.info(f"Voxelized {len(points)} points into {len(occupied)} voxels, {len(elevators)} elevators")
    return voxel_map
