"""
Synthetic Buildings

Turns a BuildingSpec into axis-aligned surfaces (for ray-casting) and the exact
traversable voxel set those surfaces imply.

Canned buildings:
- two_floor_building: two floors, stairs and one elevator; the route flips between
  them with the cab's starting floor
- five_floor_building: the same layout stacked five floors high
- hall_building: long wide hall used for mapping sessions
- twin_floor_building: structurally identical floors for loop-detection tests
"""

import logging
from typing import Dict, List, Tuple

import numpy as np
from pydantic import BaseModel, Field
from scipy import ndimage

from ..errors import SpecValidationError
from ..models import Index3, Point3, VoxelClass
from ..planning.voxel import ElevatorInfo, VoxelMap
from ..validators.building_validator import BuildingValidator
from .layout import (
    BuildingSpec,
    CellGrid,
    CorridorRect,
    ElevatorSpec,
    StairSpec,
    level_index,
    stair_layer,
)

logger = logging.getLogger(__name__)

PILLAR_SIZE = 0.1


class Box(BaseModel):
    """Solid axis-aligned box; kind is one of floor, roof, wall, step, pillar."""
    lo: Point3
    hi: Point3
    kind: str


class BuildingGeometry(BaseModel):
    boxes: List[Box] = Field(default_factory=list)

    def bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        """(N, 3) lower corners and (N, 3) upper corners."""
        if not self.boxes:
            return np.zeros((0, 3)), np.zeros((0, 3))
        lo = np.array([b.lo for b in self.boxes], dtype=float)
        hi = np.array([b.hi for b in self.boxes], dtype=float)
        return lo, hi

    def count(self, kind: str) -> int:
        return sum(1 for b in self.boxes if b.kind == kind)


def validate_building(spec: BuildingSpec) -> None:
    """Raises SpecValidationError listing every violation."""
    result = BuildingValidator().validate(spec)
    if not result.success:
        raise SpecValidationError(result.errors)


# ============================================
# TRUTH VOXEL MAP
# ============================================

def _truth_voxels(spec: BuildingSpec, grid: CellGrid) -> VoxelMap:
    occupied: Dict[Index3, VoxelClass] = {}

    for floor in range(spec.floors):
        k = level_index(spec, floor)
        for li, lj in zip(*np.nonzero(grid.corridor_mask(floor))):
            occupied[(*grid.to_global(li, lj), k)] = VoxelClass.CORRIDOR

    if spec.stair is not None:
        columns = grid.lane_columns()
        rows = grid.lane_rows()
        for floor in range(spec.floors - 1):
            ordered = columns if spec.stair.ascends_positive(floor) else columns[::-1]
            for position, li in enumerate(ordered):
                k = stair_layer(spec, floor, position, len(ordered))
                for lj in rows:
                    occupied.setdefault((*grid.to_global(li, lj), k), VoxelClass.STAIR)

    stacks = []
    for elevator in spec.elevators:
        column = grid.to_global(*grid.local_of_xy(*elevator.center))
        served = sorted(set(elevator.served_floors))
        k_min, k_max = level_index(spec, served[0]), level_index(spec, served[-1])
        k_init = level_index(spec, elevator.initial_floor)
        stacks.append((column, k_min, k_max, (k_init + 0.5) * spec.resolution))

    elevators = []
    for n, (column, k_min, k_max, initial_z) in enumerate(sorted(stacks)):
        for k in range(k_min, k_max + 1):
            occupied[(*column, k)] = VoxelClass.ELEVATOR
        elevators.append(ElevatorInfo(id=f"e{n}", column=column, k_min=k_min, k_max=k_max, initial_z=initial_z))

    return VoxelMap(resolution=spec.resolution, origin=(0.0, 0.0, 0.0), occupied=occupied, elevators=elevators)


# ============================================
# SURFACES
# ============================================

def _mask_runs(mask: np.ndarray) -> List[Tuple[int, int, int]]:
    """(j, i_first, i_last) for every maximal run of True cells along i."""
    runs = []
    for j in range(mask.shape[1]):
        column = mask[:, j]
        i = 0
        while i < len(column):
            if column[i]:
                start = i
                while i + 1 < len(column) and column[i + 1]:
                    i += 1
                runs.append((j, start, i))
            i += 1
    return runs


def _cell_box(grid: CellGrid, j: int, i_first: int, i_last: int, z0: float, z1: float, kind: str) -> Box:
    res = grid.resolution
    x0 = (grid.i0 + i_first) * res
    x1 = (grid.i0 + i_last + 1) * res
    y0 = (grid.j0 + j) * res
    return Box(lo=(x0, y0, z0), hi=(x1, y0 + res, z1), kind=kind)


def _surfaces(spec: BuildingSpec, grid: CellGrid) -> BuildingGeometry:
    boxes: List[Box] = []
    slab = spec.slab_thickness
    lane = grid.lane_mask()

    for floor in range(spec.floors):
        z = spec.floor_z(floor)
        corridor = grid.corridor_mask(floor)
        floor_cells = corridor | lane if floor == 0 else corridor
        for j, i_first, i_last in _mask_runs(floor_cells):
            boxes.append(_cell_box(grid, j, i_first, i_last, z - slab, z, "floor"))

        walkable = corridor | lane
        walls = ndimage.binary_dilation(walkable, structure=np.ones((3, 3), dtype=bool)) & ~walkable
        for j, i_first, i_last in _mask_runs(walls):
            boxes.append(_cell_box(grid, j, i_first, i_last, z, z + spec.wall_height, "wall"))

    top = spec.floor_z(spec.floors)
    footprint = np.zeros(grid.shape, dtype=bool)
    for floor in range(spec.floors):
        footprint |= grid.corridor_mask(floor)
    for j, i_first, i_last in _mask_runs(footprint | lane):
        boxes.append(_cell_box(grid, j, i_first, i_last, top - slab, top, "roof"))

    if spec.stair is not None:
        stair = spec.stair
        rise, run = spec.step_rise(), stair.run
        for floor in range(spec.floors - 1):
            base = spec.floor_z(floor)
            for step in range(stair.steps):
                if stair.ascends_positive(floor):
                    x0, x1 = stair.x0 + step * run, stair.x0 + (step + 1) * run
                else:
                    x0, x1 = stair.x1 - (step + 1) * run, stair.x1 - step * run
                boxes.append(Box(
                    lo=(x0, stair.y0, base),
                    hi=(x1, stair.y1, base + (step + 1) * rise),
                    kind="step",
                ))

    for elevator in spec.elevators:
        served = sorted(set(elevator.served_floors))
        z0 = spec.floor_z(served[0])
        z1 = spec.floor_z(served[-1]) + spec.wall_height
        for x, y in ((elevator.x0, elevator.y0), (elevator.x1 - PILLAR_SIZE, elevator.y0),
                     (elevator.x0, elevator.y1 - PILLAR_SIZE), (elevator.x1 - PILLAR_SIZE, elevator.y1 - PILLAR_SIZE)):
            boxes.append(Box(lo=(x, y, z0), hi=(x + PILLAR_SIZE, y + PILLAR_SIZE, z1), kind="pillar"))

    return BuildingGeometry(boxes=boxes)


def generate_building(spec: BuildingSpec) -> Tuple[BuildingGeometry, VoxelMap]:
    """
    Builds the surfaces and ground-truth voxel map of a building.

    Args:
        spec: Building description

    Returns:
        (geometry of floor slabs, roof, walls, stair steps and shaft pillars,
         voxel map of corridor bottoms, stair diagonals and elevator stacks)

    Raises:
        SpecValidationError: spec breaks any building rule
    """
    validate_building(spec)
    grid = CellGrid(spec)
    voxel_map = _truth_voxels(spec, grid)
    geometry = _surfaces(spec, grid)
    counts = voxel_map.counts()
    logger.info(
        f"Generated {spec.floors}-floor building: {len(geometry.boxes)} boxes, "
        f"{counts[VoxelClass.CORRIDOR]} corridor / {counts[VoxelClass.STAIR]} stair / "
        f"{counts[VoxelClass.ELEVATOR]} elevator voxels"
    )
    return geometry, voxel_map


def floor_surface_points(spec: BuildingSpec) -> np.ndarray:
    """One point per corridor cell center on every floor surface."""
    grid = CellGrid(spec)
    points = []
    for floor in range(spec.floors):
        for li, lj in zip(*np.nonzero(grid.corridor_mask(floor))):
            x, y = grid.cell_center(li, lj)
            points.append((x, y, spec.floor_z(floor)))
    return np.array(points, dtype=float).reshape(-1, 3)


# ============================================
# CANNED BUILDINGS
# ============================================

def _stairwell_layout(floors: int, served: List[int]) -> BuildingSpec:
    return BuildingSpec(
        floors=floors,
        corridors=[
            CorridorRect(x0=0.0, y0=0.0, x1=7.5, y1=2.4),
            CorridorRect(x0=0.0, y0=2.4, x1=1.8, y1=4.2),
            CorridorRect(x0=5.7, y0=2.4, x1=7.5, y1=4.2),
        ],
        stair=StairSpec(x0=1.8, y0=2.4, x1=5.7, y1=4.2, steps=12),
        elevators=[ElevatorSpec(x0=1.5, y0=0.3, x1=3.0, y1=1.8, served_floors=served, initial_floor=0)],
    )


def two_floor_building() -> BuildingSpec:
    """
    Two floors joined by a 12-step stair and one elevator.

    Start (0.75, 1.05) on floor 0 and goal (4.05, 1.05) on floor 1: with the cab
    waiting on floor 0 the elevator wins, with the cab on floor 1 the stairs do.
    """
    return _stairwell_layout(2, [0, 1])


def five_floor_building() -> BuildingSpec:
    """The two-floor layout stacked five floors high, elevator serving all of them."""
    return _stairwell_layout(5, [0, 1, 2, 3, 4])


def hall_building(floors: int = 2) -> BuildingSpec:
    """
    24 m x 3 m hall with a stair lane along its side and an elevator at x = 15.75.

    Wide enough that scans anywhere outside the cab have a mean squared range
    well above the in-cab threshold.
    """
    served = list(range(floors)) if floors > 1 else []
    return BuildingSpec(
        floors=floors,
        corridors=[
            CorridorRect(x0=0.0, y0=0.0, x1=24.0, y1=3.0),
            CorridorRect(x0=0.0, y0=3.0, x1=1.8, y1=4.8),
            CorridorRect(x0=5.7, y0=3.0, x1=7.5, y1=4.8),
        ],
        stair=StairSpec(x0=1.8, y0=3.0, x1=5.7, y1=4.8, steps=12) if floors > 1 else None,
        elevators=[ElevatorSpec(x0=15.0, y0=0.6, x1=16.5, y1=2.1, served_floors=served, initial_floor=0)]
        if floors > 1 else [],
    )


def twin_floor_building() -> BuildingSpec:
    """Two identical floors with side rooms that make places distinguishable."""
    return BuildingSpec(
        floors=2,
        corridors=[
            CorridorRect(x0=0.0, y0=0.0, x1=24.0, y1=2.4),
            CorridorRect(x0=3.0, y0=2.4, x1=6.0, y1=6.0),
            CorridorRect(x0=10.2, y0=-3.6, x1=12.0, y1=0.0),
            CorridorRect(x0=16.8, y0=2.4, x1=21.0, y1=4.2),
        ],
    )
