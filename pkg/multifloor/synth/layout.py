"""
Building Layout

Declarative description of a synthetic building plus the planar cell grid
every generator stage shares:
- CorridorRect: walkable floor area, on every floor or a listed subset
- StairSpec: one straight stair lane; flights alternate direction per floor
- ElevatorSpec: cab footprint and the floors it serves
- SegmentKind: walking, stair or elevator leg of a route
- CellGrid: resolution-sized cells covering the building, one wall cell of margin

A cell belongs to a rectangle when its center lies in [x0, x1) x [y0, y1).
"""

import math
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field


class CorridorRect(BaseModel):
    """Axis-aligned walkable area; floors=None means every floor."""
    x0: float
    y0: float
    x1: float
    y1: float
    floors: Optional[List[int]] = None

    @property
    def width(self) -> float:
        return min(self.x1 - self.x0, self.y1 - self.y0)

    def applies_to(self, floor: int) -> bool:
        return self.floors is None or floor in self.floors


class StairSpec(BaseModel):
    """
    Straight stair lane spanning x0..x1 (the run direction) and y0..y1.

    The flight leaving floor f climbs toward +x when f is even and toward -x
    when f is odd, so consecutive flights share the lane.
    """
    x0: float
    y0: float
    x1: float
    y1: float
    steps: int = Field(12, ge=1)
    rise: Optional[float] = None  # defaults to floor_height / steps

    @property
    def length(self) -> float:
        return self.x1 - self.x0

    @property
    def run(self) -> float:
        return self.length / self.steps

    def ascends_positive(self, floor: int) -> bool:
        return floor % 2 == 0

    def bottom_x(self, floor: int) -> float:
        """x of the lane end where the flight leaving `floor` starts."""
        return self.x0 if self.ascends_positive(floor) else self.x1


class ElevatorSpec(BaseModel):
    """Cab footprint, served floors and the floor where the cab waits initially."""
    x0: float
    y0: float
    x1: float
    y1: float
    served_floors: List[int]
    initial_floor: int

    @property
    def center(self) -> Tuple[float, float]:
        return (0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))

    @property
    def half_extents(self) -> Tuple[float, float]:
        return (0.5 * (self.x1 - self.x0), 0.5 * (self.y1 - self.y0))

    def contains_xy(self, x: float, y: float) -> bool:
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1


class BuildingSpec(BaseModel):
    """Everything generate_building needs to emit surfaces and the truth voxel map."""
    floors: int = Field(..., ge=1)
    floor_height: float = Field(3.64, gt=0)
    resolution: float = Field(0.3, gt=0)
    corridors: List[CorridorRect] = Field(default_factory=list)
    stair: Optional[StairSpec] = None
    elevators: List[ElevatorSpec] = Field(default_factory=list)
    wall_height: float = 3.0
    slab_thickness: float = Field(0.2, gt=0)

    def floor_z(self, floor: int) -> float:
        return floor * self.floor_height

    def step_rise(self) -> float:
        if self.stair is None:
            return 0.0
        return self.stair.rise if self.stair.rise is not None else self.floor_height / self.stair.steps

    def floor_of_z(self, z: float, tolerance: float = 1e-6) -> Optional[int]:
        """Floor whose level is z, or None between floors."""
        floor = int(round(z / self.floor_height))
        if 0 <= floor < self.floors and abs(z - self.floor_z(floor)) <= tolerance:
            return floor
        return None


def level_index(spec: BuildingSpec, floor: int) -> int:
    """Voxel layer k holding the floor surface of `floor`."""
    return int(np.floor(spec.floor_z(floor) / spec.resolution))


def is_aligned(value: float, resolution: float) -> bool:
    ratio = value / resolution
    return abs(ratio - round(ratio)) < 1e-6


class CellGrid:
    """Planar cells of size `resolution` covering the building plus a one-cell margin."""

    def __init__(self, spec: BuildingSpec):
        self.spec = spec
        self.resolution = spec.resolution
        rects = [(r.x0, r.y0, r.x1, r.y1) for r in spec.corridors]
        if spec.stair is not None:
            s = spec.stair
            rects.append((s.x0, s.y0, s.x1, s.y1))
        rects.extend((e.x0, e.y0, e.x1, e.y1) for e in spec.elevators)
        if not rects:
            rects = [(0.0, 0.0, spec.resolution, spec.resolution)]
        xs = [v for r in rects for v in (r[0], r[2])]
        ys = [v for r in rects for v in (r[1], r[3])]
        self.i0 = int(math.floor(min(xs) / self.resolution)) - 1
        self.j0 = int(math.floor(min(ys) / self.resolution)) - 1
        self.ni = int(math.ceil(max(xs) / self.resolution)) - self.i0 + 1
        self.nj = int(math.ceil(max(ys) / self.resolution)) - self.j0 + 1
        self._cx = (np.arange(self.ni) + self.i0 + 0.5) * self.resolution
        self._cy = (np.arange(self.nj) + self.j0 + 0.5) * self.resolution

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.ni, self.nj)

    def rect_mask(self, x0: float, y0: float, x1: float, y1: float) -> np.ndarray:
        in_x = (self._cx >= x0) & (self._cx < x1)
        in_y = (self._cy >= y0) & (self._cy < y1)
        return in_x[:, None] & in_y[None, :]

    def corridor_mask(self, floor: int) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        for rect in self.spec.corridors:
            if rect.applies_to(floor):
                mask |= self.rect_mask(rect.x0, rect.y0, rect.x1, rect.y1)
        return mask

    def lane_mask(self) -> np.ndarray:
        s = self.spec.stair
        if s is None:
            return np.zeros(self.shape, dtype=bool)
        return self.rect_mask(s.x0, s.y0, s.x1, s.y1)

    def to_global(self, local_i: int, local_j: int) -> Tuple[int, int]:
        return (int(local_i) + self.i0, int(local_j) + self.j0)

    def to_local(self, i: int, j: int) -> Tuple[int, int]:
        return (i - self.i0, j - self.j0)

    def local_of_xy(self, x: float, y: float) -> Tuple[int, int]:
        return (
            int(math.floor(x / self.resolution)) - self.i0,
            int(math.floor(y / self.resolution)) - self.j0,
        )

    def inside(self, local_i: int, local_j: int) -> bool:
        return 0 <= local_i < self.ni and 0 <= local_j < self.nj

    def cell_center(self, local_i: int, local_j: int) -> Tuple[float, float]:
        return (float(self._cx[local_i]), float(self._cy[local_j]))

    def lane_columns(self) -> List[int]:
        """Local i of the lane's cells, ordered from x0 to x1."""
        lane = self.lane_mask()
        return [int(i) for i in np.flatnonzero(lane.any(axis=1))]

    def lane_rows(self) -> List[int]:
        lane = self.lane_mask()
        return [int(j) for j in np.flatnonzero(lane.any(axis=0))]


def stair_layer(spec: BuildingSpec, floor: int, position: int, n_cells: int) -> int:
    """
    Voxel layer of the position-th lane cell (counted from the flight's bottom
    end) for the flight leaving `floor`.

    Layers climb monotonically from one above the lower floor surface to one
    below the upper floor surface, by at most one layer per cell.
    """
    k_bottom = level_index(spec, floor)
    span = level_index(spec, floor + 1) - k_bottom - 1
    if n_cells == 1:
        return k_bottom + 1
    return k_bottom + 1 + (position * (span - 1)) // (n_cells - 1)


class SegmentKind(str, Enum):
    """How the robot traverses one route segment."""
    WALK = "walk"
    STAIR = "stair"
    ELEVATOR = "elevator"
