"""
Building Validator

Checks a BuildingSpec (and routes through it) before anything is generated.

Features:
- Corridor width, grid alignment and per-floor connectivity
- Stair lane geometry: rise x steps, landings at both ends, enough cells per flight
- Elevator footprint size, served floors and lobby placement
- Route segments: walking on corridors, stairs along the lane, rides inside a cab

Every violation found is reported, not just the first.
"""

import logging
from typing import List, Optional, Sequence

import numpy as np
from scipy import ndimage

from ..models import Point3, ValidationResult
from ..synth.layout import BuildingSpec, CellGrid, SegmentKind, is_aligned, level_index

logger = logging.getLogger(__name__)

MIN_CORRIDOR_WIDTH = 1.8
MIN_ELEVATOR_SIDE = 1.5
TOLERANCE = 1e-6


class BuildingValidator:
    """
    Validates building specifications and routes.

    Rules:
    1. Corridor rectangles are at least 1.8 m wide and lie on the voxel grid
    2. Each floor's corridors form one connected area
    3. Stair rise x steps equals the floor height; landings touch both lane ends
    4. Elevator footprints are at least 1.5 x 1.5 m, inside corridors of served floors
    """

    def validate(self, spec: BuildingSpec) -> ValidationResult:
        """
        Validates a building specification.

        Args:
            spec: Building to check

        Returns:
            ValidationResult with:
            - success: True if every rule holds
            - data: {"cells_per_floor": corridor cell count per floor}
            - errors: One line per violation
        """
        errors: List[str] = []
        grid = CellGrid(spec)

        if spec.wall_height <= 0:
            errors.append("wall_height must be positive")
        errors.extend(self._check_corridors(spec, grid))
        if spec.stair is not None:
            errors.extend(self._check_stair(spec, grid))
        errors.extend(self._check_elevators(spec, grid))

        cells = [int(grid.corridor_mask(f).sum()) for f in range(spec.floors)]
        if errors:
            logger.warning(f"Building spec rejected with {len(errors)} violations")
            return ValidationResult(
                success=False,
                error_message=f"building spec has {len(errors)} violation(s): {errors[0]}",
                errors=errors,
            )
        return ValidationResult(
            success=True,
            data={"cells_per_floor": cells},
            metadata={"validation_type": "building", "floors": spec.floors},
        )

    def _check_corridors(self, spec: BuildingSpec, grid: CellGrid) -> List[str]:
        errors = []
        res = spec.resolution
        for n, rect in enumerate(spec.corridors):
            if rect.x1 <= rect.x0 or rect.y1 <= rect.y0:
                errors.append(f"corridor {n} has non-positive extent")
                continue
            if rect.width < MIN_CORRIDOR_WIDTH - TOLERANCE:
                errors.append(f"corridor {n} is {rect.width:.2f} m wide, minimum is {MIN_CORRIDOR_WIDTH} m")
            if not all(is_aligned(v, res) for v in (rect.x0, rect.y0, rect.x1, rect.y1)):
                errors.append(f"corridor {n} edges are not multiples of the {res} m resolution")
            for floor in rect.floors or []:
                if not 0 <= floor < spec.floors:
                    errors.append(f"corridor {n} names floor {floor} outside 0..{spec.floors - 1}")

        for floor in range(spec.floors):
            mask = grid.corridor_mask(floor)
            if not mask.any():
                errors.append(f"floor {floor} has no corridor")
                continue
            _, n_components = ndimage.label(mask)
            if n_components > 1:
                errors.append(f"floor {floor} corridors form {n_components} disconnected areas")
        return errors

    def _check_stair(self, spec: BuildingSpec, grid: CellGrid) -> List[str]:
        errors = []
        stair = spec.stair
        res = spec.resolution
        if spec.floors < 2:
            errors.append("a stair needs at least two floors")
        if stair.x1 <= stair.x0 or stair.y1 <= stair.y0:
            return errors + ["stair lane has non-positive extent"]
        if not all(is_aligned(v, res) for v in (stair.x0, stair.y0, stair.x1, stair.y1)):
            errors.append(f"stair lane edges are not multiples of the {res} m resolution")
        if stair.y1 - stair.y0 < MIN_CORRIDOR_WIDTH - TOLERANCE:
            errors.append(f"stair lane is narrower than {MIN_CORRIDOR_WIDTH} m")
        if abs(spec.step_rise() * stair.steps - spec.floor_height) > TOLERANCE:
            errors.append(
                f"stair rise {spec.step_rise():.4f} m x {stair.steps} steps does not equal "
                f"the floor height {spec.floor_height} m"
            )

        lane = grid.lane_mask()
        columns = grid.lane_columns()
        rows = grid.lane_rows()
        if len(columns) < 2 or not rows:
            return errors + ["stair lane must span at least two cells"]
        for floor in range(spec.floors - 1):
            span = level_index(spec, floor + 1) - level_index(spec, floor) - 1
            if span < 1:
                errors.append(f"floor height is too small for the resolution between floors {floor} and {floor + 1}")
            elif len(columns) < span:
                errors.append(f"stair lane needs at least {span} cells to climb from floor {floor}")

        below, above = columns[0] - 1, columns[-1] + 1
        for floor in range(spec.floors):
            corridor = grid.corridor_mask(floor)
            if (corridor & lane).any():
                errors.append(f"stair lane overlaps a corridor on floor {floor}")
            for end, name in ((below, "x0"), (above, "x1")):
                if not grid.inside(end, rows[0]) or not all(corridor[end, j] for j in rows):
                    errors.append(f"floor {floor} has no landing at the stair's {name} end")
        return errors

    def _check_elevators(self, spec: BuildingSpec, grid: CellGrid) -> List[str]:
        errors = []
        columns = set()
        for n, elevator in enumerate(spec.elevators):
            if min(elevator.x1 - elevator.x0, elevator.y1 - elevator.y0) < MIN_ELEVATOR_SIDE - TOLERANCE:
                errors.append(f"elevator {n} footprint is smaller than {MIN_ELEVATOR_SIDE} x {MIN_ELEVATOR_SIDE} m")
            served = sorted(set(elevator.served_floors))
            if len(served) < 2:
                errors.append(f"elevator {n} must serve at least two floors")
            if any(not 0 <= f < spec.floors for f in served):
                errors.append(f"elevator {n} serves a floor outside 0..{spec.floors - 1}")
                continue
            if elevator.initial_floor not in served:
                errors.append(f"elevator {n} initial floor {elevator.initial_floor} is not served")

            column = grid.local_of_xy(*elevator.center)
            if column in columns:
                errors.append(f"elevator {n} shares its shaft column with another elevator")
            columns.add(column)

            footprint = grid.rect_mask(elevator.x0, elevator.y0, elevator.x1, elevator.y1)
            for floor in served:
                if not (grid.corridor_mask(floor) | ~footprint).all():
                    errors.append(f"elevator {n} footprint leaves the corridor on floor {floor}")
        return errors

    # ============================================
    # ROUTES
    # ============================================

    def validate_route(self, spec: BuildingSpec, route: Sequence[Point3]) -> ValidationResult:
        """
        Checks that every route segment stays in traversable space.

        Segments are classified by their endpoints:
        - same z: walking, sampled along its length against the corridor cells
        - same x, y: an elevator ride inside a cab footprint serving both floors
        - otherwise: one stair flight from one lane end to the other

        Returns:
            ValidationResult with data {"segments": [SegmentKind, ...]}
        """
        errors: List[str] = []
        kinds: List[SegmentKind] = []
        points = [tuple(float(v) for v in p) for p in route]
        if not points:
            return ValidationResult(success=False, error_message="route is empty", errors=["route is empty"])

        grid = CellGrid(spec)
        for n, point in enumerate(points):
            if spec.floor_of_z(point[2]) is None:
                errors.append(f"waypoint {n} z={point[2]} is not a floor level")
        if errors:
            return ValidationResult(success=False, error_message=errors[0], errors=errors)

        for n, (a, b) in enumerate(zip(points[:-1], points[1:])):
            kind, problem = self._classify_segment(spec, grid, a, b)
            if problem:
                errors.append(f"segment {n} {a} -> {b}: {problem}")
            kinds.append(kind)

        if len(points) == 1:
            floor = spec.floor_of_z(points[0][2])
            if not self._walkable(grid, floor, points[0][0], points[0][1]):
                errors.append(f"waypoint 0 {points[0]} is outside the corridors")

        if errors:
            return ValidationResult(success=False, error_message=errors[0], errors=errors)
        return ValidationResult(
            success=True,
            data={"segments": kinds},
            metadata={"validation_type": "route", "waypoints": len(points)},
        )

    def _walkable(self, grid: CellGrid, floor: int, x: float, y: float) -> bool:
        """True if a corridor cell touches (x, y); points on cell edges count for both sides."""
        corridor = grid.corridor_mask(floor)
        for dx in (-TOLERANCE, TOLERANCE):
            for dy in (-TOLERANCE, TOLERANCE):
                i, j = grid.local_of_xy(x + dx, y + dy)
                if grid.inside(i, j) and corridor[i, j]:
                    return True
        return False

    def _classify_segment(self, spec: BuildingSpec, grid: CellGrid, a: Point3, b: Point3):
        floor_a = spec.floor_of_z(a[2])
        floor_b = spec.floor_of_z(b[2])
        horizontal = np.hypot(b[0] - a[0], b[1] - a[1])

        if floor_a == floor_b:
            steps = max(int(np.ceil(horizontal / (spec.resolution / 4.0))), 1)
            for s in np.linspace(0.0, 1.0, steps + 1):
                x, y = a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])
                if not self._walkable(grid, floor_a, x, y):
                    return SegmentKind.WALK, f"leaves the corridors near ({x:.2f}, {y:.2f})"
            return SegmentKind.WALK, None

        if horizontal <= TOLERANCE:
            cab = self._elevator_at(spec, a[0], a[1])
            if cab is None:
                return SegmentKind.ELEVATOR, "vertical motion outside any elevator"
            if floor_a not in cab.served_floors or floor_b not in cab.served_floors:
                return SegmentKind.ELEVATOR, "elevator does not serve both floors"
            return SegmentKind.ELEVATOR, None

        return SegmentKind.STAIR, self._check_flight(spec, a, b, floor_a, floor_b)

    def _elevator_at(self, spec: BuildingSpec, x: float, y: float):
        for elevator in spec.elevators:
            if elevator.contains_xy(x, y):
                return elevator
        return None

    def _check_flight(self, spec: BuildingSpec, a: Point3, b: Point3, floor_a: int, floor_b: int) -> Optional[str]:
        stair = spec.stair
        if stair is None:
            return "building has no stair"
        if abs(floor_a - floor_b) != 1:
            return "a stair segment must climb exactly one floor"
        low, high = (a, b) if floor_a < floor_b else (b, a)
        floor = min(floor_a, floor_b)
        bottom = stair.bottom_x(floor)
        top = stair.x1 if bottom == stair.x0 else stair.x0
        if abs(low[0] - bottom) > TOLERANCE or abs(high[0] - top) > TOLERANCE:
            return f"flight from floor {floor} runs from x={bottom} to x={top}"
        if abs(a[1] - b[1]) > TOLERANCE or not stair.y0 <= a[1] < stair.y1:
            return "stair segment must run straight along the lane"
        return None
