"""
Waypoint Validator

Parses planning requests given on the command line and snaps them onto the map.

Features:
- "x,y,z;x,y,z;..." waypoint lists in meters
- "id=z" elevator cab positions
- Snapping to the nearest traversable voxel center within a radius
- Reports every snap that moved a waypoint out of its own voxel
"""

import logging
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from ..models import Point3, ValidationResult
from ..planning.voxel import VoxelMap

logger = logging.getLogger(__name__)


class WaypointValidator:
    """
    Validates waypoint strings against a voxel map.

    Rules:
    1. Each waypoint has exactly three finite coordinates
    2. At least one waypoint is given
    3. Every waypoint lies within snap_radius of a voxel center in S
    """

    def __init__(self, snap_radius: float = 1.0):
        """
        Initialize validator.

        Args:
            snap_radius: Largest distance (m) a waypoint may be moved
        """
        self.snap_radius = snap_radius

    def parse(self, text: str) -> ValidationResult:
        """
        Parses "x,y,z;x,y,z" into points without touching any map.

        Returns:
            ValidationResult with data {"points": [Point3, ...]}
        """
        points: List[Point3] = []
        errors: List[str] = []
        for n, chunk in enumerate(part for part in text.split(";") if part.strip()):
            fields = [f.strip() for f in chunk.split(",")]
            if len(fields) != 3:
                errors.append(f"waypoint {n} '{chunk.strip()}' needs three coordinates")
                continue
            try:
                point = tuple(float(f) for f in fields)
            except ValueError:
                errors.append(f"waypoint {n} '{chunk.strip()}' is not numeric")
                continue
            if not all(np.isfinite(point)):
                errors.append(f"waypoint {n} has a non-finite coordinate")
                continue
            points.append(point)

        if not errors and not points:
            errors.append("no waypoints given")
        if errors:
            return ValidationResult(success=False, error_message=errors[0], errors=errors)
        return ValidationResult(success=True, data={"points": points})

    def validate(self, text: str, voxel_map: VoxelMap) -> ValidationResult:
        """
        Parses waypoints and snaps each to the nearest voxel in S.

        Args:
            text: Waypoints as "x,y,z;x,y,z;..."
            voxel_map: Map providing S

        Returns:
            ValidationResult with:
            - success: True if every waypoint snapped within the radius
            - data: {"points": parsed points, "indices": snapped voxel indices}
            - metadata: {"snap_distances": meters moved per waypoint}
        """
        parsed = self.parse(text)
        if not parsed.success:
            return parsed
        points = parsed.data["points"]
        if not voxel_map.occupied:
            return ValidationResult(success=False, error_message="voxel map is empty", errors=["voxel map is empty"])

        indices = sorted(voxel_map.occupied)
        centers = np.array([voxel_map.index_to_world(idx) for idx in indices])
        tree = cKDTree(centers)
        distances, nearest = tree.query(np.array(points, dtype=float))

        snapped, errors = [], []
        for n, (point, distance, pos) in enumerate(zip(points, distances, nearest)):
            if distance > self.snap_radius:
                errors.append(
                    f"waypoint {n} {point} is {distance:.2f} m from the nearest traversable voxel "
                    f"(limit {self.snap_radius} m)"
                )
                continue
            idx = indices[int(pos)]
            if idx != voxel_map.world_to_index(point):
                logger.warning(f"Waypoint {n} {point} snapped {distance:.2f} m to voxel {idx}")
            snapped.append(idx)

        if errors:
            return ValidationResult(success=False, error_message=errors[0], errors=errors)
        return ValidationResult(
            success=True,
            data={"points": points, "indices": snapped},
            metadata={"validation_type": "waypoints", "snap_distances": [float(d) for d in distances]},
        )

    def parse_elevator_z(self, items: Optional[Sequence[str]], voxel_map: Optional[VoxelMap] = None) -> ValidationResult:
        """
        Parses "id=z" items; with a map, ids must name its elevators.

        Returns:
            ValidationResult with data {"elevator_z": {id: z}}
        """
        values: Dict[str, float] = {}
        errors: List[str] = []
        known = {e.id for e in voxel_map.elevators} if voxel_map is not None else None
        for item in items or []:
            key, sep, raw = item.partition("=")
            key = key.strip()
            if not sep or not key:
                errors.append(f"elevator position '{item}' must look like id=z")
                continue
            try:
                values[key] = float(raw)
            except ValueError:
                errors.append(f"elevator position '{item}' has a non-numeric z")
                continue
            if known is not None and key not in known:
                errors.append(f"unknown elevator '{key}' (map has {sorted(known)})")
        if errors:
            return ValidationResult(success=False, error_message=errors[0], errors=errors)
        return ValidationResult(success=True, data={"elevator_z": values})
