"""
Validators Module

Each validator returns a ValidationResult with success/failure and extracted data.

Validators:
- building_validator: building specs and routes through them
- waypoint_validator: planning waypoints, snapping, elevator cab positions
"""

from .building_validator import BuildingValidator
from .waypoint_validator import WaypointValidator

__all__ = [
    "BuildingValidator",
    "WaypointValidator",
]
