"""
Synthetic Data Module

Modules:
- layout: declarative building description and the shared cell grid
- building: surfaces and truth voxel map of a building, canned fixtures
- raycast: box ray-casting LiDAR model
- session: full sensor sessions along a route

Only layout types are re-exported here; building and session import the
validators, which themselves depend on layout.
"""

from .layout import BuildingSpec, CorridorRect, ElevatorSpec, SegmentKind, StairSpec

__all__ = [
    "BuildingSpec",
    "CorridorRect",
    "ElevatorSpec",
    "SegmentKind",
    "StairSpec",
]
