"""
Planning Module

Modules:
- voxel: traversable voxel set S and voxelization of a map cloud
- planner: elevator-aware A*, multi-leg chaining and destination ordering
"""

from .voxel import ElevatorInfo, VoxelMap, voxelize
from .planner import Trajectory, astar, order_destinations, plan_multi

__all__ = [
    "ElevatorInfo",
    "VoxelMap",
    "voxelize",
    "Trajectory",
    "astar",
    "order_destinations",
    "plan_multi",
]
