"""
Services Module

Persistence of everything the commands exchange, as plain text.

Services:
- session_store: session directories
- graph_store: pose-graph records
- voxel_store: voxel-map files
- cloud_store: classified map clouds
- trajectory_store: planned trajectories
"""

from .cloud_store import CloudStore
from .graph_store import GraphFile, GraphStore
from .session_store import SessionStore
from .trajectory_store import TrajectoryStore
from .voxel_store import VoxelMapStore

__all__ = [
    "CloudStore",
    "GraphFile",
    "GraphStore",
    "SessionStore",
    "TrajectoryStore",
    "VoxelMapStore",
]
