"""
Mapping Module

Turns a recorded session into an optimized multifloor pose graph.

Modules:
- baro: barometric altitude change and floor tracking
- scanproc: elevator-interior detection and elevator shell synthesis
- loopdet: scan-context descriptors and the floor-labeled loop database
- icp: planar scan alignment
- graph: pose graph and Levenberg-Marquardt optimizer
- pipeline: end-to-end mapping of a session
- evaluation: elevation and loop-detection metrics
"""

from .baro import FloorTracker, estimate_delta_z, pressure_for_altitude, update_floor
from .graph import PoseGraph, optimize
from .loopdet import LoopDatabase, estimate_relative_pose, make_descriptor
from .scanproc import detect_elevator_interior, synthesize_elevator_cloud

__all__ = [
    "FloorTracker",
    "estimate_delta_z",
    "pressure_for_altitude",
    "update_floor",
    "PoseGraph",
    "optimize",
    "LoopDatabase",
    "estimate_relative_pose",
    "make_descriptor",
    "detect_elevator_interior",
    "synthesize_elevator_cloud",
]
