"""
Multifloor mapping and elevator-aware planning toolkit.

Packages:
- mapping: barometric floor tracking, elevator detection, loop closure, pose graph
- planning: traversable voxel map and the elevator-aware A* planner
- synth: synthetic buildings and sensor sessions
- validators: building, route and waypoint checks returning ValidationResult
- services: text/CSV persistence of sessions, graphs, clouds, voxel maps, trajectories
"""

__version__ = "0.1.0"
