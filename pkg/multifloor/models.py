"""
Data Models and Schemas

This file defines the data structures shared across the mapping, voxelization
and planning layers. Uses Pydantic for validation; point arrays are numpy.

KEY CONVENTIONS:
- Poses are robot-base poses; the LiDAR sits sensor_height above the base
- Scan points are in the sensor frame (yaw-aligned with the base)
- Quaternions are stored (qx, qy, qz, qw), scipy order
"""

from enum import Enum
from typing import Optional, Dict, Any, List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.spatial.transform import Rotation

from .errors import InvalidInputError


Index3 = Tuple[int, int, int]
Point3 = Tuple[float, float, float]


# ============================================
# ENUMS
# ============================================

class VoxelClass(str, Enum):
    """Traversability class of a voxel in the set S."""
    CORRIDOR = "C"
    STAIR = "S"
    ELEVATOR = "E"


class SourceClass(str, Enum):
    """Origin of a map-cloud point, decides how voxelization treats it."""
    GROUND = "ground"
    ELEVATOR = "elevator"
    OTHER = "other"


class MoveMode(str, Enum):
    """How the robot reached a trajectory waypoint."""
    WALK = "WALK"
    STAIR = "STAIR"
    WAIT = "WAIT"
    ELEV = "ELEV"


# ============================================
# SENSOR DATA
# ============================================

class PressureSample(BaseModel):
    """One barometer reading."""
    t: float  # seconds since session start
    p: float  # pascals

    @field_validator("p")
    @classmethod
    def _positive_pressure(cls, value: float) -> float:
        if value <= 0:
            raise ValueError("pressure must be positive")
        return value


class Scan(BaseModel):
    """
    One LiDAR sweep.

    points: (N, 3) float array in the sensor frame
    channels: (N,) int array of ring indices 0..15
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    points: np.ndarray
    channels: np.ndarray
    node_id: int = 0
    t: float = 0.0

    @model_validator(mode="after")
    def _check_arrays(self) -> "Scan":
        points = np.asarray(self.points, dtype=float).reshape(-1, 3)
        channels = np.asarray(self.channels, dtype=int).reshape(-1)
        if len(points) != len(channels):
            raise ValueError("points and channels differ in length")
        if not np.all(np.isfinite(points)):
            raise ValueError("scan contains non-finite coordinates")
        if len(channels) and (channels.min() < 0 or channels.max() > 15):
            raise ValueError("channel index outside 0..15")
        self.points = points
        self.channels = channels
        return self

    @classmethod
    def from_points(cls, points: Any, channels: Any = None, node_id: int = 0, t: float = 0.0) -> "Scan":
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        if channels is None:
            channels = np.zeros(len(points), dtype=int)
        return cls(points=points, channels=np.asarray(channels), node_id=node_id, t=t)

    def __len__(self) -> int:
        return len(self.points)

    def require_points(self) -> None:
        """Raises InvalidInputError for an empty scan."""
        if len(self.points) == 0:
            raise InvalidInputError(f"scan {self.node_id} is empty")


# ============================================
# POSES
# ============================================

class Pose3(BaseModel):
    """Rigid-body pose: translation in meters, unit quaternion rotation."""
    translation: Point3 = (0.0, 0.0, 0.0)
    quaternion: Tuple[float, float, float, float] = (0.0, 0.0, 0.0, 1.0)

    @field_validator("quaternion")
    @classmethod
    def _unit_quaternion(cls, value):
        norm = float(np.linalg.norm(value))
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"quaternion norm {norm} is not 1")
        return value

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "Pose3":
        quat = Rotation.from_matrix(matrix[:3, :3]).as_quat()
        quat = quat / np.linalg.norm(quat)
        return cls(
            translation=tuple(float(v) for v in matrix[:3, 3]),
            quaternion=tuple(float(v) for v in quat),
        )

    @classmethod
    def from_xyz_yaw(cls, x: float, y: float, z: float, yaw: float) -> "Pose3":
        quat = Rotation.from_euler("z", yaw).as_quat()
        return cls(translation=(x, y, z), quaternion=tuple(float(v) for v in quat))

    def rotation(self) -> Rotation:
        return Rotation.from_quat(self.quaternion)

    def matrix(self) -> np.ndarray:
        matrix = np.eye(4)
        matrix[:3, :3] = self.rotation().as_matrix()
        matrix[:3, 3] = self.translation
        return matrix

    def yaw(self) -> float:
        return float(self.rotation().as_euler("zyx")[0])


class PlanarTransform(BaseModel):
    """Planar relative pose estimated by scan alignment."""
    dx: float = 0.0
    dy: float = 0.0
    dyaw: float = 0.0  # radians
    rms: float = 0.0   # alignment residual, meters

    def to_pose3(self) -> Pose3:
        return Pose3.from_xyz_yaw(self.dx, self.dy, 0.0, self.dyaw)


# ============================================
# LOOP DETECTION
# ============================================

class LoopCandidate(BaseModel):
    """
    A recognized revisit between two pose nodes.

    distance is the scan-context distance in [0, 1]; shift the best column offset.
    """
    query_id: int
    match_id: int
    distance: float
    shift: int
    query_floor: int = 0
    match_floor: int = 0


# ============================================
# VALIDATION
# ============================================

class ValidationResult(BaseModel):
    """
    Standard result format for all validators.

    USAGE:
    - success: True if validation passed
    - data: Extracted/validated data (e.g., snapped voxel indices)
    - error_message: Human-readable summary if validation failed
    - errors: Every individual violation found
    - metadata: Additional info (e.g., snapping distances)
    """
    success: bool
    data: Optional[Dict[str, Any]] = None
    error_message: Optional[str] = None
    errors: List[str] = Field(default_factory=list)
    metadata: Optional[Dict[str, Any]] = None
