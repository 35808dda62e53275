"""
Scan Processing

Elevator-interior detection from the range distribution of a scan, and the
hollow-cuboid cloud that stands in for an elevator ride on the map.

Inside a cab every return is close to the sensor, so the mean squared range
drops far below what any corridor produces.
"""

import logging

import numpy as np

from ..config import ElevatorDetectConfig
from ..errors import InvalidInputError
from ..models import Scan

logger = logging.getLogger(__name__)

# Channel assigned to synthesized points; never a ground channel
SYNTH_CHANNEL = 15


def mean_squared_range(scan: Scan) -> float:
    """Mean of x^2 + y^2 + z^2 over the scan's points."""
    scan.require_points()
    return float(np.mean(np.sum(scan.points ** 2, axis=1)))


def detect_elevator_interior(scan: Scan, cfg: ElevatorDetectConfig) -> bool:
    """True iff the mean squared range is strictly below the configured threshold."""
    return mean_squared_range(scan) < cfg.range_sq_threshold


def _face_samples(half: float, spacing: float) -> np.ndarray:
    count = int(np.ceil(2.0 * half / spacing)) + 1
    return np.linspace(-half, half, count)


def synthesize_elevator_cloud(cfg: ElevatorDetectConfig, delta_z: float, base_pose_z: float) -> Scan:
    """
    Hollow cuboid shell representing a ride of delta_z meters.

    Points lie on the four vertical faces of a 2a x 2b box centered on the
    robot's x, y (origin of the returned cloud), from base_pose_z to
    base_pose_z + delta_z, sampled every shell_spacing meters.

    Args:
        cfg: Footprint half-extents and sampling spacing
        delta_z: Signed ride height
        base_pose_z: Altitude where the ride starts

    Returns:
        Scan whose points are (x, y) relative to the robot and absolute z

    Raises:
        InvalidInputError: zero-height ride
    """
    if delta_z == 0:
        raise InvalidInputError("cannot synthesize an elevator cloud for a zero-height ride")
    a, b = cfg.footprint
    spacing = cfg.shell_spacing
    xs = _face_samples(a, spacing)
    ys = _face_samples(b, spacing)

    # Perimeter of the cross-section, corners shared between faces
    ring = np.concatenate([
        np.column_stack([xs, np.full_like(xs, -b)]),
        np.column_stack([xs, np.full_like(xs, b)]),
        np.column_stack([np.full_like(ys[1:-1], -a), ys[1:-1]]),
        np.column_stack([np.full_like(ys[1:-1], a), ys[1:-1]]),
    ])

    lo, hi = min(0.0, delta_z), max(0.0, delta_z)
    levels = np.linspace(lo, hi, int(np.ceil((hi - lo) / spacing)) + 1) + base_pose_z

    points = np.column_stack([
        np.tile(ring, (len(levels), 1)),
        np.repeat(levels, len(ring)),
    ])
    logger.debug(f"Synthesized {len(points)} elevator shell points for dz={delta_z:.2f} m")
    return Scan.from_points(points, np.full(len(points), SYNTH_CHANNEL))
