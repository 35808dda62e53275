"""
Box Ray-Casting

A 16-channel spinning LiDAR model cast against axis-aligned boxes with the
slab method, plus the short-range cloud seen from inside an elevator cab.
"""

import logging
from typing import Tuple

import numpy as np

from ..models import Scan
from .building import BuildingGeometry

logger = logging.getLogger(__name__)

N_CHANNELS = 16
N_AZIMUTHS = 360
MAX_RANGE = 100.0
BOX_CHUNK = 64

# Channel c points at -15 + 2c degrees
CHANNEL_ELEVATIONS = np.deg2rad(-15.0 + 2.0 * np.arange(N_CHANNELS))


def ray_directions(n_azimuths: int = N_AZIMUTHS) -> Tuple[np.ndarray, np.ndarray]:
    """
    Unit ray directions in the sensor frame and their channel indices.

    Returns:
        ((N_CHANNELS * n_azimuths, 3) directions, matching channel array)
    """
    azimuth = 2.0 * np.pi * np.arange(n_azimuths) / n_azimuths
    elevation, azimuth = np.meshgrid(CHANNEL_ELEVATIONS, azimuth, indexing="ij")
    directions = np.stack([
        np.cos(elevation) * np.cos(azimuth),
        np.cos(elevation) * np.sin(azimuth),
        np.sin(elevation),
    ], axis=-1).reshape(-1, 3)
    channels = np.repeat(np.arange(N_CHANNELS), n_azimuths)
    return directions, channels


def cast_rays(origin: np.ndarray, directions: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """
    Distance along each ray to the first box surface in front of the origin.

    Boxes containing the origin are ignored. Misses are inf.
    """
    safe = np.where(np.abs(directions) < 1e-12, 1e-12, directions)
    inverse = 1.0 / safe
    best = np.full(len(directions), np.inf)
    for start in range(0, len(lo), BOX_CHUNK):
        box_lo = lo[start:start + BOX_CHUNK][None, :, :]
        box_hi = hi[start:start + BOX_CHUNK][None, :, :]
        t1 = (box_lo - origin) * inverse[:, None, :]
        t2 = (box_hi - origin) * inverse[:, None, :]
        t_near = np.minimum(t1, t2).max(axis=2)
        t_far = np.maximum(t1, t2).min(axis=2)
        hit = (t_far >= t_near) & (t_near > 1e-9)
        best = np.minimum(best, np.where(hit, t_near, np.inf).min(axis=1))
    return best


def _yaw_matrix(yaw: float) -> np.ndarray:
    c, s = np.cos(yaw), np.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def simulate_scan(
    geometry: BuildingGeometry,
    sensor_position: np.ndarray,
    yaw: float,
    rng: np.random.Generator,
    range_sigma: float = 0.0,
    node_id: int = 0,
    t: float = 0.0,
    max_range: float = MAX_RANGE,
    n_azimuths: int = N_AZIMUTHS,
) -> Scan:
    """
    Scan taken by a level sensor at sensor_position heading `yaw`.

    Points are returned in the sensor frame; rays that miss or exceed
    max_range produce no point. Range noise is Gaussian along the ray.
    """
    local, channels = ray_directions(n_azimuths)
    world = local @ _yaw_matrix(yaw).T
    lo, hi = geometry.bounds()
    ranges = cast_rays(np.asarray(sensor_position, dtype=float), world, lo, hi)
    if range_sigma > 0:
        ranges = ranges + rng.normal(0.0, range_sigma, size=len(ranges))
    keep = np.isfinite(ranges) & (ranges > 0) & (ranges <= max_range)
    points = local[keep] * ranges[keep, None]
    return Scan.from_points(points, channels[keep], node_id=node_id, t=t)


def cab_interior_scan(
    half_extents: Tuple[float, float],
    below: float,
    above: float,
    rng: np.random.Generator,
    range_sigma: float = 0.0,
    node_id: int = 0,
    t: float = 0.0,
    n_azimuths: int = N_AZIMUTHS,
) -> Scan:
    """
    Scan from inside a closed cab: every ray ends on a wall, floor or ceiling.

    Args:
        half_extents: Cab half-width along the sensor's x and y
        below: Distance from the sensor down to the cab floor
        above: Distance from the sensor up to the cab ceiling
    """
    local, channels = ray_directions(n_azimuths)
    lo = np.array([-half_extents[0], -half_extents[1], -below])
    hi = np.array([half_extents[0], half_extents[1], above])
    safe = np.where(np.abs(local) < 1e-12, 1e-12, local)
    exits = np.where(safe > 0, hi / safe, lo / safe)
    ranges = exits.min(axis=1)
    if range_sigma > 0:
        ranges = ranges + rng.normal(0.0, range_sigma, size=len(ranges))
    ranges = np.maximum(ranges, 0.0)
    return Scan.from_points(local * ranges[:, None], channels, node_id=node_id, t=t)
