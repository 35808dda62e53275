"""
Synthetic Sessions

Drives a virtual robot along a route through a synthetic building and records
what the mapping pipeline consumes:
- scans ray-cast at every pose (cab-interior clouds while inside an elevator)
- an oversampled barometer stream
- noisy odometry between consecutive poses
- ground-truth poses, floor labels and the truth voxel map

Everything random is drawn from one numpy Generator seeded by the caller, so a
seed reproduces a session bit for bit.
"""

import logging
import math
from typing import Dict, List, NamedTuple, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..config import BaroConfig, ElevatorDetectConfig
from ..errors import SpecValidationError
from ..mapping.baro import FloorTracker, pressure_for_altitude, update_floor
from ..mapping.scanproc import mean_squared_range
from ..models import Point3, Pose3, PressureSample, Scan
from ..planning.voxel import VoxelMap
from ..validators.building_validator import BuildingValidator
from .building import generate_building
from .layout import BuildingSpec, SegmentKind
from .raycast import cab_interior_scan, simulate_scan

logger = logging.getLogger(__name__)

START_TIME = 1.0
CAB_HEIGHT = 2.4


class NoiseSpec(BaseModel):
    """Sensor noise; odometry sigmas scale with the distance traveled."""
    odom_sigma_xy: float = Field(0.0, ge=0)   # m per m
    odom_sigma_z: float = Field(0.0, ge=0)    # m per m
    odom_sigma_yaw: float = Field(0.0, ge=0)  # rad per m
    pressure_sigma: float = Field(0.0, ge=0)  # Pa
    range_sigma: float = Field(0.0, ge=0)     # m


class OdometryDelta(BaseModel):
    """Measured pose of node j in the frame of node i."""
    i: int
    j: int
    rel: Pose3


class SessionManifest(BaseModel):
    p_cri: float
    window: int
    seed: int
    poses: int
    pressure_samples: int
    scans: int
    elevators: int
    floors: int
    floor_height: float
    sensor_height: float


class Session(BaseModel):
    """
    One recorded run. Every stream is keyed by pose-node id (0..poses-1) and
    shares the session clock.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    manifest: SessionManifest
    times: List[float]
    in_cab: List[bool]
    ground_truth: List[Pose3]
    floors: List[int]
    odometry: List[OdometryDelta]
    pressure: List[PressureSample]
    scans: Dict[int, Scan] = Field(default_factory=dict)
    truth_voxels: Optional[VoxelMap] = None

    def __len__(self) -> int:
        return len(self.times)

    def true_z(self) -> np.ndarray:
        return np.array([p.translation[2] for p in self.ground_truth])


class GenerateRequest(BaseModel):
    """Contents of the spec file consumed by the generate command."""
    building: BuildingSpec
    route: List[Point3]
    noise: NoiseSpec = Field(default_factory=NoiseSpec)
    window: int = Field(100, ge=1)
    p_cri: float = Field(101325.0, gt=0)
    sensor_height: float = Field(0.5, gt=0)
    with_scans: bool = True


class RoutePose(NamedTuple):
    x: float
    y: float
    z: float
    yaw: float
    t: float
    in_cab: bool


# ============================================
# ROUTE SAMPLING
# ============================================

def sample_route(
    route: Sequence[Point3],
    kinds: Sequence[SegmentKind],
    spacing: float = 1.0,
    walk_speed: float = 1.0,
    v_elv: float = 1.0,
) -> List[RoutePose]:
    """
    Poses along a validated route.

    Walking and stair segments are sampled every `spacing` meters of path
    length (end point included). An elevator segment adds only the pose at
    the cab's destination; both ends of a ride are flagged in_cab.
    """
    points = [np.asarray(p, dtype=float) for p in route]
    yaw = 0.0
    for a, b in zip(points[:-1], points[1:]):
        if np.hypot(*(b - a)[:2]) > 1e-9:
            yaw = math.atan2(b[1] - a[1], b[0] - a[0])
            break

    t = START_TIME
    poses = [RoutePose(*points[0], yaw, t, bool(kinds) and kinds[0] == SegmentKind.ELEVATOR)]
    for a, b, kind in zip(points[:-1], points[1:], kinds):
        delta = b - a
        if kind == SegmentKind.ELEVATOR:
            t += abs(delta[2]) / v_elv
            poses[-1] = poses[-1]._replace(in_cab=True)
            poses.append(RoutePose(*b, yaw, t, True))
            continue
        length = float(np.linalg.norm(delta))
        if length < 1e-9:
            continue
        yaw = math.atan2(delta[1], delta[0])
        steps = max(int(math.ceil(length / spacing - 1e-9)), 1)
        for s in range(1, steps + 1):
            t += length / steps / walk_speed
            x, y, z = a + delta * (s / steps)
            poses.append(RoutePose(x, y, z, yaw, t, False))
    return poses


def _noisy_odometry(poses: List[RoutePose], noise: NoiseSpec, rng: np.random.Generator) -> List[OdometryDelta]:
    deltas = []
    for i in range(len(poses) - 1):
        a, b = poses[i], poses[i + 1]
        if a.in_cab and b.in_cab:
            # planar odometry is frozen during a ride
            deltas.append(OdometryDelta(i=i, j=i + 1, rel=Pose3()))
            continue
        c, s = math.cos(a.yaw), math.sin(a.yaw)
        wx, wy, wz = b.x - a.x, b.y - a.y, b.z - a.z
        dx, dy, dz = c * wx + s * wy, -s * wx + c * wy, wz
        dyaw = math.atan2(math.sin(b.yaw - a.yaw), math.cos(b.yaw - a.yaw))
        distance = math.sqrt(wx * wx + wy * wy + wz * wz)
        sigmas = np.array([noise.odom_sigma_xy, noise.odom_sigma_xy, noise.odom_sigma_z, noise.odom_sigma_yaw]) * distance
        dx, dy, dz, dyaw = np.array([dx, dy, dz, dyaw]) + rng.normal(0.0, 1.0, size=4) * sigmas
        deltas.append(OdometryDelta(i=i, j=i + 1, rel=Pose3.from_xyz_yaw(float(dx), float(dy), float(dz), float(dyaw))))
    return deltas


def _pressure_stream(
    poses: List[RoutePose],
    window: int,
    p_cri: float,
    sigma: float,
    rng: np.random.Generator,
) -> List[PressureSample]:
    samples = []
    z0 = poses[0].z
    previous = poses[0].t - 1.0
    for pose in poses:
        stamps = previous + (pose.t - previous) * (np.arange(window) + 1) / window
        stamps[-1] = pose.t
        clean = pressure_for_altitude(pose.z - z0, p_cri)
        values = clean + rng.normal(0.0, 1.0, size=window) * sigma
        samples.extend(PressureSample(t=float(ts), p=float(p)) for ts, p in zip(stamps, values))
        previous = pose.t
    return samples


def generate_session(
    spec: BuildingSpec,
    route: Sequence[Point3],
    noise: Optional[NoiseSpec] = None,
    seed: int = 0,
    window: int = 100,
    p_cri: float = 101325.0,
    sensor_height: float = 0.5,
    with_scans: bool = True,
    baro: Optional[BaroConfig] = None,
) -> Session:
    """
    Simulates a full sensor session along a route.

    Args:
        spec: Building to drive through
        route: Waypoints (x, y, z) with z on floor levels
        noise: Sensor noise, zero when omitted
        seed: Seed of the only random generator used
        window: Barometer samples recorded per pose interval
        p_cri: Pressure at the starting pose
        sensor_height: LiDAR height above the robot base
        with_scans: False skips ray-casting (pressure/odometry-only session)
        baro: Floor-tracking threshold for the ground-truth labels

    Returns:
        Session with every stream populated

    Raises:
        SpecValidationError: invalid building or a route leaving traversable space
    """
    noise = noise or NoiseSpec()
    baro = baro or BaroConfig()
    geometry, truth_voxels = generate_building(spec)
    check = BuildingValidator().validate_route(spec, route)
    if not check.success:
        raise SpecValidationError(check.errors)

    poses = sample_route(route, check.data["segments"])
    rng = np.random.default_rng(seed)
    odometry = _noisy_odometry(poses, noise, rng)
    pressure = _pressure_stream(poses, window, p_cri, noise.pressure_sigma, rng)

    tracker = FloorTracker()
    floors = [update_floor(tracker, p.z - poses[0].z, baro) for p in poses]
    truth = [Pose3.from_xyz_yaw(p.x, p.y, p.z, p.yaw) for p in poses]

    scans: Dict[int, Scan] = {}
    if with_scans:
        threshold = ElevatorDetectConfig().range_sq_threshold
        narrow = []
        for node_id, pose in enumerate(poses):
            if pose.in_cab:
                cab = next(e for e in spec.elevators if e.contains_xy(pose.x, pose.y))
                scan = cab_interior_scan(
                    cab.half_extents, sensor_height, CAB_HEIGHT - sensor_height, rng,
                    noise.range_sigma, node_id=node_id, t=pose.t,
                )
            else:
                sensor = np.array([pose.x, pose.y, pose.z + sensor_height])
                scan = simulate_scan(geometry, sensor, pose.yaw, rng, noise.range_sigma, node_id=node_id, t=pose.t)
                if len(scan) and mean_squared_range(scan) < threshold:
                    narrow.append(node_id)
            scans[node_id] = scan
        if narrow:
            logger.warning(f"{len(narrow)} corridor scans look like cab interiors: {narrow[:10]}")

    manifest = SessionManifest(
        p_cri=p_cri,
        window=window,
        seed=seed,
        poses=len(poses),
        pressure_samples=len(pressure),
        scans=len(scans),
        elevators=len(spec.elevators),
        floors=spec.floors,
        floor_height=spec.floor_height,
        sensor_height=sensor_height,
    )
    logger.info(f"Generated session: {len(poses)} poses, {len(pressure)} pressure samples, {len(scans)} scans")
    return Session(
        manifest=manifest,
        times=[p.t for p in poses],
        in_cab=[p.in_cab for p in poses],
        ground_truth=truth,
        floors=floors,
        odometry=odometry,
        pressure=pressure,
        scans=scans,
        truth_voxels=truth_voxels,
    )


def generate_from_request(request: GenerateRequest, seed: int) -> Session:
    return generate_session(
        request.building,
        request.route,
        request.noise,
        seed=seed,
        window=request.window,
        p_cri=request.p_cri,
        sensor_height=request.sensor_height,
        with_scans=request.with_scans,
    )
