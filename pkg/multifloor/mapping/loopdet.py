"""
Floor-Labeled Loop Detection

Scan-context place recognition with one ring-key tree per floor label:
- make_descriptor: polar max-height grid of a scan
- descriptor_distance: column-shift-aligned cosine distance
- LoopDatabase: per-floor ring-key trees, insert / query
- estimate_relative_pose: yaw-seeded planar ICP for accepted candidates

Searching only the tree of the query's floor keeps structurally identical
floors from matching each other.
"""

import logging
import threading
import time
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy.spatial import cKDTree

from ..config import LoopDbConfig
from ..errors import InvalidInputError, RejectedLoopError
from ..models import LoopCandidate, PlanarTransform, Scan
from .icp import align_planar, voxel_downsample

logger = logging.getLogger(__name__)

# Scan alignment keeps near-horizontal returns clear of the floor
GROUND_CLEARANCE = 0.15
MAX_ALIGN_ELEVATION = np.deg2rad(6.0)


class ScanContext(BaseModel):
    """N_r x N_s max-height descriptor of one scan plus its floor label."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    m: np.ndarray
    floor: int = 0
    node_id: int = 0

    @property
    def shape(self) -> Tuple[int, int]:
        return self.m.shape


class RingKey(BaseModel):
    """Rotation-invariant summary: fraction of occupied sectors per ring."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    v: np.ndarray

    @classmethod
    def of(cls, descriptor: ScanContext) -> "RingKey":
        return cls(v=(descriptor.m > 0).mean(axis=1))


def make_descriptor(scan: Scan, cfg: LoopDbConfig, floor: int) -> ScanContext:
    """
    Bins a scan into rings (radius) and sectors (azimuth).

    Each bin keeps the highest point z plus the sensor height, floored at 0;
    empty bins are 0 and points beyond l_max are discarded.

    Raises:
        InvalidInputError: empty scan
    """
    scan.require_points()
    points = scan.points
    radius = np.hypot(points[:, 0], points[:, 1])
    keep = radius <= cfg.l_max
    points, radius = points[keep], radius[keep]

    azimuth = np.mod(np.arctan2(points[:, 1], points[:, 0]), 2.0 * np.pi)
    rings = np.minimum((radius / cfg.l_max * cfg.n_rings).astype(int), cfg.n_rings - 1)
    sectors = np.minimum((azimuth / (2.0 * np.pi) * cfg.n_sectors).astype(int), cfg.n_sectors - 1)
    heights = np.maximum(points[:, 2] + cfg.sensor_height, 0.0)

    m = np.zeros((cfg.n_rings, cfg.n_sectors))
    np.maximum.at(m, (rings, sectors), heights)
    return ScanContext(m=m, floor=floor, node_id=scan.node_id)


def descriptor_distance(a: ScanContext, b: ScanContext) -> Tuple[float, int]:
    """
    Smallest mean column cosine distance over cyclic column shifts of b.

    Columns empty in both descriptors are left out of the mean; a column empty
    on one side only counts as distance 1.

    Returns:
        (distance in [0, 1], shift s such that b's column c + s pairs with a's column c)

    Raises:
        InvalidInputError: descriptors of different shape
    """
    if a.m.shape != b.m.shape:
        raise InvalidInputError(f"descriptor shapes differ: {a.m.shape} vs {b.m.shape}")
    n_sectors = a.m.shape[1]
    shifts = (np.arange(n_sectors)[None, :] + np.arange(n_sectors)[:, None]) % n_sectors
    shifted = b.m[:, shifts]  # [ring, shift, column]

    norm_a = np.linalg.norm(a.m, axis=0)                      # [column]
    norm_b = np.linalg.norm(b.m, axis=0)[shifts]              # [shift, column]
    dots = np.einsum("rc,rsc->sc", a.m, shifted)
    denom = norm_a[None, :] * norm_b
    similarity = np.divide(dots, denom, out=np.zeros_like(dots), where=denom > 0)

    counted = (norm_a[None, :] > 0) | (norm_b > 0)
    n_counted = counted.sum(axis=1)
    totals = np.where(counted, 1.0 - similarity, 0.0).sum(axis=1)
    distances = np.divide(totals, n_counted, out=np.zeros(n_sectors), where=n_counted > 0)

    best = int(np.argmin(distances))
    return float(np.clip(distances[best], 0.0, 1.0)), best


class _RingKeyTree:
    """Ring keys of one label; the KD-tree is rebuilt lazily after inserts."""

    def __init__(self):
        self.node_ids: List[int] = []
        self.keys: List[np.ndarray] = []
        self._tree: Optional[cKDTree] = None

    def add(self, node_id: int, key: np.ndarray) -> None:
        self.node_ids.append(node_id)
        self.keys.append(key)
        self._tree = None

    def nearest(self, key: np.ndarray, k: int) -> List[int]:
        if not self.node_ids:
            return []
        if self._tree is None:
            self._tree = cKDTree(np.vstack(self.keys))
        k = min(k, len(self.node_ids))
        _, idx = self._tree.query(key, k=k)
        return [self.node_ids[i] for i in np.atleast_1d(idx)]

    def __len__(self) -> int:
        return len(self.node_ids)


class LoopDatabase:
    """
    Descriptor store with one ring-key tree per floor label.

    A flat tree over every node is kept alongside so the unlabeled search can
    be compared against the labeled one.
    """

    def __init__(self, cfg: LoopDbConfig):
        self.cfg = cfg
        self.trees: Dict[int, _RingKeyTree] = {}
        self.all_nodes = _RingKeyTree()
        self.descriptors: Dict[int, ScanContext] = {}
        self.comparisons = 0
        self.query_seconds = 0.0
        self.queries = 0
        self._lock = threading.RLock()

    def insert(self, node_id: int, floor: int, descriptor: ScanContext) -> None:
        """
        Stores a descriptor and files its ring key under `floor`.

        Raises:
            InvalidInputError: node_id already present
        """
        with self._lock:
            if node_id in self.descriptors:
                raise InvalidInputError(f"node {node_id} already in the loop database")
            if descriptor.m.shape != (self.cfg.n_rings, self.cfg.n_sectors):
                raise InvalidInputError(f"descriptor shape {descriptor.m.shape} does not match the database")
            stored = descriptor.model_copy(update={"floor": floor, "node_id": node_id})
            key = RingKey.of(stored).v
            self.descriptors[node_id] = stored
            self.trees.setdefault(floor, _RingKeyTree()).add(node_id, key)
            self.all_nodes.add(node_id, key)

    def query(self, descriptor: ScanContext, floor: int, use_floor_labels: Optional[bool] = None) -> Optional[LoopCandidate]:
        """
        Best revisit candidate for a descriptor, or None.

        Searches the floor's tree (or every node when labels are off) for the
        top_k nearest ring keys outside the exclusion gap and accepts the one
        with the smallest descriptor distance if it is below accept_threshold.
        """
        if use_floor_labels is None:
            use_floor_labels = self.cfg.use_floor_labels
        started = time.perf_counter()
        with self._lock:
            tree = self.trees.get(floor) if use_floor_labels else self.all_nodes
            candidate = self._search(tree, descriptor, floor) if tree is not None else None
        self.query_seconds += time.perf_counter() - started
        self.queries += 1
        return candidate

    def _search(self, tree: _RingKeyTree, descriptor: ScanContext, floor: int) -> Optional[LoopCandidate]:
        cfg = self.cfg
        key = RingKey.of(descriptor).v
        nearest = tree.nearest(key, cfg.top_k + 2 * cfg.exclusion_gap)
        eligible = [n for n in nearest if abs(n - descriptor.node_id) >= cfg.exclusion_gap][:cfg.top_k]

        best: Optional[LoopCandidate] = None
        for node_id in eligible:
            stored = self.descriptors[node_id]
            distance, shift = descriptor_distance(descriptor, stored)
            self.comparisons += 1
            if best is None or (distance, node_id) < (best.distance, best.match_id):
                best = LoopCandidate(
                    query_id=descriptor.node_id,
                    match_id=node_id,
                    distance=distance,
                    shift=shift,
                    query_floor=floor,
                    match_floor=stored.floor,
                )
        if best is not None and best.distance < cfg.accept_threshold:
            logger.debug(f"Loop candidate {best.query_id}->{best.match_id} d={best.distance:.3f}")
            return best
        return None

    def tree_size(self, floor: int) -> int:
        tree = self.trees.get(floor)
        return len(tree) if tree is not None else 0

    def mean_query_ms(self) -> float:
        return 1000.0 * self.query_seconds / self.queries if self.queries else 0.0


def insert(db: LoopDatabase, node_id: int, floor: int, descriptor: ScanContext) -> None:
    db.insert(node_id, floor, descriptor)


def query(db: LoopDatabase, descriptor: ScanContext, floor: int, cfg: Optional[LoopDbConfig] = None) -> Optional[LoopCandidate]:
    use_labels = cfg.use_floor_labels if cfg is not None else None
    return db.query(descriptor, floor, use_floor_labels=use_labels)


def _structure_points(scan: Scan, cfg: LoopDbConfig) -> np.ndarray:
    """x, y of wall returns; floor and ceiling hits ring the sensor and move with it."""
    points = scan.points
    horizontal = np.hypot(points[:, 0], points[:, 1])
    above_floor = points[:, 2] > GROUND_CLEARANCE - cfg.sensor_height
    level = np.abs(points[:, 2]) <= np.tan(MAX_ALIGN_ELEVATION) * horizontal
    return points[above_floor & level, :2]


def estimate_relative_pose(scan_q: Scan, scan_m: Scan, shift: int, cfg: LoopDbConfig) -> PlanarTransform:
    """
    Pose of the query sensor in the match sensor's frame.

    The yaw is seeded with shift * 2*pi / N_s and refined with planar ICP on
    z-flattened, voxel-downsampled clouds; the result maps query points onto
    match points.

    Raises:
        InvalidInputError: empty scan
        RejectedLoopError: alignment RMS above icp_max_rms
    """
    scan_q.require_points()
    scan_m.require_points()
    source = voxel_downsample(_structure_points(scan_q, cfg), cfg.icp_voxel_size)
    target = voxel_downsample(_structure_points(scan_m, cfg), cfg.icp_voxel_size)
    if len(source) < 3 or len(target) < 3:
        raise RejectedLoopError(f"too little structure to align {scan_q.node_id}->{scan_m.node_id}", float("inf"))
    seed_yaw = shift * 2.0 * np.pi / cfg.n_sectors

    rot, trans, rms = align_planar(
        source,
        target,
        initial_yaw=seed_yaw,
        max_iterations=cfg.icp_max_iterations,
        max_correspondence=cfg.icp_max_correspondence,
    )
    if not rms <= cfg.icp_max_rms:
        raise RejectedLoopError(f"scan alignment {scan_q.node_id}->{scan_m.node_id} rms {rms:.3f} m too large", rms)
    dyaw = float(np.arctan2(rot[1, 0], rot[0, 0]))
    return PlanarTransform(dx=float(trans[0]), dy=float(trans[1]), dyaw=dyaw, rms=rms)
