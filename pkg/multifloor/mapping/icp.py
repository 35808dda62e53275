"""
Planar ICP

Point-to-point iterative closest point on z-flattened clouds, used to turn a
scan-context match into a metric loop constraint.
"""

import logging
from typing import Tuple

import numpy as np
from scipy.spatial import cKDTree

logger = logging.getLogger(__name__)


def voxel_downsample(points: np.ndarray, voxel_size: float) -> np.ndarray:
    """Replaces the points of each occupied grid cell by their centroid."""
    if len(points) == 0:
        return points
    keys = np.floor(points / voxel_size).astype(np.int64)
    _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    sums = np.zeros((len(counts), points.shape[1]))
    np.add.at(sums, inverse, points)
    return sums / counts[:, None]


def rotation_2d(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def _best_rigid_2d(source: np.ndarray, target: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Least-squares rotation and translation taking source onto target (Kabsch)."""
    mu_s = source.mean(axis=0)
    mu_t = target.mean(axis=0)
    cov = (source - mu_s).T @ (target - mu_t)
    u, _, vt = np.linalg.svd(cov)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    rot = vt.T @ np.diag([1.0, d]) @ u.T
    return rot, mu_t - rot @ mu_s


def align_planar(
    source: np.ndarray,
    target: np.ndarray,
    initial_yaw: float = 0.0,
    initial_translation: Tuple[float, float] = (0.0, 0.0),
    max_iterations: int = 30,
    max_correspondence: float = 2.0,
) -> Tuple[np.ndarray, np.ndarray, float]:
    """
    Aligns 2-D source points onto target points.

    Args:
        source: (N, 2) points to move
        target: (M, 2) fixed points
        initial_yaw: Rotation seed in radians
        initial_translation: Translation seed
        max_iterations: Iteration cap
        max_correspondence: Pairs farther apart than this are ignored

    Returns:
        (rotation 2x2, translation 2, RMS distance of the final inlier pairs);
        the RMS is inf when no pair is within max_correspondence
    """
    tree = cKDTree(target)
    rot = rotation_2d(initial_yaw)
    trans = np.asarray(initial_translation, dtype=float)
    rms = float("inf")

    for iteration in range(max_iterations):
        moved = source @ rot.T + trans
        dists, idx = tree.query(moved)
        inliers = dists <= max_correspondence
        if inliers.sum() < 3:
            rms = float("inf")
            break
        step_rot, step_trans = _best_rigid_2d(moved[inliers], target[idx[inliers]])
        rot = step_rot @ rot
        trans = step_rot @ trans + step_trans
        change = abs(np.arctan2(step_rot[1, 0], step_rot[0, 0])) + np.linalg.norm(step_trans)
        if change < 1e-9:
            break

    moved = source @ rot.T + trans
    dists, _ = tree.query(moved)
    inliers = dists <= max_correspondence
    if inliers.sum() >= 3:
        rms = float(np.sqrt(np.mean(dists[inliers] ** 2)))
    logger.debug(f"ICP finished after {iteration + 1} iterations, rms={rms:.4f}")
    return rot, trans, rms
