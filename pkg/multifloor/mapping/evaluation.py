"""
Mapping Evaluation

Metrics comparing a mapped session with its ground truth:
- same_floor_z_stats: spread of pose z within each floor
- elevation_change_error: error of the estimated height between consecutive floors
- z_rmse: optimized z against ground truth re-anchored at node 0
- loop_detection_report: precision and query cost of the loop database
"""

import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel

from ..config import LoopDbConfig
from ..errors import InvalidInputError
from ..models import Scan
from .loopdet import LoopDatabase, make_descriptor

logger = logging.getLogger(__name__)


def _check_lengths(z: Sequence[float], labels: Sequence[int]) -> Tuple[np.ndarray, np.ndarray]:
    z = np.asarray(z, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if len(z) != len(labels):
        raise InvalidInputError(f"{len(z)} heights but {len(labels)} floor labels")
    if len(z) == 0:
        raise InvalidInputError("no poses to evaluate")
    return z, labels


def same_floor_z_stats(z: Sequence[float], labels: Sequence[int]) -> Dict[int, Tuple[float, float]]:
    """Per-floor (mean, standard deviation) of pose z."""
    z, labels = _check_lengths(z, labels)
    return {
        int(floor): (float(z[labels == floor].mean()), float(z[labels == floor].std()))
        for floor in np.unique(labels)
    }


def elevation_change_error(z: Sequence[float], labels: Sequence[int], truth_gap: float) -> Tuple[float, float]:
    """
    Mean and standard deviation of |estimated gap - truth_gap| over poses.

    Every pose on floor f + 1 contributes its height above the mean z of
    floor f.

    Raises:
        InvalidInputError: no two consecutive floors visited
    """
    z, labels = _check_lengths(z, labels)
    stats = same_floor_z_stats(z, labels)
    errors: List[float] = []
    for floor in sorted(stats):
        if floor - 1 in stats:
            base = stats[floor - 1][0]
            errors.extend(np.abs(z[labels == floor] - base - truth_gap))
    if not errors:
        raise InvalidInputError("elevation change needs poses on two consecutive floors")
    errors = np.asarray(errors)
    return float(errors.mean()), float(errors.std())


def z_rmse(estimated_z: Sequence[float], truth_z: Sequence[float]) -> float:
    """RMSE after shifting the ground truth so node 0 sits at z = 0."""
    estimated = np.asarray(estimated_z, dtype=float)
    truth = np.asarray(truth_z, dtype=float)
    if len(estimated) != len(truth) or len(truth) == 0:
        raise InvalidInputError(f"cannot compare {len(estimated)} estimates with {len(truth)} ground-truth poses")
    return float(np.sqrt(np.mean((estimated - (truth - truth[0])) ** 2)))


class LoopDetectionReport(BaseModel):
    use_floor_labels: bool
    queries: int
    true_positives: int
    false_positives: int
    precision: float
    comparisons: int
    mean_query_ms: float


class LabeledScan(BaseModel):
    """Scan with the floor label and planar position used to judge matches."""
    scan: Scan
    floor: int
    position: Tuple[float, float]


def loop_detection_report(
    database: Sequence[LabeledScan],
    queries: Sequence[LabeledScan],
    cfg: Optional[LoopDbConfig] = None,
    use_floor_labels: bool = True,
    max_distance: float = 2.0,
) -> LoopDetectionReport:
    """
    Fills a loop database and runs every query against it.

    A returned candidate is a true positive when it lies on the query's floor
    within max_distance meters in the plane, a false positive otherwise.
    Query node ids must stay an exclusion gap away from the database ids.
    """
    cfg = cfg or LoopDbConfig()
    db = LoopDatabase(cfg)
    by_id: Dict[int, LabeledScan] = {}
    for item in database:
        db.insert(item.scan.node_id, item.floor, make_descriptor(item.scan, cfg, item.floor))
        by_id[item.scan.node_id] = item

    tp = fp = 0
    for item in queries:
        descriptor = make_descriptor(item.scan, cfg, item.floor)
        candidate = db.query(descriptor, item.floor, use_floor_labels=use_floor_labels)
        if candidate is None:
            continue
        match = by_id[candidate.match_id]
        distance = float(np.hypot(match.position[0] - item.position[0], match.position[1] - item.position[1]))
        if match.floor == item.floor and distance <= max_distance:
            tp += 1
        else:
            fp += 1

    detections = tp + fp
    report = LoopDetectionReport(
        use_floor_labels=use_floor_labels,
        queries=len(queries),
        true_positives=tp,
        false_positives=fp,
        precision=tp / detections if detections else 0.0,
        comparisons=db.comparisons,
        mean_query_ms=db.mean_query_ms(),
    )
    logger.info(
        f"Loop detection ({'with' if use_floor_labels else 'without'} floor labels): "
        f"precision {report.precision:.2f}, {tp} TP / {fp} FP over {len(queries)} queries"
    )
    return report
