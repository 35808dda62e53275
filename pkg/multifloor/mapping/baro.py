"""
Barometric Altitude

Converts pressure streams into altitude changes with the international
pressure equation and tracks a discrete floor index from them.

The floor index is used as the loop-detection label; the altitude changes
become elevation constraints in the pose graph.
"""

import logging
from typing import List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel

from ..config import BaroConfig
from ..errors import DomainError, InvalidInputError
from ..models import PressureSample

logger = logging.getLogger(__name__)

# International pressure equation constants
ALTITUDE_SCALE = 44330.0
PRESSURE_EXPONENT = 5.255


class FloorTracker(BaseModel):
    """
    Running floor estimate for one session.

    z_ref_of_floor is the altitude change recorded at the last floor change.
    """
    current_floor: int = 0
    z_ref_of_floor: float = 0.0


def estimate_delta_z(window: Sequence[float], p_cri: float) -> float:
    """
    Altitude change relative to the reference pressure.

    Args:
        window: Consecutive pressure samples in pascals; their mean is used
        p_cri: Reference pressure measured at the starting position

    Returns:
        Altitude change in meters, positive for ascent

    Raises:
        InvalidInputError: empty window or non-positive pressure
    """
    values = np.asarray(window, dtype=float)
    if values.size == 0:
        raise InvalidInputError("pressure window is empty")
    if p_cri <= 0 or np.any(values <= 0):
        raise InvalidInputError("pressures must be positive")
    mean = float(values.mean())
    return ALTITUDE_SCALE * (1.0 - (mean / p_cri) ** (1.0 / PRESSURE_EXPONENT))


def pressure_for_altitude(delta_z: float, p_cri: float) -> float:
    """
    Inverse of estimate_delta_z: pressure observed delta_z meters above the reference.

    Raises:
        DomainError: delta_z at or above 44330 m
        InvalidInputError: non-positive reference pressure
    """
    if delta_z >= ALTITUDE_SCALE:
        raise DomainError(f"altitude {delta_z} m outside the pressure equation's domain")
    if p_cri <= 0:
        raise InvalidInputError("reference pressure must be positive")
    return p_cri * (1.0 - delta_z / ALTITUDE_SCALE) ** PRESSURE_EXPONENT


def update_floor(tracker: FloorTracker, delta_z: float, cfg: BaroConfig) -> int:
    """
    Advances the floor tracker with a new altitude change.

    When the altitude has moved more than floor_threshold away from the value
    recorded at the last floor change, the floor moves by one in the direction
    of motion and the reference resets to the current altitude. A reversal of
    at least the threshold is needed to undo a change.

    Args:
        tracker: Tracker state, mutated in place
        delta_z: Altitude change relative to the session start
        cfg: Threshold source

    Returns:
        The updated floor index
    """
    while abs(delta_z - tracker.z_ref_of_floor) > cfg.floor_threshold:
        step = 1 if delta_z > tracker.z_ref_of_floor else -1
        tracker.current_floor += step
        tracker.z_ref_of_floor = delta_z
        logger.debug(f"Floor change to {tracker.current_floor} at dz={delta_z:.3f} m")
    return tracker.current_floor


# ============================================
# SESSION-LEVEL HELPERS
# ============================================

def moving_average_windows(
    samples: Sequence[PressureSample],
    times: Sequence[float],
    window: int,
) -> List[np.ndarray]:
    """
    Trailing pressure window for each query time.

    Each window holds the last `window` samples with t <= the query time; with
    fewer samples available, all of them. A query before the first sample gets
    the first sample alone.
    """
    if not samples:
        raise InvalidInputError("pressure stream is empty")
    stamps = np.array([s.t for s in samples])
    pressures = np.array([s.p for s in samples])
    if np.any(np.diff(stamps) < 0):
        raise InvalidInputError("pressure samples are not ordered in time")
    ends = np.searchsorted(stamps, np.asarray(times, dtype=float), side="right")
    windows = []
    for end in ends:
        end = max(int(end), 1)
        windows.append(pressures[max(0, end - window):end])
    return windows


def delta_z_series(
    samples: Sequence[PressureSample],
    times: Sequence[float],
    cfg: BaroConfig,
) -> np.ndarray:
    """Altitude change at each query time from trailing-window means."""
    windows = moving_average_windows(samples, times, cfg.window)
    return np.array([estimate_delta_z(w, cfg.p_cri) for w in windows])


def floor_labels(delta_zs: Sequence[float], cfg: BaroConfig) -> List[int]:
    """Runs a fresh FloorTracker over a whole session, one label per pose."""
    tracker = FloorTracker()
    labels = [update_floor(tracker, float(dz), cfg) for dz in delta_zs]
    logger.info(f"Floor labels span {min(labels)}..{max(labels)} over {len(labels)} poses")
    return labels


def floor_transitions(labels: Sequence[int], times: Sequence[float]) -> List[Tuple[float, int, int]]:
    """Lists (time, from_floor, to_floor) for each label change."""
    events = []
    for i in range(1, len(labels)):
        if labels[i] != labels[i - 1]:
            events.append((float(times[i]), int(labels[i - 1]), int(labels[i])))
    return events
