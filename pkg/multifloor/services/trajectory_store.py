"""
Trajectory Store

Planned trajectories as CSV with header `t_s,x,y,z,mode,leg`.
"""

import csv
import logging
from pathlib import Path
from typing import List, NamedTuple, Union

from ..errors import InvalidInputError
from ..models import MoveMode
from ..planning.planner import Trajectory

logger = logging.getLogger(__name__)

TRAJECTORY_HEADER = ["t_s", "x", "y", "z", "mode", "leg"]


class TrajectoryRow(NamedTuple):
    """One waypoint as read back from a trajectory file."""
    time: float
    x: float
    y: float
    z: float
    mode: MoveMode
    leg: int


class TrajectoryStore:
    """Reads and writes trajectory CSV files."""

    def save(self, trajectory: Trajectory, path: Union[str, Path]) -> None:
        path = Path(path)
        with path.open("w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(TRAJECTORY_HEADER)
            for w in trajectory.waypoints:
                x, y, z = w.position
                writer.writerow([repr(float(w.time)), repr(float(x)), repr(float(y)), repr(float(z)), w.mode.value, w.leg])
        logger.info(f"Wrote {len(trajectory.waypoints)} waypoints to {path}")

    def load(self, path: Union[str, Path]) -> List[TrajectoryRow]:
        path = Path(path)
        if not path.is_file():
            raise InvalidInputError(f"trajectory not found: {path}")
        rows = []
        with path.open(newline="") as f:
            reader = csv.reader(f)
            if next(reader, None) != TRAJECTORY_HEADER:
                raise InvalidInputError(f"{path}: expected header {','.join(TRAJECTORY_HEADER)}")
            for row_no, row in enumerate(reader, start=2):
                if not row:
                    continue
                try:
                    rows.append(TrajectoryRow(
                        float(row[0]), float(row[1]), float(row[2]), float(row[3]), MoveMode(row[4]), int(row[5]),
                    ))
                except (ValueError, IndexError) as e:
                    raise InvalidInputError(f"{path} line {row_no}: {e}") from e
        return rows
