"""
Map Cloud Store

World-frame map cloud as CSV with header `x,y,z,source`, where source is one
of ground, elevator, other.
"""

import csv
import logging
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np

from ..errors import InvalidInputError
from ..models import SourceClass

logger = logging.getLogger(__name__)

CLOUD_HEADER = ["x", "y", "z", "source"]


class CloudStore:
    """Reads and writes classified map clouds."""

    def save(self, points: np.ndarray, sources: Sequence[SourceClass], path: Union[str, Path]) -> None:
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        if len(points) != len(sources):
            raise InvalidInputError("one source class per point is required")
        path = Path(path)
        with path.open("w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(CLOUD_HEADER)
            for (x, y, z), source in zip(points, sources):
                writer.writerow([repr(float(x)), repr(float(y)), repr(float(z)), SourceClass(source).value])
        logger.info(f"Wrote {len(points)} map points to {path}")

    def load(self, path: Union[str, Path]) -> Tuple[np.ndarray, List[SourceClass]]:
        """
        Returns:
            ((N, 3) points, source class per point)

        Raises:
            InvalidInputError: missing file, wrong header or malformed row
        """
        path = Path(path)
        if not path.is_file():
            raise InvalidInputError(f"map cloud not found: {path}")
        points, sources = [], []
        with path.open(newline="") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if header != CLOUD_HEADER:
                raise InvalidInputError(f"{path}: expected header {','.join(CLOUD_HEADER)}")
            for row_no, row in enumerate(reader, start=2):
                if not row:
                    continue
                try:
                    points.append((float(row[0]), float(row[1]), float(row[2])))
                    sources.append(SourceClass(row[3].strip()))
                except (ValueError, IndexError) as e:
                    raise InvalidInputError(f"{path} line {row_no}: {e}") from e
        return np.array(points, dtype=float).reshape(-1, 3), sources
