"""
Session Store

Reads and writes the session directory exchanged between the generate, map
and evaluate commands.

Directory layout:
    manifest.txt       key=value lines (p_cri, window, seed, counts, geometry)
    pressure.csv       t_s,pressure_pa
    odometry.csv       i,j,dx,dy,dz,dqx,dqy,dqz,dqw
    pose_times.csv     id,t_s,in_cab
    scan_<id>.csv      x,y,z,channel (one file per pose with a scan)
    ground_truth.csv   id,x,y,z,qx,qy,qz,qw,floor
    truth_voxels.txt   voxel-map format (optional)

Features:
- Floats written with repr, so the same session always yields identical bytes
- Missing or malformed required files raise InvalidInputError naming the file
"""

import csv
import logging
import re
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Union

import numpy as np
from pydantic import ValidationError

from ..errors import InvalidInputError
from ..models import Pose3, PressureSample, Scan
from ..synth.session import OdometryDelta, Session, SessionManifest
from .voxel_store import VoxelMapStore

logger = logging.getLogger(__name__)

MANIFEST_FILE = "manifest.txt"
PRESSURE_FILE = "pressure.csv"
ODOMETRY_FILE = "odometry.csv"
POSE_TIMES_FILE = "pose_times.csv"
GROUND_TRUTH_FILE = "ground_truth.csv"
TRUTH_VOXELS_FILE = "truth_voxels.txt"

PRESSURE_HEADER = ["t_s", "pressure_pa"]
ODOMETRY_HEADER = ["i", "j", "dx", "dy", "dz", "dqx", "dqy", "dqz", "dqw"]
POSE_TIMES_HEADER = ["id", "t_s", "in_cab"]
SCAN_HEADER = ["x", "y", "z", "channel"]
GROUND_TRUTH_HEADER = ["id", "x", "y", "z", "qx", "qy", "qz", "qw", "floor"]

SCAN_PATTERN = re.compile(r"^scan_(\d+)\.csv$")


def _num(value: float) -> str:
    return repr(float(value))


def _write_csv(path: Path, header: List[str], rows: Iterable[Sequence]) -> None:
    with path.open("w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _read_csv(path: Path, header: List[str]) -> List[List[str]]:
    if not path.is_file():
        raise InvalidInputError(f"session file missing: {path.name}")
    with path.open(newline="") as f:
        reader = csv.reader(f)
        if next(reader, None) != header:
            raise InvalidInputError(f"{path.name}: expected header {','.join(header)}")
        rows = [row for row in reader if row]
    for row_no, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise InvalidInputError(f"{path.name} line {row_no}: expected {len(header)} fields, got {len(row)}")
    return rows


class SessionStore:
    """
    Persists Session objects under one directory.

    write() creates the directory if needed and overwrites existing files;
    read() rebuilds the Session with scans keyed by node id.
    """

    def __init__(self, directory: Union[str, Path]):
        """
        Initialize session store.

        Args:
            directory: Session directory path
        """
        self.directory = Path(directory)
        self.voxels = VoxelMapStore()

    # ============================================
    # WRITE
    # ============================================

    def write(self, session: Session) -> None:
        self.directory.mkdir(parents=True, exist_ok=True)
        d = self.directory

        manifest = session.manifest.model_dump()
        (d / MANIFEST_FILE).write_text(
            "".join(f"{key}={_num(v) if isinstance(v, float) else v}\n" for key, v in manifest.items())
        )
        _write_csv(d / PRESSURE_FILE, PRESSURE_HEADER, ([_num(s.t), _num(s.p)] for s in session.pressure))
        _write_csv(d / ODOMETRY_FILE, ODOMETRY_HEADER, (
            [o.i, o.j, *(_num(v) for v in o.rel.translation), *(_num(v) for v in o.rel.quaternion)]
            for o in session.odometry
        ))
        _write_csv(d / POSE_TIMES_FILE, POSE_TIMES_HEADER, (
            [n, _num(t), int(cab)] for n, (t, cab) in enumerate(zip(session.times, session.in_cab))
        ))
        _write_csv(d / GROUND_TRUTH_FILE, GROUND_TRUTH_HEADER, (
            [n, *(_num(v) for v in pose.translation), *(_num(v) for v in pose.quaternion), floor]
            for n, (pose, floor) in enumerate(zip(session.ground_truth, session.floors))
        ))
        for node_id, scan in sorted(session.scans.items()):
            _write_csv(d / f"scan_{node_id}.csv", SCAN_HEADER, (
                [_num(x), _num(y), _num(z), int(c)] for (x, y, z), c in zip(scan.points, scan.channels)
            ))
        if session.truth_voxels is not None:
            self.voxels.save(session.truth_voxels, d / TRUTH_VOXELS_FILE)
        logger.info(f"Wrote session with {len(session)} poses to {d}")

    # ============================================
    # READ
    # ============================================

    def _read_manifest(self) -> SessionManifest:
        path = self.directory / MANIFEST_FILE
        if not path.is_file():
            raise InvalidInputError(f"session file missing: {MANIFEST_FILE}")
        values: Dict[str, str] = {}
        for line_no, line in enumerate(path.read_text().splitlines(), start=1):
            if not line.strip():
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise InvalidInputError(f"{MANIFEST_FILE} line {line_no}: expected key=value")
            values[key.strip()] = value.strip()
        try:
            return SessionManifest(**values)
        except ValidationError as e:
            raise InvalidInputError(f"invalid {MANIFEST_FILE}: {e}") from e

    def _read_scans(self, times: List[float]) -> Dict[int, Scan]:
        scans: Dict[int, Scan] = {}
        for path in sorted(self.directory.iterdir()):
            match = SCAN_PATTERN.match(path.name)
            if not match:
                continue
            node_id = int(match.group(1))
            rows = _read_csv(path, SCAN_HEADER)
            try:
                points = np.array([[float(r[0]), float(r[1]), float(r[2])] for r in rows], dtype=float)
                channels = np.array([int(r[3]) for r in rows], dtype=int)
                t = times[node_id] if node_id < len(times) else 0.0
                scans[node_id] = Scan.from_points(points, channels, node_id=node_id, t=t)
            except (ValueError, ValidationError) as e:
                raise InvalidInputError(f"{path.name}: {e}") from e
        return scans

    def read(self) -> Session:
        """
        Loads a session directory.

        Raises:
            InvalidInputError: directory, manifest, pressure, odometry or pose
                times missing; malformed rows; counts disagreeing with the manifest
        """
        if not self.directory.is_dir():
            raise InvalidInputError(f"session directory not found: {self.directory}")
        d = self.directory
        manifest = self._read_manifest()

        try:
            pressure = [
                PressureSample(t=float(t), p=float(p)) for t, p in _read_csv(d / PRESSURE_FILE, PRESSURE_HEADER)
            ]
            odometry = [
                OdometryDelta(
                    i=int(r[0]), j=int(r[1]),
                    rel=Pose3(translation=tuple(float(v) for v in r[2:5]), quaternion=tuple(float(v) for v in r[5:9])),
                )
                for r in _read_csv(d / ODOMETRY_FILE, ODOMETRY_HEADER)
            ]
            timing = _read_csv(d / POSE_TIMES_FILE, POSE_TIMES_HEADER)
            times = [float(r[1]) for r in timing]
            in_cab = [r[2].strip() == "1" for r in timing]

            ground_truth: List[Pose3] = []
            floors: List[int] = []
            if (d / GROUND_TRUTH_FILE).is_file():
                for r in _read_csv(d / GROUND_TRUTH_FILE, GROUND_TRUTH_HEADER):
                    ground_truth.append(Pose3(
                        translation=tuple(float(v) for v in r[1:4]),
                        quaternion=tuple(float(v) for v in r[4:8]),
                    ))
                    floors.append(int(r[8]))
        except (ValueError, ValidationError) as e:
            raise InvalidInputError(f"malformed session data: {e}") from e

        if len(times) != manifest.poses:
            raise InvalidInputError(f"{POSE_TIMES_FILE} has {len(times)} poses, manifest says {manifest.poses}")
        if len(odometry) != max(manifest.poses - 1, 0):
            raise InvalidInputError(f"{ODOMETRY_FILE} has {len(odometry)} deltas for {manifest.poses} poses")
        if not pressure:
            raise InvalidInputError(f"{PRESSURE_FILE} has no samples")

        scans = self._read_scans(times)
        truth_voxels = None
        if (d / TRUTH_VOXELS_FILE).is_file():
            truth_voxels = self.voxels.load(d / TRUTH_VOXELS_FILE)

        logger.info(f"Read session {d}: {len(times)} poses, {len(pressure)} pressure samples, {len(scans)} scans")
        return Session(
            manifest=manifest,
            times=times,
            in_cab=in_cab,
            ground_truth=ground_truth,
            floors=floors,
            odometry=odometry,
            pressure=pressure,
            scans=scans,
            truth_voxels=truth_voxels,
        )
