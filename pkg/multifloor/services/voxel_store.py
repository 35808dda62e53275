"""
Voxel Map Store

Reads and writes the voxel-map text file.

Format (whitespace-separated, LF-terminated):
    resolution <f>
    origin <x> <y> <z>
    elevator <id> <i> <j> <kmin> <kmax> <initial_z>   (one per elevator)
    <i> <j> <k> <C|S|E>                              (one per voxel)

Features:
- Canonical output: elevators sorted by id, voxels sorted by (i, j, k)
- Floats written with repr, so load followed by save is byte-identical
- Line-numbered errors for malformed files
"""

import logging
from pathlib import Path
from typing import Dict, List, Union

from pydantic import ValidationError

from ..errors import InvalidInputError
from ..models import Index3, VoxelClass
from ..planning.voxel import ElevatorInfo, VoxelMap

logger = logging.getLogger(__name__)


def _num(value: float) -> str:
    return repr(float(value))


class VoxelMapStore:
    """Serializes VoxelMap objects to the voxel-map text format."""

    def dumps(self, voxel_map: VoxelMap) -> str:
        lines = [
            f"resolution {_num(voxel_map.resolution)}",
            "origin " + " ".join(_num(v) for v in voxel_map.origin),
        ]
        for e in sorted(voxel_map.elevators, key=lambda e: e.id):
            lines.append(
                f"elevator {e.id} {e.column[0]} {e.column[1]} {e.k_min} {e.k_max} {_num(e.initial_z)}"
            )
        for (i, j, k) in sorted(voxel_map.occupied):
            lines.append(f"{i} {j} {k} {voxel_map.occupied[(i, j, k)].value}")
        return "\n".join(lines) + "\n"

    def loads(self, text: str) -> VoxelMap:
        """
        Parses voxel-map text.

        Raises:
            InvalidInputError: unknown record, wrong field count, bad class tag
                or an elevator column inconsistent with its voxels
        """
        resolution = None
        origin = (0.0, 0.0, 0.0)
        elevators: List[ElevatorInfo] = []
        occupied: Dict[Index3, VoxelClass] = {}

        for line_no, line in enumerate(text.splitlines(), start=1):
            fields = line.split()
            if not fields:
                continue
            try:
                if fields[0] == "resolution" and len(fields) == 2:
                    resolution = float(fields[1])
                elif fields[0] == "origin" and len(fields) == 4:
                    origin = tuple(float(v) for v in fields[1:])
                elif fields[0] == "elevator" and len(fields) == 7:
                    elevators.append(ElevatorInfo(
                        id=fields[1],
                        column=(int(fields[2]), int(fields[3])),
                        k_min=int(fields[4]),
                        k_max=int(fields[5]),
                        initial_z=float(fields[6]),
                    ))
                elif len(fields) == 4:
                    idx = (int(fields[0]), int(fields[1]), int(fields[2]))
                    occupied[idx] = VoxelClass(fields[3])
                else:
                    raise ValueError(f"unexpected record {fields[0]!r}")
            except (ValueError, ValidationError) as e:
                raise InvalidInputError(f"voxel map line {line_no}: {e}") from e

        if resolution is None:
            raise InvalidInputError("voxel map has no resolution line")
        try:
            return VoxelMap(resolution=resolution, origin=origin, occupied=occupied, elevators=elevators)
        except ValidationError as e:
            raise InvalidInputError(f"inconsistent voxel map: {e}") from e

    def save(self, voxel_map: VoxelMap, path: Union[str, Path]) -> None:
        path = Path(path)
        path.write_bytes(self.dumps(voxel_map).encode("utf-8"))
        logger.info(f"Wrote {len(voxel_map.occupied)} voxels to {path}")

    def load(self, path: Union[str, Path]) -> VoxelMap:
        path = Path(path)
        if not path.is_file():
            raise InvalidInputError(f"voxel map not found: {path}")
        return self.loads(path.read_bytes().decode("utf-8"))


def save_voxel_map(voxel_map: VoxelMap, path: Union[str, Path]) -> None:
    VoxelMapStore().save(voxel_map, path)


def load_voxel_map(path: Union[str, Path]) -> VoxelMap:
    return VoxelMapStore().load(path)
