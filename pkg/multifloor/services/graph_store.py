"""
Pose Graph Store

Reads and writes the line-oriented pose-graph text file.

Records:
    VERTEX_SE3:QUAT id x y z qx qy qz qw
    PRIOR_SE3:QUAT id x y z qx qy qz qw <21 info>
    EDGE_SE3:QUAT i j dx dy dz qx qy qz qw <21 info>
    EDGE_Z id z_target sigma_z

Information matrices are stored as their 21 upper-triangular entries, row by
row. An EDGE_SE3 between consecutive ids is odometry, any other is a loop.

Files are parsed into a GraphFile that keeps every value verbatim, so a file
written by this module is reproduced byte for byte by load followed by save.
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from ..errors import InvalidInputError
from ..mapping.graph import PoseGraph
from ..models import Pose3

logger = logging.getLogger(__name__)

VERTEX_TAG = "VERTEX_SE3:QUAT"
PRIOR_TAG = "PRIOR_SE3:QUAT"
EDGE_TAG = "EDGE_SE3:QUAT"
ELEVATION_TAG = "EDGE_Z"

_UPPER = np.triu_indices(6)


def info_to_upper(info: np.ndarray) -> List[float]:
    return [float(v) for v in np.asarray(info, dtype=float)[_UPPER]]


def upper_to_info(values: List[float]) -> np.ndarray:
    if len(values) != 21:
        raise InvalidInputError(f"expected 21 information entries, got {len(values)}")
    info = np.zeros((6, 6))
    info[_UPPER] = values
    return info + np.triu(info, 1).T


class VertexRecord(BaseModel):
    id: int
    pose: Pose3


class PriorRecord(BaseModel):
    id: int
    pose: Pose3
    info: List[float]


class EdgeRecord(BaseModel):
    i: int
    j: int
    rel: Pose3
    info: List[float]


class ElevationRecord(BaseModel):
    id: int
    z_target: float
    sigma_z: float


class GraphFile(BaseModel):
    """Raw contents of a pose-graph file."""
    vertices: List[VertexRecord] = Field(default_factory=list)
    prior: Optional[PriorRecord] = None
    edges: List[EdgeRecord] = Field(default_factory=list)
    elevations: List[ElevationRecord] = Field(default_factory=list)

    @classmethod
    def from_pose_graph(cls, graph: PoseGraph, poses: Optional[Dict[int, Pose3]] = None) -> "GraphFile":
        """
        Captures a graph; vertices take `poses` (e.g. optimized) when given,
        otherwise the graph's initial estimates.
        """
        poses = poses if poses is not None else graph.initial_poses()
        prior = None
        if graph.prior is not None:
            prior = PriorRecord(
                id=graph.prior.node,
                pose=Pose3.from_matrix(graph.prior.target),
                info=info_to_upper(graph.prior.information),
            )
        z_prior = graph.prior_z() if graph.prior is not None else 0.0
        return cls(
            vertices=[VertexRecord(id=n, pose=poses[n]) for n in sorted(graph.nodes)],
            prior=prior,
            edges=[
                EdgeRecord(i=e.i, j=e.j, rel=Pose3.from_matrix(e.measurement), info=info_to_upper(e.information))
                for e in graph.between_edges()
            ],
            elevations=[
                ElevationRecord(id=c.node, z_target=z_prior + c.delta_z, sigma_z=c.sigma_z)
                for c in graph.elevations
            ],
        )

    def to_pose_graph(self) -> PoseGraph:
        """
        Rebuilds a PoseGraph whose initial estimates are the stored vertices.

        Raises:
            InvalidInputError: edges on unknown nodes, bad information, or
                elevation records without a prior
        """
        graph = PoseGraph()
        for vertex in self.vertices:
            graph.add_node(vertex.id, vertex.pose)
        if self.prior is not None:
            graph.set_prior(self.prior.id, self.prior.pose, upper_to_info(self.prior.info))
        for edge in self.edges:
            info = upper_to_info(edge.info)
            if edge.j == edge.i + 1:
                graph.add_odometry(edge.i, edge.j, edge.rel, info)
            else:
                graph.add_loop_edge(edge.i, edge.j, edge.rel, info)
        if self.elevations and self.prior is None:
            raise InvalidInputError("EDGE_Z records need a PRIOR_SE3:QUAT record")
        for record in self.elevations:
            graph.add_elevation_constraint(record.id, record.z_target - graph.prior_z(), record.sigma_z)
        return graph

    def poses(self) -> Dict[int, Pose3]:
        return {v.id: v.pose for v in self.vertices}


def _num(value: float) -> str:
    return repr(float(value))


def _pose_fields(pose: Pose3) -> str:
    return " ".join(_num(v) for v in (*pose.translation, *pose.quaternion))


def _parse_pose(fields: List[str]) -> Pose3:
    values = [float(v) for v in fields]
    return Pose3(translation=tuple(values[:3]), quaternion=tuple(values[3:7]))


class GraphStore:
    """Converts GraphFile objects to and from text."""

    def dumps(self, graph_file: GraphFile) -> str:
        lines = [f"{VERTEX_TAG} {v.id} {_pose_fields(v.pose)}" for v in graph_file.vertices]
        if graph_file.prior is not None:
            p = graph_file.prior
            lines.append(f"{PRIOR_TAG} {p.id} {_pose_fields(p.pose)} " + " ".join(_num(v) for v in p.info))
        for e in graph_file.edges:
            lines.append(f"{EDGE_TAG} {e.i} {e.j} {_pose_fields(e.rel)} " + " ".join(_num(v) for v in e.info))
        for z in graph_file.elevations:
            lines.append(f"{ELEVATION_TAG} {z.id} {_num(z.z_target)} {_num(z.sigma_z)}")
        return "\n".join(lines) + "\n"

    def loads(self, text: str) -> GraphFile:
        """
        Parses pose-graph text.

        Raises:
            InvalidInputError: unknown tag or wrong field count (with line number)
        """
        graph_file = GraphFile()
        for line_no, line in enumerate(text.splitlines(), start=1):
            fields = line.split()
            if not fields:
                continue
            tag, rest = fields[0], fields[1:]
            try:
                if tag == VERTEX_TAG and len(rest) == 8:
                    graph_file.vertices.append(VertexRecord(id=int(rest[0]), pose=_parse_pose(rest[1:])))
                elif tag == PRIOR_TAG and len(rest) == 29:
                    graph_file.prior = PriorRecord(
                        id=int(rest[0]), pose=_parse_pose(rest[1:8]), info=[float(v) for v in rest[8:]],
                    )
                elif tag == EDGE_TAG and len(rest) == 30:
                    graph_file.edges.append(EdgeRecord(
                        i=int(rest[0]), j=int(rest[1]), rel=_parse_pose(rest[2:9]), info=[float(v) for v in rest[9:]],
                    ))
                elif tag == ELEVATION_TAG and len(rest) == 3:
                    graph_file.elevations.append(ElevationRecord(
                        id=int(rest[0]), z_target=float(rest[1]), sigma_z=float(rest[2]),
                    ))
                else:
                    raise ValueError(f"unexpected record {tag!r} with {len(rest)} fields")
            except (ValueError, ValidationError) as e:
                raise InvalidInputError(f"pose graph line {line_no}: {e}") from e
        return graph_file

    def save(self, graph_file: GraphFile, path: Union[str, Path]) -> None:
        path = Path(path)
        path.write_bytes(self.dumps(graph_file).encode("utf-8"))
        logger.info(
            f"Wrote pose graph to {path}: {len(graph_file.vertices)} vertices, "
            f"{len(graph_file.edges)} edges, {len(graph_file.elevations)} elevation constraints"
        )

    def load(self, path: Union[str, Path]) -> GraphFile:
        path = Path(path)
        if not path.is_file():
            raise InvalidInputError(f"pose graph not found: {path}")
        return self.loads(path.read_bytes().decode("utf-8"))


def save_graph(graph: PoseGraph, path: Union[str, Path], poses: Optional[Dict[int, Pose3]] = None) -> GraphFile:
    graph_file = GraphFile.from_pose_graph(graph, poses)
    GraphStore().save(graph_file, path)
    return graph_file


def load_graph(path: Union[str, Path]) -> GraphFile:
    return GraphStore().load(path)
