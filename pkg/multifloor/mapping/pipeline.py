"""
Mapping Pipeline

Runs one recorded session through every mapping stage:
1. Barometric altitude change and floor label per pose
2. Elevator-interior detection on each scan
3. Pose graph from odometry, prior and elevation constraints
4. Floor-labeled loop detection with scan alignment
5. Levenberg-Marquardt optimization
6. World-frame map cloud, elevator rides replaced by synthesized shells

The stages only read the Session; all results land in MappingResult.
"""

import logging
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..config import RunConfig
from ..errors import RejectedLoopError
from ..models import LoopCandidate, Pose3, SourceClass
from ..planning.voxel import extract_step_tops
from ..synth.session import Session
from .baro import delta_z_series, floor_labels
from .graph import OptimizeResult, PoseGraph, diagonal_information, optimize
from .loopdet import LoopDatabase, estimate_relative_pose, make_descriptor
from .scanproc import detect_elevator_interior, synthesize_elevator_cloud

logger = logging.getLogger(__name__)


class MappingResult(BaseModel):
    """Everything cmd_map writes or reports."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    graph: PoseGraph
    optimized: OptimizeResult
    delta_z: np.ndarray
    floors: List[int]
    in_cab: List[bool]
    loops: List[LoopCandidate] = Field(default_factory=list)
    rejected_loops: int = 0
    mean_query_ms: float = 0.0
    points: np.ndarray
    sources: List[SourceClass]

    def optimized_z(self) -> np.ndarray:
        return np.array([self.optimized.poses[n].translation[2] for n in sorted(self.optimized.poses)])


def cab_runs(in_cab: List[bool]) -> List[Tuple[int, int]]:
    """Inclusive (first, last) node ids of each maximal run of in-cab poses."""
    runs = []
    start = None
    for n, flag in enumerate(list(in_cab) + [False]):
        if flag and start is None:
            start = n
        elif not flag and start is not None:
            runs.append((start, n - 1))
            start = None
    return runs


class MappingPipeline:
    """
    Builds and optimizes the multifloor pose graph of a session.

    Args to run() come from the Session; behavior comes from RunConfig. The
    two ablation switches default to the configuration's values.
    """

    def __init__(
        self,
        config: Optional[RunConfig] = None,
        use_floor_labels: Optional[bool] = None,
        use_elevation_constraints: Optional[bool] = None,
    ):
        """
        Initialize pipeline.

        Args:
            config: Merged run configuration (defaults when omitted)
            use_floor_labels: Override loop.use_floor_labels
            use_elevation_constraints: Override graph.use_elevation_constraints
        """
        self.config = config or RunConfig()
        self.use_floor_labels = (
            self.config.loop.use_floor_labels if use_floor_labels is None else use_floor_labels
        )
        self.use_elevation_constraints = (
            self.config.graph.use_elevation_constraints if use_elevation_constraints is None
            else use_elevation_constraints
        )

    # ============================================
    # STAGES
    # ============================================

    def altitudes(self, session: Session) -> Tuple[np.ndarray, List[int]]:
        """Per-pose altitude change and floor label, referenced to the session's start pressure."""
        baro = self.config.baro.model_copy(update={"p_cri": session.manifest.p_cri})
        delta_z = delta_z_series(session.pressure, session.times, baro)
        return delta_z, floor_labels(delta_z, baro)

    def detect_cab(self, session: Session) -> List[bool]:
        flags = [False] * len(session)
        for node_id, scan in session.scans.items():
            if node_id < len(flags) and len(scan):
                flags[node_id] = detect_elevator_interior(scan, self.config.elevator)
        detected = sum(flags)
        if detected:
            logger.info(f"Detected {detected} in-cab scans in {len(cab_runs(flags))} rides")
        return flags

    def build_graph(self, session: Session, delta_z: np.ndarray, in_cab: List[bool]) -> PoseGraph:
        g = self.config.graph
        graph = PoseGraph()
        pose = np.eye(4)
        graph.add_node(0, Pose3.from_matrix(pose))
        for delta in session.odometry:
            pose = pose @ delta.rel.matrix()
            graph.add_node(delta.j, Pose3.from_matrix(pose))

        graph.set_prior(0, Pose3.from_matrix(np.eye(4)), diagonal_information([g.prior_sigma] * 6))

        rot = [g.odom_sigma_rot] * 3
        planar = diagonal_information([g.odom_sigma_xy, g.odom_sigma_xy, g.odom_sigma_z, *rot])
        riding = diagonal_information([g.odom_sigma_xy, g.odom_sigma_xy, g.elevator_odom_sigma_z, *rot])
        for delta in session.odometry:
            info = riding if in_cab[delta.i] and in_cab[delta.j] else planar
            graph.add_odometry(delta.i, delta.j, delta.rel, info)

        if self.use_elevation_constraints:
            for node_id in range(len(session)):
                graph.add_elevation_constraint(node_id, float(delta_z[node_id]), g.sigma_z)
        return graph

    def close_loops(
        self,
        session: Session,
        graph: PoseGraph,
        floors: List[int],
        in_cab: List[bool],
    ) -> Tuple[List[LoopCandidate], int, float]:
        """
        Queries then inserts every non-cab scan in node order.

        Without floor labels all scans share one label, so cross-floor
        candidates reach the graph.
        """
        cfg = self.config.loop
        g = self.config.graph
        db = LoopDatabase(cfg)
        info = diagonal_information([g.loop_sigma_xy, g.loop_sigma_xy, g.loop_sigma_yaw])
        accepted: List[LoopCandidate] = []
        rejected = 0

        for node_id in sorted(session.scans):
            scan = session.scans[node_id]
            if in_cab[node_id] or not len(scan):
                continue
            floor = floors[node_id] if self.use_floor_labels else 0
            descriptor = make_descriptor(scan, cfg, floor)
            candidate = db.query(descriptor, floor, use_floor_labels=self.use_floor_labels)
            if candidate is not None:
                try:
                    rel = estimate_relative_pose(scan, session.scans[candidate.match_id], candidate.shift, cfg)
                    graph.add_loop(candidate, rel, info, weak_sigma=g.loop_weak_sigma)
                    accepted.append(candidate)
                except RejectedLoopError as e:
                    rejected += 1
                    logger.warning(f"Loop {candidate.query_id}->{candidate.match_id} dropped: {e}")
            db.insert(node_id, floor, descriptor)

        logger.info(
            f"Loop closure: {len(accepted)} accepted, {rejected} rejected, "
            f"{db.comparisons} descriptor comparisons, {db.mean_query_ms():.3f} ms per query"
        )
        return accepted, rejected, db.mean_query_ms()

    def map_cloud(
        self,
        session: Session,
        poses: Dict[int, np.ndarray],
        in_cab: List[bool],
    ) -> Tuple[np.ndarray, List[SourceClass]]:
        """
        World-frame cloud with a source class per point.

        Ground channels are ground. Of the remaining points only step tops
        (extract_step_tops) are kept, as other; walls and far floor returns
        are dropped. Each ride becomes one shell from
        the first to the last optimized z of its run.
        """
        lift = np.array([0.0, 0.0, session.manifest.sensor_height])
        max_ground = self.config.voxel.max_ground_channel
        chunks: List[np.ndarray] = []
        sources: List[SourceClass] = []

        for node_id in sorted(session.scans):
            scan = session.scans[node_id]
            if in_cab[node_id] or not len(scan):
                continue
            ground = scan.channels <= max_ground
            keep = ground | extract_step_tops(scan, session.manifest.sensor_height, self.config.voxel)
            pose = poses[node_id]
            world = (scan.points[keep] + lift) @ pose[:3, :3].T + pose[:3, 3]
            chunks.append(world)
            sources.extend(SourceClass.GROUND if g else SourceClass.OTHER for g in ground[keep])

        for first, last in cab_runs(in_cab):
            z0, z1 = poses[first][2, 3], poses[last][2, 3]
            if abs(z1 - z0) < self.config.voxel.resolution:
                logger.warning(f"Ride {first}..{last} climbs {z1 - z0:.2f} m, no shell synthesized")
                continue
            shell = synthesize_elevator_cloud(self.config.elevator, float(z1 - z0), float(z0))
            yaw = np.arctan2(poses[first][1, 0], poses[first][0, 0])
            c, s = np.cos(yaw), np.sin(yaw)
            xy = shell.points[:, :2] @ np.array([[c, s], [-s, c]]) + poses[first][:2, 3]
            chunks.append(np.column_stack([xy, shell.points[:, 2]]))
            sources.extend([SourceClass.ELEVATOR] * len(shell))

        points = np.vstack(chunks) if chunks else np.zeros((0, 3))
        return points, sources

    # ============================================
    # RUN
    # ============================================

    def run(self, session: Session) -> MappingResult:
        """
        Maps a session end to end.

        Raises:
            InvalidInputError: empty pressure stream or malformed graph input
            OptimizationError: solver damping blew up
        """
        delta_z, floors = self.altitudes(session)
        in_cab = self.detect_cab(session)
        graph = self.build_graph(session, delta_z, in_cab)

        loops: List[LoopCandidate] = []
        rejected, mean_ms = 0, 0.0
        if session.scans:
            loops, rejected, mean_ms = self.close_loops(session, graph, floors, in_cab)
        else:
            logger.info("Session has no scans, skipping elevator and loop detection")

        result = optimize(graph, self.config.graph.optimize_params())
        matrices = {n: p.matrix() for n, p in result.poses.items()}
        points, sources = self.map_cloud(session, matrices, in_cab)
        logger.info(f"Map cloud: {len(points)} points from {len(session.scans)} scans")

        return MappingResult(
            graph=graph,
            optimized=result,
            delta_z=delta_z,
            floors=floors,
            in_cab=in_cab,
            loops=loops,
            rejected_loops=rejected,
            mean_query_ms=mean_ms,
            points=points,
            sources=sources,
        )