"""
Pose Graph

Multifloor pose-graph construction and batch Levenberg-Marquardt optimization.

Constraint types:
- odometry: between consecutive nodes, 6-D residual
- loop: between revisited nodes, planar transform promoted to 3-D
- elevation: unary z residual from the barometric altitude change
- prior: fixes node gauge (exactly one)

Residual of a between constraint with measurement M = (Rm, tm):
    t_err = Rm^T (Ri^T (tj - ti) - tm),  r_err = Log(Rm^T Ri^T Rj)
Poses are updated with t <- t + dt, R <- R Exp(dtheta).
"""

import logging
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from pydantic import BaseModel, ConfigDict, Field
from scipy.sparse.linalg import spsolve
from scipy.spatial.transform import Rotation

from ..config import OptimizeParams
from ..errors import InvalidInputError, OptimizationError
from ..models import LoopCandidate, PlanarTransform, Pose3

logger = logging.getLogger(__name__)

STATE_DIM = 6
MAX_DAMPING = 1e12


# ============================================
# LIE-GROUP HELPERS
# ============================================

def skew(v: np.ndarray) -> np.ndarray:
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


def right_jacobian_inverse(phi: np.ndarray) -> np.ndarray:
    """Inverse right Jacobian of SO(3) at rotation vector phi."""
    theta = float(np.linalg.norm(phi))
    k = skew(phi)
    if theta < 1e-6:
        return np.eye(3) + 0.5 * k + (k @ k) / 12.0
    coeff = 1.0 / theta ** 2 - (1.0 + np.cos(theta)) / (2.0 * theta * np.sin(theta))
    return np.eye(3) + 0.5 * k + coeff * (k @ k)


def rotvec(matrix: np.ndarray) -> np.ndarray:
    return Rotation.from_matrix(matrix).as_rotvec()


def retract(pose: np.ndarray, delta: np.ndarray) -> np.ndarray:
    """Applies a 6-D tangent update (dt, dtheta) to a 4x4 pose."""
    updated = pose.copy()
    updated[:3, 3] = pose[:3, 3] + delta[:3]
    updated[:3, :3] = pose[:3, :3] @ Rotation.from_rotvec(delta[3:]).as_matrix()
    return updated


def between_residual_jacobians(
    pose_i: np.ndarray,
    pose_j: np.ndarray,
    measurement: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Residual of a relative-pose measurement and its Jacobians.

    Returns:
        (residual 6, d residual / d delta_i 6x6, d residual / d delta_j 6x6)
    """
    ri, ti = pose_i[:3, :3], pose_i[:3, 3]
    rj, tj = pose_j[:3, :3], pose_j[:3, 3]
    rm, tm = measurement[:3, :3], measurement[:3, 3]

    local = ri.T @ (tj - ti)
    t_err = rm.T @ (local - tm)
    r_err = rotvec(rm.T @ ri.T @ rj)
    jr_inv = right_jacobian_inverse(r_err)

    jac_i = np.zeros((6, 6))
    jac_i[:3, :3] = -rm.T @ ri.T
    jac_i[:3, 3:] = rm.T @ skew(local)
    jac_i[3:, 3:] = -jr_inv @ rj.T @ ri

    jac_j = np.zeros((6, 6))
    jac_j[:3, :3] = rm.T @ ri.T
    jac_j[3:, 3:] = jr_inv
    return np.concatenate([t_err, r_err]), jac_i, jac_j


def prior_residual_jacobian(pose: np.ndarray, target: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    r_err = rotvec(target[:3, :3].T @ pose[:3, :3])
    jac = np.zeros((6, 6))
    jac[:3, :3] = np.eye(3)
    jac[3:, 3:] = right_jacobian_inverse(r_err)
    return np.concatenate([pose[:3, 3] - target[:3, 3], r_err]), jac


def _check_information(info: np.ndarray, size: int) -> np.ndarray:
    info = np.asarray(info, dtype=float)
    if info.shape != (size, size):
        raise InvalidInputError(f"information matrix must be {size}x{size}, got {info.shape}")
    if not np.allclose(info, info.T):
        raise InvalidInputError("information matrix is not symmetric")
    try:
        np.linalg.cholesky(info)
    except np.linalg.LinAlgError:
        raise InvalidInputError("information matrix is not positive definite")
    return info


def diagonal_information(sigmas) -> np.ndarray:
    return np.diag(1.0 / np.asarray(sigmas, dtype=float) ** 2)


# ============================================
# CONSTRAINTS
# ============================================

class _Constraint(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)


class BetweenEdge(_Constraint):
    """Relative-pose constraint between nodes i and j."""
    i: int
    j: int
    measurement: np.ndarray  # 4x4
    information: np.ndarray  # 6x6


class ElevationConstraint(_Constraint):
    """Pulls node z to the prior's z plus the barometric altitude change."""
    node: int
    delta_z: float
    sigma_z: float


class PriorConstraint(_Constraint):
    node: int
    target: np.ndarray       # 4x4
    information: np.ndarray  # 6x6


class OptimizeResult(BaseModel):
    """Optimized poses plus solver bookkeeping."""
    poses: Dict[int, Pose3]
    final_cost: float
    initial_cost: float
    iterations: int
    cost_history: List[float] = Field(default_factory=list)  # cost after each accepted step


class PoseGraph:
    """
    Nodes with initial estimates and the constraints between them.

    Construction is single-owner; optimize() does not modify the graph.
    """

    def __init__(self):
        self.nodes: Dict[int, np.ndarray] = {}
        self.odometry: List[BetweenEdge] = []
        self.loops: List[BetweenEdge] = []
        self.elevations: List[ElevationConstraint] = []
        self.prior: Optional[PriorConstraint] = None

    def _require(self, *node_ids: int) -> None:
        for node_id in node_ids:
            if node_id not in self.nodes:
                raise InvalidInputError(f"node {node_id} does not exist")

    def add_node(self, node_id: int, pose: Pose3) -> None:
        self.nodes[node_id] = pose.matrix()

    def set_prior(self, node_id: int, target: Pose3, information: np.ndarray) -> None:
        """Fixes the gauge; replaces any earlier prior."""
        self._require(node_id)
        self.prior = PriorConstraint(
            node=node_id,
            target=target.matrix(),
            information=_check_information(information, 6),
        )

    def add_odometry(self, i: int, j: int, rel: Pose3, info: np.ndarray) -> None:
        """
        Adds the odometry measurement from node i to its successor j.

        Raises:
            InvalidInputError: missing node, j != i + 1 or bad information
        """
        self._require(i, j)
        if j != i + 1:
            raise InvalidInputError(f"odometry must link consecutive nodes, got {i}->{j}")
        self.odometry.append(BetweenEdge(i=i, j=j, measurement=rel.matrix(), information=_check_information(info, 6)))

    def add_elevation_constraint(self, i: int, delta_z: float, sigma_z: float) -> None:
        """
        Adds the unary residual (z_i - (z_prior + delta_z)) / sigma_z.

        Raises:
            InvalidInputError: missing node or non-positive sigma
        """
        self._require(i)
        if sigma_z <= 0:
            raise InvalidInputError(f"sigma_z must be positive, got {sigma_z}")
        self.elevations.append(ElevationConstraint(node=i, delta_z=delta_z, sigma_z=sigma_z))

    def add_loop(
        self,
        candidate: LoopCandidate,
        rel: PlanarTransform,
        info: np.ndarray,
        weak_sigma: float = 10.0,
    ) -> None:
        """
        Adds a loop closure from candidate.query_id to candidate.match_id.

        The planar transform is the query pose expressed in the match frame;
        z, roll and pitch get information 1 / weak_sigma^2.

        Args:
            info: 3x3 information over (x, y, yaw)

        Raises:
            InvalidInputError: missing node, floor mismatch, bad information
        """
        self._require(candidate.query_id, candidate.match_id)
        if candidate.query_floor != candidate.match_floor:
            raise InvalidInputError(
                f"loop {candidate.query_id}->{candidate.match_id} joins floors "
                f"{candidate.query_floor} and {candidate.match_floor}"
            )
        planar = _check_information(info, 3)
        full = np.diag(np.full(6, 1.0 / weak_sigma ** 2))
        axes = [0, 1, 5]
        for a, row in enumerate(axes):
            for b, col in enumerate(axes):
                full[row, col] = planar[a, b]
        # Edge runs match -> query so it reads like odometry: T_match^-1 T_query = rel
        self.loops.append(BetweenEdge(
            i=candidate.match_id,
            j=candidate.query_id,
            measurement=rel.to_pose3().matrix(),
            information=_check_information(full, 6),
        ))

    def add_loop_edge(self, i: int, j: int, rel: Pose3, info: np.ndarray) -> None:
        """Adds an already-built loop edge i -> j with full 6x6 information (graph-file import)."""
        self._require(i, j)
        self.loops.append(BetweenEdge(i=i, j=j, measurement=rel.matrix(), information=_check_information(info, 6)))

    def prior_z(self) -> float:
        if self.prior is None:
            raise InvalidInputError("graph has no prior")
        return float(self.prior.target[2, 3])

    def between_edges(self) -> List[BetweenEdge]:
        return self.odometry + self.loops

    def initial_poses(self) -> Dict[int, Pose3]:
        return {node_id: Pose3.from_matrix(m) for node_id, m in self.nodes.items()}


# ============================================
# COST AND OPTIMIZATION
# ============================================

def _as_matrices(graph: PoseGraph, poses: Dict[int, object]) -> Dict[int, np.ndarray]:
    matrices = {}
    for node_id in graph.nodes:
        if node_id not in poses:
            raise InvalidInputError(f"no pose given for node {node_id}")
        pose = poses[node_id]
        matrices[node_id] = pose.matrix() if isinstance(pose, Pose3) else np.asarray(pose, dtype=float)
    return matrices


def _cost(graph: PoseGraph, poses: Dict[int, np.ndarray]) -> float:
    cost = 0.0
    for edge in graph.between_edges():
        r, _, _ = between_residual_jacobians(poses[edge.i], poses[edge.j], edge.measurement)
        cost += float(r @ edge.information @ r)
    if graph.elevations:
        z0 = graph.prior_z()
        for c in graph.elevations:
            cost += ((poses[c.node][2, 3] - (z0 + c.delta_z)) / c.sigma_z) ** 2
    if graph.prior is not None:
        r, _ = prior_residual_jacobian(poses[graph.prior.node], graph.prior.target)
        cost += float(r @ graph.prior.information @ r)
    return cost


def total_cost(graph: PoseGraph, poses: Dict[int, object]) -> float:
    """
    Sum of squared whitened residuals over every constraint.

    Args:
        poses: node id -> Pose3 (or 4x4 matrix) for every node

    Raises:
        InvalidInputError: a node has no pose
    """
    return _cost(graph, _as_matrices(graph, poses))


def _normal_equations(graph: PoseGraph, poses: Dict[int, np.ndarray], order: Dict[int, int]):
    n = len(order) * STATE_DIM
    rows: List[np.ndarray] = []
    cols: List[np.ndarray] = []
    vals: List[np.ndarray] = []
    b = np.zeros(n)

    def add_block(a: int, c: int, block: np.ndarray) -> None:
        r_idx, c_idx = np.meshgrid(
            np.arange(a * STATE_DIM, (a + 1) * STATE_DIM),
            np.arange(c * STATE_DIM, (c + 1) * STATE_DIM),
            indexing="ij",
        )
        rows.append(r_idx.ravel())
        cols.append(c_idx.ravel())
        vals.append(block.ravel())

    for edge in graph.between_edges():
        r, ji, jj = between_residual_jacobians(poses[edge.i], poses[edge.j], edge.measurement)
        a, c = order[edge.i], order[edge.j]
        omega = edge.information
        add_block(a, a, ji.T @ omega @ ji)
        add_block(a, c, ji.T @ omega @ jj)
        add_block(c, a, jj.T @ omega @ ji)
        add_block(c, c, jj.T @ omega @ jj)
        b[a * STATE_DIM:(a + 1) * STATE_DIM] += ji.T @ omega @ r
        b[c * STATE_DIM:(c + 1) * STATE_DIM] += jj.T @ omega @ r

    if graph.elevations:
        z0 = graph.prior_z()
        for con in graph.elevations:
            a = order[con.node]
            w = 1.0 / con.sigma_z ** 2
            block = np.zeros((6, 6))
            block[2, 2] = w
            add_block(a, a, block)
            b[a * STATE_DIM + 2] += w * (poses[con.node][2, 3] - (z0 + con.delta_z))

    prior = graph.prior
    r, jac = prior_residual_jacobian(poses[prior.node], prior.target)
    a = order[prior.node]
    add_block(a, a, jac.T @ prior.information @ jac)
    b[a * STATE_DIM:(a + 1) * STATE_DIM] += jac.T @ prior.information @ r

    hessian = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    ).tocsc()
    return hessian, b


def optimize(graph: PoseGraph, params: Optional[OptimizeParams] = None) -> OptimizeResult:
    """
    Levenberg-Marquardt over all node poses.

    A step is accepted only if it lowers the cost; damping shrinks tenfold on
    acceptance and grows tenfold on rejection. Stops when an accepted step
    changes the cost by less than `tolerance` (relative), when a rejected
    step's cost is already within tolerance, when the gradient vanishes, or
    after max_iterations.

    Raises:
        InvalidInputError: graph without prior
        OptimizationError: damping exceeded 1e12 (carries the last iterate)
    """
    params = params or OptimizeParams()
    if graph.prior is None:
        raise InvalidInputError("graph needs a prior before optimization")

    order = {node_id: idx for idx, node_id in enumerate(sorted(graph.nodes))}
    poses = {node_id: m.copy() for node_id, m in graph.nodes.items()}
    cost = _cost(graph, poses)
    initial_cost = cost
    history = [cost]
    damping = params.initial_damping
    iterations = 0
    converged = False

    while iterations < params.max_iterations and not converged:
        iterations += 1
        hessian, gradient = _normal_equations(graph, poses, order)
        if np.max(np.abs(gradient)) < 1e-12:
            break
        identity = sp.identity(hessian.shape[0], format="csc")

        while True:
            delta = spsolve(hessian + damping * identity, -gradient)
            candidate = {
                node_id: retract(poses[node_id], delta[idx * STATE_DIM:(idx + 1) * STATE_DIM])
                for node_id, idx in order.items()
            }
            new_cost = _cost(graph, candidate)

            if np.isfinite(new_cost) and new_cost < cost:
                relative_change = (cost - new_cost) / max(cost, 1e-300)
                poses, cost = candidate, new_cost
                history.append(cost)
                damping = max(damping / 10.0, 1e-12)
                converged = relative_change < params.tolerance
                logger.debug(f"LM iteration {iterations}: cost={cost:.6e} damping={damping:.1e}")
                break

            if np.isfinite(new_cost) and abs(new_cost - cost) <= params.tolerance * max(cost, 1e-300):
                converged = True
                break
            damping *= 10.0
            if damping > MAX_DAMPING:
                last = {node_id: Pose3.from_matrix(m) for node_id, m in poses.items()}
                raise OptimizationError(f"damping exceeded {MAX_DAMPING:.0e} at cost {cost:.6e}", last)

    logger.info(f"Optimized {len(poses)} poses in {iterations} iterations: cost {initial_cost:.4e} -> {cost:.4e}")
    return OptimizeResult(
        poses={node_id: Pose3.from_matrix(m) for node_id, m in poses.items()},
        final_cost=cost,
        initial_cost=initial_cost,
        iterations=iterations,
        cost_history=history,
    )
