"""
Tests for the file stores: voxel maps, pose graphs, clouds, trajectories and sessions.
"""

import numpy as np
import pytest

from multifloor.errors import InvalidInputError
from multifloor.mapping.graph import PoseGraph, diagonal_information, total_cost
from multifloor.models import LoopCandidate, MoveMode, PlanarTransform, Pose3, SourceClass
from multifloor.planning.planner import astar
from multifloor.services import (
    CloudStore,
    GraphFile,
    GraphStore,
    SessionStore,
    TrajectoryStore,
    VoxelMapStore,
)
from multifloor.services.graph_store import info_to_upper, load_graph, save_graph, upper_to_info
from multifloor.services.voxel_store import load_voxel_map, save_voxel_map
from multifloor.synth.session import NoiseSpec, generate_session


def _small_graph() -> PoseGraph:
    graph = PoseGraph()
    for node in range(4):
        graph.add_node(node, Pose3.from_xyz_yaw(0.7 * node, 0.1 * node, 0.0, 0.05 * node))
    graph.set_prior(0, Pose3(), diagonal_information([1e-3] * 6))
    for node in range(3):
        graph.add_odometry(node, node + 1, Pose3.from_xyz_yaw(0.7, 0.1, 0.0, 0.05), diagonal_information([0.05] * 3 + [0.01] * 3))
    graph.add_loop(
        LoopCandidate(query_id=3, match_id=0, distance=0.1, shift=0),
        PlanarTransform(dx=2.1, dy=0.3, dyaw=0.15),
        diagonal_information([0.1, 0.1, 0.05]),
    )
    for node in range(4):
        graph.add_elevation_constraint(node, 0.01 * node, 0.3)
    return graph


# ============================================
# VOXEL MAP
# ============================================

def test_voxel_map_file_is_canonical(two_floor, tmp_path):
    """Save, load and save again gives identical bytes"""
    _, _, voxel_map = two_floor
    first = tmp_path / "map.txt"
    second = tmp_path / "again.txt"
    save_voxel_map(voxel_map, first)
    loaded = load_voxel_map(first)
    save_voxel_map(loaded, second)

    assert first.read_bytes() == second.read_bytes()
    assert loaded.occupied == voxel_map.occupied
    assert loaded.elevators == voxel_map.elevators


def test_voxel_map_text_layout():
    store = VoxelMapStore()
    voxel_map = store.loads("resolution 0.3\norigin 0.0 0.0 0.0\n1 0 0 C\n0 0 0 S\n")
    assert store.dumps(voxel_map) == "resolution 0.3\norigin 0.0 0.0 0.0\n0 0 0 S\n1 0 0 C\n"


@pytest.mark.parametrize(
    "text",
    [
        "resolution 0.3\n0 0 0 X\n",
        "resolution 0.3\n0 0 C\n",
        "resolution 0.3\nelevator e0 0 0 0 2 0.15\n0 0 0 E\n",
        "0 0 0 C\n",
    ],
    ids=["bad-class", "short-row", "broken-column", "no-resolution"],
)
def test_malformed_voxel_map_rejected(text):
    with pytest.raises(InvalidInputError):
        VoxelMapStore().loads(text)


def test_missing_voxel_map(tmp_path):
    with pytest.raises(InvalidInputError):
        load_voxel_map(tmp_path / "absent.txt")


# ============================================
# POSE GRAPH
# ============================================

def test_information_upper_triangle():
    info = np.arange(36, dtype=float).reshape(6, 6)
    info = info + info.T
    values = info_to_upper(info)
    assert len(values) == 21
    np.testing.assert_array_equal(upper_to_info(values), info)


def test_graph_file_round_trip(tmp_path):
    """A saved graph reloads byte-identically and with the same cost"""
    graph = _small_graph()
    path = tmp_path / "graph.g2o"
    saved = save_graph(graph, path)
    text = path.read_text()
    assert text.count("VERTEX_SE3:QUAT") == 4
    assert text.count("EDGE_SE3:QUAT") == 4
    assert text.count("EDGE_Z") == 4
    assert text.count("PRIOR_SE3:QUAT") == 1

    loaded = load_graph(path)
    assert GraphStore().dumps(loaded) == text
    assert loaded == saved

    rebuilt = loaded.to_pose_graph()
    assert len(rebuilt.odometry) == 3 and len(rebuilt.loops) == 1
    assert total_cost(rebuilt, rebuilt.initial_poses()) == pytest.approx(total_cost(graph, graph.initial_poses()))


def test_graph_file_keeps_optimized_poses():
    graph = _small_graph()
    moved = {node: Pose3(translation=(float(node), 5.0, 0.0)) for node in graph.nodes}
    graph_file = GraphFile.from_pose_graph(graph, moved)
    assert graph_file.poses()[2].translation == (2.0, 5.0, 0.0)


def test_elevation_without_prior_rejected():
    text = "VERTEX_SE3:QUAT 0 0.0 0.0 0.0 0.0 0.0 0.0 1.0\nEDGE_Z 0 1.0 0.3\n"
    graph_file = GraphStore().loads(text)
    with pytest.raises(InvalidInputError):
        graph_file.to_pose_graph()


def test_unknown_graph_record_rejected():
    with pytest.raises(InvalidInputError) as excinfo:
        GraphStore().loads("VERTEX_SE3:QUAT 0 0.0 0.0 0.0 0.0 0.0 0.0 1.0\nFIX 0\n")
    assert "line 2" in str(excinfo.value)


# ============================================
# CLOUDS AND TRAJECTORIES
# ============================================

def test_cloud_round_trip(tmp_path):
    points = np.array([[0.1, 0.2, 0.3], [1.0, -2.0, 3.64], [5.5, 0.0, -0.25]])
    sources = [SourceClass.GROUND, SourceClass.ELEVATOR, SourceClass.OTHER]
    path = tmp_path / "cloud.csv"
    CloudStore().save(points, sources, path)
    assert path.read_text().splitlines()[0] == "x,y,z,source"

    loaded, loaded_sources = CloudStore().load(path)
    np.testing.assert_array_equal(loaded, points)
    assert loaded_sources == sources


def test_cloud_bad_source_rejected(tmp_path):
    path = tmp_path / "cloud.csv"
    path.write_text("x,y,z,source\n0.0,0.0,0.0,ceiling\n")
    with pytest.raises(InvalidInputError):
        CloudStore().load(path)


def test_trajectory_file(two_floor, tmp_path):
    _, _, voxel_map = two_floor
    trajectory = astar(voxel_map, (2, 3, 0), (13, 3, 12), elevator_z={"e0": 0.0})
    path = tmp_path / "trajectory.csv"
    TrajectoryStore().save(trajectory, path)
    assert path.read_text().splitlines()[0] == "t_s,x,y,z,mode,leg"

    rows = TrajectoryStore().load(path)
    assert len(rows) == len(trajectory.waypoints)
    assert rows[-1].time == trajectory.total_time
    assert MoveMode.ELEV in {r.mode for r in rows}
    assert (rows[0].x, rows[0].y, rows[0].z) == trajectory.waypoints[0].position


# ============================================
# SESSIONS
# ============================================

@pytest.fixture(scope="module")
def small_session(hall):
    spec, _ = hall
    route = [(12.0, 1.35, 0.0), (15.75, 1.35, 0.0), (15.75, 1.35, 3.64)]
    return generate_session(spec, route, NoiseSpec(odom_sigma_xy=0.01, pressure_sigma=5.0), seed=3, window=10)


def test_session_round_trip(small_session, tmp_path):
    SessionStore(tmp_path).write(small_session)
    loaded = SessionStore(tmp_path).read()

    assert loaded.manifest == small_session.manifest
    assert loaded.times == small_session.times
    assert loaded.in_cab == small_session.in_cab
    assert loaded.pressure == small_session.pressure
    assert loaded.odometry == small_session.odometry
    assert loaded.ground_truth == small_session.ground_truth
    assert loaded.floors == small_session.floors
    assert loaded.truth_voxels.occupied == small_session.truth_voxels.occupied
    assert sorted(loaded.scans) == sorted(small_session.scans)
    for node_id, scan in small_session.scans.items():
        np.testing.assert_array_equal(loaded.scans[node_id].points, scan.points)
        np.testing.assert_array_equal(loaded.scans[node_id].channels, scan.channels)


def test_session_write_is_deterministic(small_session, tmp_path):
    SessionStore(tmp_path / "a").write(small_session)
    SessionStore(tmp_path / "b").write(small_session)
    for path in sorted((tmp_path / "a").iterdir()):
        assert path.read_bytes() == (tmp_path / "b" / path.name).read_bytes()


def test_missing_pressure_rejected(small_session, tmp_path):
    SessionStore(tmp_path).write(small_session)
    (tmp_path / "pressure.csv").unlink()
    with pytest.raises(InvalidInputError) as excinfo:
        SessionStore(tmp_path).read()
    assert "pressure.csv" in str(excinfo.value)


def test_ground_truth_is_optional(small_session, tmp_path):
    SessionStore(tmp_path).write(small_session)
    (tmp_path / "ground_truth.csv").unlink()
    loaded = SessionStore(tmp_path).read()
    assert loaded.ground_truth == [] and loaded.floors == []


def test_pose_count_must_match_manifest(small_session, tmp_path):
    SessionStore(tmp_path).write(small_session)
    times = tmp_path / "pose_times.csv"
    lines = times.read_text().splitlines()
    times.write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(InvalidInputError):
        SessionStore(tmp_path).read()


def test_missing_directory_rejected(tmp_path):
    with pytest.raises(InvalidInputError):
        SessionStore(tmp_path / "nowhere").read()
