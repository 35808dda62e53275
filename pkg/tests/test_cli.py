"""
Tests for the command-line entry point: exit codes and the files each command writes.
"""

import json

import pytest

from multifloor.main import main
from multifloor.models import MoveMode
from multifloor.services.trajectory_store import TrajectoryStore
from multifloor.services.voxel_store import save_voxel_map

SMALL_SPEC = {
    "building": {"floors": 1, "corridors": [{"x0": 0, "y0": 0, "x1": 12, "y1": 2.4}]},
    "route": [[0.3, 1.2, 0.0], [11.7, 1.2, 0.0], [0.3, 1.2, 0.0]],
    "noise": {"odom_sigma_xy": 0.01, "pressure_sigma": 5.0},
    "window": 20,
}

TWO_FLOOR_TRIP = "0.75,1.05,0;4.05,1.05,3.64"


def _write_spec(tmp_path, spec, name="spec.json"):
    path = tmp_path / name
    path.write_text(json.dumps(spec))
    return str(path)


@pytest.fixture
def voxel_file(two_floor, tmp_path):
    _, _, voxel_map = two_floor
    path = tmp_path / "voxels.txt"
    save_voxel_map(voxel_map, path)
    return str(path)


# ============================================
# GENERATE AND MAP
# ============================================

def test_generate_is_deterministic(tmp_path, capsys):
    spec = _write_spec(tmp_path, SMALL_SPEC)
    assert main(["generate", "--spec", spec, "--out", str(tmp_path / "a"), "--seed", "7"]) == 0
    assert main(["generate", "--spec", spec, "--out", str(tmp_path / "b"), "--seed", "7"]) == 0
    assert "generated" in capsys.readouterr().out

    written = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert "pressure.csv" in written and "manifest.txt" in written
    for name in written:
        if (tmp_path / "a" / name).is_file():
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_malformed_spec_exits_2(tmp_path):
    narrow = dict(SMALL_SPEC, building={"floors": 1, "corridors": [{"x0": 0, "y0": 0, "x1": 6, "y1": 1.2}]})
    assert main(["generate", "--spec", _write_spec(tmp_path, narrow), "--out", str(tmp_path / "s")]) == 2

    broken = tmp_path / "broken.json"
    broken.write_text("{ not json")
    assert main(["generate", "--spec", str(broken), "--out", str(tmp_path / "s")]) == 2


def test_unknown_command_exits_2():
    assert main(["teleport"]) == 2


def test_map_then_evaluate(tmp_path, capsys):
    session = str(tmp_path / "session")
    assert main(["generate", "--spec", _write_spec(tmp_path, SMALL_SPEC), "--out", session]) == 0

    graph = str(tmp_path / "graph.g2o")
    cloud = tmp_path / "cloud.csv"
    assert main(["map", "--session", session, "--out", graph, "--map-cloud", str(cloud)]) == 0
    assert cloud.read_text().startswith("x,y,z,source")
    assert "mapped" in capsys.readouterr().out

    assert main(["evaluate", "--session", session, "--graph", graph]) == 0
    assert capsys.readouterr().out.startswith("z_rmse=")


def test_map_without_pressure_exits_2(tmp_path):
    session = tmp_path / "session"
    assert main(["generate", "--spec", _write_spec(tmp_path, SMALL_SPEC), "--out", str(session)]) == 0
    (session / "pressure.csv").unlink()
    code = main(["map", "--session", str(session), "--out", str(tmp_path / "g"), "--map-cloud", str(tmp_path / "c")])
    assert code == 2



# ============================================
# VOXELIZE
# ============================================

def _map_and_voxelize(tmp_path, session, name):
    cloud = tmp_path / f"{name}.csv"
    code = main(["map", "--session", str(session), "--out", str(tmp_path / f"{name}.g2o"), "--map-cloud", str(cloud)])
    assert code == 0
    voxels = tmp_path / f"{name}_voxels.txt"
    assert main(["voxelize", "--cloud", str(cloud), "--out", str(voxels)]) == 0
    return cloud, voxels


@pytest.fixture
def ride_session(hall, ride_route, tmp_path):
    """Generated session: walk to the hall cab, ride up, walk, ride back down"""
    spec, _ = hall
    request = {"building": spec.model_dump(mode="json"), "route": [list(p) for p in ride_route(2)]}
    session = tmp_path / "ride"
    assert main(["generate", "--spec", _write_spec(tmp_path, request, "ride.json"), "--out", str(session)]) == 0
    return session


def test_voxelize_empty_cloud_exits_2(tmp_path):
    cloud = tmp_path / "cloud.csv"
    cloud.write_text("x,y,z,source\n")
    out = tmp_path / "voxels.txt"
    assert main(["voxelize", "--cloud", str(cloud), "--out", str(out)]) == 2
    assert not out.exists()


def test_corridor_only_cloud_has_no_stairs(tmp_path, capsys):
    session = tmp_path / "session"
    assert main(["generate", "--spec", _write_spec(tmp_path, SMALL_SPEC), "--out", str(session)]) == 0
    _, voxels = _map_and_voxelize(tmp_path, session, "corridor")

    assert "S=0 E=0 elevators=0" in capsys.readouterr().out
    rows = [line.split() for line in voxels.read_text().splitlines()[2:]]
    assert rows and {row[3] for row in rows} == {"C"}


def test_ride_session_end_to_end(ride_session, tmp_path):
    """generate, map, voxelize, then plan from floor 0 to floor 1 on the mapped voxels"""
    cloud, voxels = _map_and_voxelize(tmp_path, ride_session, "ride")

    again = tmp_path / "again.txt"
    assert main(["voxelize", "--cloud", str(cloud), "--out", str(again)]) == 0
    assert again.read_bytes() == voxels.read_bytes()

    manifest = dict(line.split("=", 1) for line in (ride_session / "manifest.txt").read_text().splitlines())
    elevator_lines = [line for line in voxels.read_text().splitlines() if line.startswith("elevator ")]
    assert len(elevator_lines) == int(manifest["elevators"]) == 1

    # Map frame starts at the first pose, (12, 1.35, 0) in the building
    out = tmp_path / "trajectory.csv"
    code = main(["plan", "--voxels", str(voxels), "--waypoints", "1.5,0.45,0.15;6.5,0.45,3.75", "--out", str(out)])
    assert code == 0
    rows = TrajectoryStore().load(out)
    assert MoveMode.ELEV in {row.mode for row in rows}
    assert rows[-1].z > 3.0


# ============================================
# PLAN
# ============================================

def _plan(voxel_file, tmp_path, *extra):
    out = tmp_path / "trajectory.csv"
    code = main(["plan", "--voxels", voxel_file, "--waypoints", TWO_FLOOR_TRIP, "--out", str(out), *extra])
    return code, out


def test_plan_rides_when_cab_is_below(voxel_file, tmp_path, capsys):
    code, out = _plan(voxel_file, tmp_path, "--elevator-z", "e0=0.0")
    assert code == 0
    modes = {row.mode for row in TrajectoryStore().load(out)}
    assert MoveMode.ELEV in modes
    assert capsys.readouterr().out.startswith("total_time=6.900")


def test_plan_climbs_when_cab_is_above(voxel_file, tmp_path):
    code, out = _plan(voxel_file, tmp_path, "--elevator-z", "e0=3.64")
    assert code == 0
    modes = {row.mode for row in TrajectoryStore().load(out)}
    assert MoveMode.STAIR in modes and MoveMode.ELEV not in modes


def test_plan_with_return(voxel_file, tmp_path):
    code, out = _plan(voxel_file, tmp_path, "--elevator-z", "e0=0.0", "--return")
    assert code == 0
    assert {row.leg for row in TrajectoryStore().load(out)} == {0, 1}


def test_waypoint_off_the_map_exits_2(voxel_file, tmp_path):
    out = tmp_path / "trajectory.csv"
    assert main(["plan", "--voxels", voxel_file, "--waypoints", "40,40,0;4.05,1.05,3.64", "--out", str(out)]) == 2
    assert not out.exists()


def test_unknown_elevator_exits_2(voxel_file, tmp_path):
    code, _ = _plan(voxel_file, tmp_path, "--elevator-z", "e9=0.0")
    assert code == 2


def test_unreachable_goal_exits_4(tmp_path):
    voxels = tmp_path / "islands.txt"
    voxels.write_text("resolution 0.3\norigin 0.0 0.0 0.0\n0 0 0 C\n1 0 0 C\n5 5 0 C\n")
    out = tmp_path / "trajectory.csv"
    code = main(["plan", "--voxels", str(voxels), "--waypoints", "0.15,0.15,0.15;1.65,1.65,0.15", "--out", str(out)])
    assert code == 4
