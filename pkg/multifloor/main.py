"""
Command-Line Entry Point

Wires the toolkit into batch commands:
    generate  -> session directory from a building/route spec file
    map       -> optimized pose graph + classified map cloud from a session
    voxelize  -> voxel map from a map cloud
    plan      -> time-optimal trajectory through waypoints
    evaluate  -> elevation metrics of a mapped session

Usage:
    python -m multifloor.main <command> [options]

Exit codes: 0 success, 2 input/validation, 3 optimization failure,
4 unreachable goal. Diagnostics go to stderr; each command prints one summary
line to stdout.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from .config import RunConfig, load_config
from .errors import InvalidInputError, MultifloorError, SpecValidationError
from .mapping.evaluation import elevation_change_error, same_floor_z_stats, z_rmse
from .mapping.pipeline import MappingPipeline
from .models import VoxelClass
from .planning.planner import order_destinations, plan_multi
from .planning.voxel import voxelize
from .services.cloud_store import CloudStore
from .services.graph_store import GraphFile, GraphStore
from .services.session_store import SessionStore
from .services.trajectory_store import TrajectoryStore
from .services.voxel_store import VoxelMapStore
from .synth.session import GenerateRequest, generate_from_request
from .validators.waypoint_validator import WaypointValidator

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def configure_logging(level: str, verbose: bool = False) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else getattr(logging, level.upper(), logging.INFO),
        format=LOG_FORMAT,
        stream=sys.stderr,
        force=True,
    )


# ============================================
# COMMANDS
# ============================================

def cmd_generate(args: argparse.Namespace, config: RunConfig) -> int:
    path = Path(args.spec)
    if not path.is_file():
        raise InvalidInputError(f"spec file not found: {path}")
    try:
        request = GenerateRequest.model_validate_json(path.read_text())
    except ValidationError as e:
        raise SpecValidationError([err["msg"] + f" at {'.'.join(map(str, err['loc']))}" for err in e.errors()]) from e

    session = generate_from_request(request, seed=args.seed)
    SessionStore(args.out).write(session)
    print(f"generated {len(session)} poses, {len(session.scans)} scans, "
          f"{len(session.pressure)} pressure samples -> {args.out}")
    return 0


def cmd_map(args: argparse.Namespace, config: RunConfig) -> int:
    session = SessionStore(args.session).read()
    pipeline = MappingPipeline(config)
    result = pipeline.run(session)

    GraphStore().save(GraphFile.from_pose_graph(result.graph, result.optimized.poses), args.out)
    CloudStore().save(result.points, result.sources, args.map_cloud)
    print(f"mapped {len(session)} poses, floors {min(result.floors)}..{max(result.floors)}, "
          f"{len(result.loops)} loops, cost {result.optimized.initial_cost:.4e} -> {result.optimized.final_cost:.4e}")
    return 0


def cmd_voxelize(args: argparse.Namespace, config: RunConfig) -> int:
    points, sources = CloudStore().load(args.cloud)
    voxel_map = voxelize(points, sources, config.voxel)
    VoxelMapStore().save(voxel_map, args.out)
    counts = voxel_map.counts()
    print(f"voxels C={counts[VoxelClass.CORRIDOR]} S={counts[VoxelClass.STAIR]} "
          f"E={counts[VoxelClass.ELEVATOR]} elevators={len(voxel_map.elevators)}")
    return 0


def cmd_plan(args: argparse.Namespace, config: RunConfig) -> int:
    voxel_map = VoxelMapStore().load(args.voxels)
    validator = WaypointValidator(snap_radius=config.plan.snap_radius)

    cabs = validator.parse_elevator_z(args.elevator_z, voxel_map)
    if not cabs.success:
        raise SpecValidationError(cabs.errors)
    snapped = validator.validate(args.waypoints, voxel_map)
    if not snapped.success:
        raise SpecValidationError(snapped.errors)

    stops = snapped.data["indices"]
    elevator_z = cabs.data["elevator_z"]
    if args.optimize_order and len(stops) > 2:
        stops = [stops[0]] + order_destinations(voxel_map, stops[0], stops[1:], config.plan, elevator_z)

    trajectory = plan_multi(voxel_map, stops, args.return_to_start, config.plan, elevator_z)
    TrajectoryStore().save(trajectory, args.out)
    legs = " ".join(
        f"leg{n}={'+'.join(sorted(m.value for m in modes))}" for n, modes in enumerate(trajectory.leg_modes())
    )
    print(f"total_time={trajectory.total_time:.3f} {legs}")
    return 0


def cmd_evaluate(args: argparse.Namespace, config: RunConfig) -> int:
    session = SessionStore(args.session).read()
    graph_file = GraphStore().load(args.graph)
    poses = graph_file.poses()
    if len(poses) != len(session) or not session.ground_truth:
        raise InvalidInputError(
            f"graph has {len(poses)} vertices, session has {len(session)} poses "
            f"and {len(session.ground_truth)} ground-truth entries"
        )
    z = [poses[n].translation[2] for n in sorted(poses)]
    labels = session.floors

    rmse = z_rmse(z, session.true_z())
    per_floor = same_floor_z_stats(z, labels)
    for floor, (mean, std) in per_floor.items():
        logger.info(f"Floor {floor}: mean z {mean:.3f} m, std {std:.4f} m")
    summary = f"z_rmse={rmse:.4f} same_floor_std_max={max(s for _, s in per_floor.values()):.4f}"
    if len(per_floor) > 1:
        mean_err, std_err = elevation_change_error(z, labels, session.manifest.floor_height)
        summary += f" elevation_error={mean_err:.4f}+-{std_err:.4f}"
    print(summary)
    return 0


# ============================================
# ARGUMENTS
# ============================================

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, help="Config file with 'section.key = value' lines")
    common.add_argument("--verbose", action="store_true", help="Debug logging")

    parser = argparse.ArgumentParser(prog="multifloor", description="Multifloor mapping and elevator-aware planning")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="Generate a synthetic session")
    p.add_argument("--spec", required=True, help="JSON building/route/noise spec")
    p.add_argument("--out", required=True, help="Session directory to write")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=cmd_generate)

    p = sub.add_parser("map", parents=[common], help="Build and optimize the multifloor pose graph")
    p.add_argument("--session", required=True)
    p.add_argument("--out", required=True, help="Pose-graph text file")
    p.add_argument("--map-cloud", required=True, dest="map_cloud", help="Map cloud CSV")
    p.add_argument("--no-floor-labels", action="store_true", dest="no_floor_labels")
    p.add_argument("--no-elevation-constraints", action="store_true", dest="no_elevation_constraints")
    p.set_defaults(handler=cmd_map)

    p = sub.add_parser("voxelize", parents=[common], help="Voxelize a map cloud")
    p.add_argument("--cloud", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_voxelize)

    p = sub.add_parser("plan", parents=[common], help="Plan through waypoints")
    p.add_argument("--voxels", required=True)
    p.add_argument("--waypoints", required=True, help='"x,y,z;x,y,z;..."')
    p.add_argument("--return", action="store_true", dest="return_to_start")
    p.add_argument("--optimize-order", action="store_true", dest="optimize_order")
    p.add_argument("--elevator-z", action="append", dest="elevator_z", default=[], help="id=z, repeatable")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_plan)

    p = sub.add_parser("evaluate", parents=[common], help="Elevation metrics of a mapped session")
    p.add_argument("--session", required=True)
    p.add_argument("--graph", required=True)
    p.set_defaults(handler=cmd_evaluate)
    return parser


def _flag_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {}
    if getattr(args, "no_floor_labels", False):
        overrides["loop"] = {"use_floor_labels": False}
    if getattr(args, "no_elevation_constraints", False):
        overrides["graph"] = {"use_elevation_constraints": False}
    return overrides


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    configure_logging("INFO", args.verbose)
    try:
        config = load_config(args.config, _flag_overrides(args))
        configure_logging(config.log_level, args.verbose)
        return args.handler(args, config)
    except MultifloorError as e:
        logger.error(f"{args.command} failed: {e}", exc_info=True)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
