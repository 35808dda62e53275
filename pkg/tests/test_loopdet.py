"""
Tests for scan-context descriptors, the floor-labeled loop database and
loop relative-pose estimation.
"""

import numpy as np
import pytest

from multifloor.config import LoopDbConfig
from multifloor.errors import InvalidInputError, RejectedLoopError
from multifloor.mapping.evaluation import LabeledScan, loop_detection_report
from multifloor.mapping.loopdet import (
    LoopDatabase,
    RingKey,
    ScanContext,
    descriptor_distance,
    estimate_relative_pose,
    insert,
    make_descriptor,
    query,
)
from multifloor.models import Scan
from multifloor.synth.building import generate_building, twin_floor_building
from multifloor.synth.raycast import simulate_scan

SENSOR_HEIGHT = 0.5


@pytest.fixture(scope="module")
def twin():
    spec = twin_floor_building()
    geometry, _ = generate_building(spec)
    return spec, geometry


def _random_scan(rng, node_id=0, n=3000):
    radius = rng.uniform(1.0, 30.0, n)
    azimuth = rng.uniform(0.0, 2 * np.pi, n)
    z = rng.uniform(-0.5, 2.5, n)
    points = np.column_stack([radius * np.cos(azimuth), radius * np.sin(azimuth), z])
    return Scan.from_points(points, node_id=node_id)


def _rotated(scan: Scan, angle: float, node_id: int) -> Scan:
    c, s = np.cos(angle), np.sin(angle)
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    return Scan.from_points(scan.points @ rot.T, scan.channels, node_id=node_id)


# ============================================
# DESCRIPTORS
# ============================================

def test_descriptor_shape_and_heights(rng):
    """Bins hold max height above the floor, never negative"""
    cfg = LoopDbConfig()
    descriptor = make_descriptor(_random_scan(rng), cfg, floor=2)
    assert descriptor.shape == (20, 60)
    assert descriptor.floor == 2
    assert descriptor.m.min() >= 0.0
    assert descriptor.m.max() <= 2.5 + SENSOR_HEIGHT + 1e-12


def test_points_beyond_max_range_ignored():
    cfg = LoopDbConfig()
    scan = Scan.from_points([[50.0, 0.0, 1.0], [0.0, 60.0, 1.0]])
    assert not make_descriptor(scan, cfg, 0).m.any()


def test_empty_scan_has_no_descriptor():
    with pytest.raises(InvalidInputError):
        make_descriptor(Scan.from_points(np.zeros((0, 3))), LoopDbConfig(), 0)


def test_identical_descriptors(rng):
    cfg = LoopDbConfig()
    d = make_descriptor(_random_scan(rng), cfg, 0)
    distance, shift = descriptor_distance(d, d)
    assert distance == pytest.approx(0.0, abs=1e-12)
    assert shift == 0


@pytest.mark.parametrize("sectors", [1, 7, 30])
def test_rotation_recovered_as_shift(rng, sectors):
    """Rotating a scan by whole sectors gives zero distance at the matching shift"""
    cfg = LoopDbConfig()
    base = _random_scan(rng)
    turned = _rotated(base, sectors * 2 * np.pi / cfg.n_sectors + 1e-9, node_id=1)
    distance, shift = descriptor_distance(make_descriptor(turned, cfg, 0), make_descriptor(base, cfg, 0))
    assert distance < 1e-6
    assert shift == (cfg.n_sectors - sectors) % cfg.n_sectors


def test_ring_key_is_rotation_invariant(rng):
    cfg = LoopDbConfig()
    base = _random_scan(rng)
    turned = _rotated(base, 12 * 2 * np.pi / cfg.n_sectors + 1e-9, node_id=1)
    np.testing.assert_allclose(
        RingKey.of(make_descriptor(base, cfg, 0)).v,
        RingKey.of(make_descriptor(turned, cfg, 0)).v,
    )


def test_shape_mismatch_rejected(rng):
    scan = _random_scan(rng)
    a = make_descriptor(scan, LoopDbConfig(), 0)
    b = make_descriptor(scan, LoopDbConfig(n_sectors=30), 0)
    with pytest.raises(InvalidInputError):
        descriptor_distance(a, b)


# ============================================
# DATABASE
# ============================================

def test_exclusion_gap(rng):
    """Recent nodes are never returned as revisits"""
    cfg = LoopDbConfig()
    db = LoopDatabase(cfg)
    scan = _random_scan(rng)
    insert(db, 0, 0, make_descriptor(scan, cfg, 0))

    near = make_descriptor(Scan.from_points(scan.points, node_id=10), cfg, 0)
    assert query(db, near, 0) is None

    far = make_descriptor(Scan.from_points(scan.points, node_id=100), cfg, 0)
    candidate = query(db, far, 0)
    assert candidate is not None
    assert (candidate.query_id, candidate.match_id) == (100, 0)
    assert candidate.distance < 1e-9


def test_floor_labels_separate_trees(rng):
    """With labels a query only sees its own floor"""
    cfg = LoopDbConfig()
    db = LoopDatabase(cfg)
    scan = _random_scan(rng)
    db.insert(0, 0, make_descriptor(scan, cfg, 0))
    revisit = make_descriptor(Scan.from_points(scan.points, node_id=200), cfg, 1)

    assert db.query(revisit, 1, use_floor_labels=True) is None
    unlabeled = db.query(revisit, 1, use_floor_labels=False)
    assert unlabeled is not None
    assert (unlabeled.query_floor, unlabeled.match_floor) == (1, 0)
    assert db.tree_size(0) == 1 and db.tree_size(1) == 0
    assert db.queries == 2


def test_duplicate_insert_rejected(rng):
    cfg = LoopDbConfig()
    db = LoopDatabase(cfg)
    d = make_descriptor(_random_scan(rng), cfg, 0)
    db.insert(3, 0, d)
    with pytest.raises(InvalidInputError):
        db.insert(3, 0, d)


def test_unrelated_scan_not_accepted(rng):
    """A different place stays above the acceptance threshold"""
    cfg = LoopDbConfig()
    db = LoopDatabase(cfg)
    db.insert(0, 0, make_descriptor(_random_scan(rng), cfg, 0))
    other = Scan.from_points(np.array([[2.0, 0.0, 0.0], [0.0, 25.0, 2.0]]), node_id=300)
    assert db.query(make_descriptor(other, cfg, 0), 0) is None


# ============================================
# RELATIVE POSE
# ============================================

def test_relative_pose_from_ray_cast_scans(twin):
    """ICP recovers the query pose in the match frame"""
    _, geometry = twin
    rng = np.random.default_rng(3)
    cfg = LoopDbConfig()
    match = simulate_scan(geometry, np.array([8.0, 1.2, SENSOR_HEIGHT]), 0.0, rng, node_id=0)
    query_scan = simulate_scan(geometry, np.array([8.5, 1.0, SENSOR_HEIGHT]), 0.1, rng, node_id=100)

    rel = estimate_relative_pose(query_scan, match, 0, cfg)
    assert rel.dx == pytest.approx(0.5, abs=0.1)
    assert rel.dy == pytest.approx(-0.2, abs=0.1)
    assert rel.dyaw == pytest.approx(0.1, abs=0.02)
    assert rel.rms <= cfg.icp_max_rms


def test_poor_alignment_rejected(twin):
    """Residuals above the limit raise RejectedLoopError"""
    _, geometry = twin
    rng = np.random.default_rng(4)
    cfg = LoopDbConfig(icp_max_rms=1e-4)
    a = simulate_scan(geometry, np.array([8.0, 1.2, SENSOR_HEIGHT]), 0.0, rng, range_sigma=0.05, node_id=0)
    b = simulate_scan(geometry, np.array([8.3, 1.2, SENSOR_HEIGHT]), 0.0, rng, range_sigma=0.05, node_id=100)
    with pytest.raises(RejectedLoopError) as excinfo:
        estimate_relative_pose(b, a, 0, cfg)
    assert excinfo.value.rms > 1e-4


# ============================================
# TWIN FLOORS
# ============================================

def test_floor_labels_suppress_false_loops(twin):
    """Identical floors: labels keep queries from matching the floor below"""
    spec, geometry = twin
    rng = np.random.default_rng(11)
    xs = np.arange(0.4, 23.7, 0.4)
    height = spec.floor_height

    def labeled(x, floor, node_id, sigma):
        sensor = np.array([x, 1.2, floor * height + SENSOR_HEIGHT])
        scan = simulate_scan(geometry, sensor, 0.0, rng, range_sigma=sigma, node_id=node_id)
        return LabeledScan(scan=scan, floor=floor, position=(float(x), 1.2))

    database = [labeled(x, 0, n, 0.0) for n, x in enumerate(xs)]
    database += [labeled(x, 1, 500 + n, 0.0) for n, x in enumerate(xs[xs <= 12.0])]
    queries = [labeled(x, 1, 1000 + n, 0.01) for n, x in enumerate(xs)]
    assert len(queries) >= 50

    cfg = LoopDbConfig()
    with_labels = loop_detection_report(database, queries, cfg, use_floor_labels=True)
    without_labels = loop_detection_report(database, queries, cfg, use_floor_labels=False)

    assert with_labels.true_positives > 0
    assert without_labels.false_positives > with_labels.false_positives
    assert with_labels.precision >= without_labels.precision
    assert with_labels.comparisons <= without_labels.comparisons


def _random_descriptor(rng, floor, node_id, cfg):
    shape = (cfg.n_rings, cfg.n_sectors)
    return ScanContext(m=rng.random(shape) * (rng.random(shape) > 0.5), floor=floor, node_id=node_id)


def test_floor_labels_shorten_queries():
    """A sparse floor is searched faster than the whole building"""
    rng = np.random.default_rng(5)
    cfg = LoopDbConfig()
    stored = [_random_descriptor(rng, 0, n, cfg) for n in range(300)]
    stored += [_random_descriptor(rng, 1, 300 + n, cfg) for n in range(4)]
    queries = [_random_descriptor(rng, 1, 10_000 + n, cfg) for n in range(100)]

    def mean_query_ms(use_floor_labels):
        db = LoopDatabase(cfg)
        for descriptor in stored:
            db.insert(descriptor.node_id, descriptor.floor, descriptor)
        for descriptor in queries:
            db.query(descriptor, 1, use_floor_labels=use_floor_labels)
        return db.mean_query_ms(), db.comparisons

    # Best of five runs per mode
    runs_with = [mean_query_ms(True) for _ in range(5)]
    runs_without = [mean_query_ms(False) for _ in range(5)]
    assert runs_with[0][1] == 4 * len(queries)
    assert runs_without[0][1] == cfg.top_k * len(queries)
    assert min(ms for ms, _ in runs_with) <= min(ms for ms, _ in runs_without)
