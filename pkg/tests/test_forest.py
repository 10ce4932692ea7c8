import itertools
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from core.libs.errors import CoverageError, InvalidArgumentError
from core.libs.costmodel import CostModel
from core.libs.pointcloud import PointSet, Window, sample_poisson
from core.libs.geodesic import WindowPolicy, brute_force_geodesic, exhaustive_mst
from core.libs.forest import (
    GeodesicTree,
    ball_from_tree,
    coalescence,
    directional_geodesic,
    directional_tree,
    euclidean_mst,
    geodesic_tree_from,
    height_field,
    height_function,
    height_sublevel_set,
    height_via_meeting,
    msf_edge_criterion,
    mst_edge_set,
    parent_stability,
    preorder,
    straightness_audit,
    tree_stats,
    verify_height_recursion,
)

POLICY = WindowPolicy(margin_scale=5.0, trust_scale=2.0)


def _centered(points):
    """Small configuration in the middle of a wide window, so every vertex is covered."""
    pts = 45.0 + np.asarray(points, dtype=float)
    return PointSet.from_points(pts, Window.cube(100.0, 2))


def _sampled(radius, seed, replicate=0):
    window = Window.around(np.zeros((1, 2)), radius + POLICY.margin(radius, 1.0, 2))
    return sample_poisson(window, 1.0, seed, replicate)


# --- geodesic trees ---

def test_three_point_tree():
    ps = _centered([[0.0, 0.0], [1.0, 0.2], [2.0, 0.0]])
    t = geodesic_tree_from(ps, CostModel(2.0), 0)
    assert len(t.edges()) == 2
    assert t.chain(2) == [2, 1, 0]
    assert t.coverage.all()


def test_tree_chains_match_enumeration():
    rng = np.random.default_rng(7)
    for _ in range(40):
        n = int(rng.integers(3, 10))
        ps = _centered(rng.random((n, 2)) * 8.0)
        cm = CostModel(float(rng.choice([1.5, 2.0, 3.0])))
        root = int(rng.integers(n))
        t = geodesic_tree_from(ps, cm, root)
        for v in range(n):
            expected = brute_force_geodesic(ps, cm, v, root)
            assert t.chain(v) == expected.vertex_ids
            assert t.cost_to_root[v] == pytest.approx(expected.cost, rel=1e-12)


def test_tree_depth_and_cost_are_consistent():
    ps = _sampled(10.0, seed=3)
    t = geodesic_tree_from(ps, CostModel(2.0), ps.nearest_particle([0.0, 0.0]), policy=POLICY)
    for v, p in t.edges():
        assert t.depth[v] == t.depth[p] + 1
        step = float(CostModel(2.0).phi(np.linalg.norm(t.points[v] - t.points[p])))
        assert t.cost_to_root[v] == pytest.approx(t.cost_to_root[p] + step, rel=1e-12)


def test_coverage_excludes_vertices_near_the_boundary():
    ps = _sampled(10.0, seed=4)
    t = geodesic_tree_from(ps, CostModel(2.0), ps.nearest_particle([0.0, 0.0]), policy=POLICY)
    boundary = ps.window.boundary_distance(ps.points)
    assert not np.any(t.coverage & (boundary < POLICY.trust_scale))
    assert t.coverage[t.root_id]


def test_tree_record_round_trip():
    ps = _centered(np.random.default_rng(1).random((8, 2)) * 5.0)
    t = geodesic_tree_from(ps, CostModel(2.0), 3)
    back = GeodesicTree.from_record(t.to_record())
    assert back.parent.tolist() == t.parent.tolist()
    assert back.cost_to_root.tolist() == t.cost_to_root.tolist()
    assert back.coverage.tolist() == t.coverage.tolist()


# --- directional trees ---

def test_directional_tree_two_particles():
    ps = _centered([[0.0, 0.0], [3.0, 0.0]])
    t = directional_tree(ps, CostModel(2.0), [1.0, 0.0], 3.0, center=ps.points[0])
    assert t.root_id == 1
    assert t.edges() == [(0, 1)]
    p = directional_geodesic(t, 0)
    assert p.vertex_ids == [0, 1]


def test_directional_tree_rejects_small_radius():
    ps = _centered([[0.0, 0.0], [3.0, 0.0]])
    with pytest.raises(InvalidArgumentError):
        directional_tree(ps, CostModel(2.0), [1.0, 0.0], 3.0, core_radius=2.0)
    with pytest.raises(InvalidArgumentError):
        directional_tree(ps, CostModel(2.0), [0.0, 0.0], 3.0)


def test_directional_coverage_stays_in_core():
    ps = _sampled(24.0, seed=5)
    t = directional_tree(ps, CostModel(2.0), [1.0, 0.0], 12.0, policy=POLICY)
    norms = np.linalg.norm(ps.points[t.covered_ids], axis=1)
    assert np.all(norms <= t.core_radius)
    outside = int(np.argmax(np.linalg.norm(ps.points, axis=1)))
    with pytest.raises(CoverageError):
        directional_geodesic(t, outside)


def test_directional_tree_default_core_at_fractional_radii():
    rng = np.random.default_rng(31)
    ps = PointSet.from_points(rng.uniform(-5.0, 5.0, (200, 2)), Window.cube(10.0, 2, -5.0))
    for radius in (1.9, 3.1, 3.8, 6.1):
        t = directional_tree(ps, CostModel(2.0), [1.0, 0.0], radius)
        assert t.core_radius == pytest.approx(radius / 3.0)
        assert t.target_radius == radius
    t = directional_tree(ps, CostModel(2.0), [1.0, 0.0], 3.1, core_radius=3.1 / 3.0)
    assert t.core_radius == pytest.approx(3.1 / 3.0)


def test_directional_geodesic_reports_trust():
    ps = _sampled(12.0, seed=5)
    t = directional_tree(ps, CostModel(2.0), [1.0, 0.0], 12.0, policy=POLICY)
    inside = int(t.covered_ids[0])
    assert directional_geodesic(t, inside).trusted
    edge = int(np.argmin(ps.window.boundary_distance(ps.points)))
    assert t.depth[edge] >= 0
    with pytest.raises(CoverageError):
        directional_geodesic(t, edge)
    p = directional_geodesic(t, edge, require_coverage=False)
    assert p.vertex_ids == t.chain(edge)
    assert p.cost == t.cost_to_root[edge]
    assert not p.trusted


def test_directional_tree_is_rotation_covariant():
    ps = _sampled(9.0, seed=11)
    quarter = np.column_stack([-ps.points[:, 1], ps.points[:, 0]])
    turned = PointSet.from_points(quarter, ps.window, ps.density)
    t = directional_tree(ps, CostModel(2.0), [1.0, 0.0], 9.0, policy=POLICY)
    r = directional_tree(turned, CostModel(2.0), [0.0, 1.0], 9.0, policy=POLICY)
    assert r.root_id == t.root_id
    assert r.parent.tolist() == t.parent.tolist()
    assert r.coverage.tolist() == t.coverage.tolist()


def test_directional_parents_settle_when_the_target_recedes():
    radius = 8.0
    ps = _sampled(2.0 * radius, seed=12)
    near = directional_tree(ps, CostModel(2.0), [1.0, 0.0], radius, policy=POLICY)
    far = directional_tree(ps, CostModel(2.0), [1.0, 0.0], 2.0 * radius, core_radius=near.core_radius,
                           policy=POLICY, graph=near.graph)
    stability = parent_stability(near, far)
    assert stability["compared"] > 0
    assert stability["compared"] == int((near.coverage & far.coverage).sum())
    assert stability["fraction"] > 0.5


# --- coalescence and heights ---

def test_height_via_meeting_agrees():
    ps = _sampled(12.0, seed=6)
    t = directional_tree(ps, CostModel(2.0), [0.0, 1.0], 12.0, policy=POLICY)
    covered = t.covered_ids.tolist()
    q0 = covered[0]
    for q in covered[1:20]:
        assert height_via_meeting(t, q, q0) == pytest.approx(height_function(t, q, q0), abs=1e-9)
        record = coalescence(t, q, q0)
        assert record.coalesced
        assert t.chain(q)[record.depth_from_first] == record.meeting_id


def test_height_field_and_sublevel_set():
    ps = _sampled(12.0, seed=7)
    t = directional_tree(ps, CostModel(2.0), [1.0, 0.0], 12.0, policy=POLICY)
    q0 = t.covered_ids[0]
    field_ = height_field(t, q0)
    assert field_[int(q0)] == 0.0
    assert int(q0) in height_sublevel_set(field_)
    assert set(field_.values) == set(t.covered_ids.tolist())
    assert field_.to_record()["format"] == "height-field"


def test_height_recursion_holds():
    ps = _sampled(12.0, seed=8)
    t = directional_tree(ps, CostModel(2.0), [1.0, 0.0], 12.0, policy=POLICY)
    field_ = height_field(t, t.covered_ids[0])
    report = verify_height_recursion(t, field_, t.covered_ids.tolist(), rng=np.random.default_rng(8))
    assert report.passed, report.witnesses
    assert report.checked["inequality"] == len(t.covered_ids)


def test_parent_stability_of_identical_trees():
    ps = _sampled(10.0, seed=9)
    t = geodesic_tree_from(ps, CostModel(2.0), ps.nearest_particle([0.0, 0.0]), policy=POLICY)
    stability = parent_stability(t, t)
    assert stability["fraction"] == 1.0
    assert stability["compared"] == int(t.coverage.sum())


def test_ball_from_tree():
    ps = _centered([[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]])
    t = geodesic_tree_from(ps, CostModel(2.0), 0)
    assert ball_from_tree(t, 0.0) == [0]
    assert ball_from_tree(t, 1.0) == [0, 1]
    with pytest.raises(InvalidArgumentError):
        ball_from_tree(t, -1.0)


# --- spanning tree and forest criterion ---

def test_mst_matches_enumeration_and_criterion():
    rng = np.random.default_rng(11)
    for _ in range(30):
        n = int(rng.integers(2, 7))
        ps = _centered(rng.random((n, 2)) * 6.0)
        edges = mst_edge_set(euclidean_mst(ps))
        assert edges == exhaustive_mst(ps)[0]
        for i, j in itertools.combinations(range(n), 2):
            assert msf_edge_criterion(ps, i, j) == ((i, j) in edges)


def test_mst_cost_to_root_is_euclidean():
    ps = _centered([[0.0, 0.0], [3.0, 0.0], [3.0, 4.0]])
    t = euclidean_mst(ps)
    assert t.cm is None
    assert t.cost_to_root.tolist() == pytest.approx([0.0, 3.0, 7.0])


def test_msf_criterion_rejects_bad_pairs():
    ps = _centered([[0.0, 0.0], [1.0, 0.0]])
    with pytest.raises(InvalidArgumentError):
        msf_edge_criterion(ps, 0, 0)


# --- straightness and statistics ---

def test_preorder_subtrees_are_contiguous():
    ps = _sampled(8.0, seed=12)
    t = geodesic_tree_from(ps, CostModel(2.0), ps.nearest_particle([0.0, 0.0]), policy=POLICY)
    order, tin, tout = preorder(t)
    for v, p in t.edges():
        assert tin[p] < tin[v] and tout[v] <= tout[p]
    assert len(order) == int(np.sum(t.depth >= 0))


def test_straightness_audit_report():
    ps = _sampled(12.0, seed=13)
    t = geodesic_tree_from(ps, CostModel(2.0), ps.nearest_particle([0.0, 0.0]), policy=POLICY)
    report = straightness_audit(t)
    assert report["checked"] == int(t.coverage.sum()) - 1
    assert report["violation_count"] >= len(report["violations"])
    assert set(report["beyond"]) == {"1.0", "2.0", "4.0", "8.0", "16.0", "32.0", "64.0"}
    with pytest.raises(InvalidArgumentError):
        straightness_audit(t, q_id=(t.root_id + 1) % t.n)


def test_tree_stats():
    ps = _centered([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]])
    stats = tree_stats(geodesic_tree_from(ps, CostModel(2.0), 0))
    assert stats["edges"] == 3
    assert stats["max_depth"] == 3
    assert stats["degree_histogram"] == {"1": 2, "2": 2}
    assert stats["dispersal"] == pytest.approx(0.0, abs=1e-12)
