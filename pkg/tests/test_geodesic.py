import itertools
import math
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from core.libs.errors import EmptyDomainError, GuardError, InvalidArgumentError
from core.libs.costmodel import CostModel
from core.libs.pointcloud import PointSet, Window, sample_poisson
from core.libs.geodesic import (
    EXACT_ENDPOINTS,
    PARTICLE_ENDPOINTS,
    SOURCE_TERMINAL,
    TARGET_TERMINAL,
    WindowPolicy,
    all_pairs_lens_edges,
    brute_force_geodesic,
    brute_force_passage_time,
    build_candidate_graph,
    crossing_audit,
    exhaustive_minimax,
    exhaustive_mst,
    geodesic,
    metric_axioms_audit,
    minimax_distance,
    mst_edges,
    no_doubling_back_audit,
    passage_time,
    passage_time_gap_report,
    representatives,
    staircase_upper_bound,
    subpath_audit,
    truncated_passage_time,
    trusted_passage_time,
)

ALPHAS = (1.5, 2.0, 3.0)


def _small_sets(count, max_n=9, seed=0, side=4.0):
    rng = np.random.default_rng(seed)
    window = Window.cube(side, 2)
    for _ in range(count):
        n = int(rng.integers(2, max_n + 1))
        yield PointSet.from_points(rng.random((n, 2)) * side, window), rng


def _line(*xs):
    pts = [[x, 1.0] for x in xs]
    return PointSet.from_points(pts, Window.cube(10.0, 2))


# --- candidate graph and geodesics ---

def test_two_point_geodesic_is_direct_edge():
    ps = PointSet.from_points([[1.0, 1.0], [3.0, 2.0]], Window.cube(5.0, 2))
    g = build_candidate_graph(ps, CostModel(2.0))
    p = geodesic(g, 0, 1)
    assert p.vertex_ids == [0, 1]
    assert p.cost == pytest.approx(5.0)


def test_geodesic_prefers_two_short_links():
    ps = _line(0.0, 1.0, 2.0)
    p = geodesic(build_candidate_graph(ps, CostModel(2.0)), 0, 2)
    assert p.vertex_ids == [0, 1, 2]
    assert p.cost == pytest.approx(2.0)


def test_candidate_graph_needs_two_particles():
    ps = PointSet.from_points([[1.0, 1.0]], Window.cube(5.0, 2))
    with pytest.raises(InvalidArgumentError):
        build_candidate_graph(ps, CostModel(2.0))


def test_empty_lens_filter_matches_all_pairs_reference():
    ps = sample_poisson(Window.cube(8.0, 2), 1.0, seed=5)
    for alpha in ALPHAS:
        cm = CostModel(alpha)
        g = build_candidate_graph(ps, cm, k=len(ps) - 1)
        assert g.edge_set() == all_pairs_lens_edges(ps, cm)


def test_geodesic_matches_enumeration():
    for ps, rng in _small_sets(150, seed=1):
        cm = CostModel(float(rng.choice(ALPHAS)))
        g = build_candidate_graph(ps, cm)
        a, b = rng.choice(len(ps), size=2, replace=False).tolist()
        found = geodesic(g, a, b)
        expected = brute_force_geodesic(ps, cm, a, b)
        assert found.vertex_ids == expected.vertex_ids
        assert found.cost == pytest.approx(expected.cost, rel=1e-12)


def test_geodesic_cost_symmetric():
    ps = sample_poisson(Window.cube(10.0, 2), 1.0, seed=8)
    g = build_candidate_graph(ps, CostModel(2.0))
    forward, backward = geodesic(g, 0, 5), geodesic(g, 5, 0)
    assert forward.cost == pytest.approx(backward.cost, rel=1e-12)


def test_near_linear_cost_uses_direct_edges():
    ps = sample_poisson(Window.cube(6.0, 2), 1.0, seed=3)
    g = build_candidate_graph(ps, CostModel(1.0 + 1e-9), k=len(ps) - 1)
    rng = np.random.default_rng(2)
    for a, b in rng.choice(len(ps), size=(20, 2)).tolist():
        if a != b:
            assert geodesic(g, a, b).vertex_ids == [a, b]


# --- passage times ---

def test_particle_mode_same_particle_costs_zero():
    ps = sample_poisson(Window.cube(10.0, 2), 1.0, seed=4)
    cost, result = passage_time(ps, CostModel(2.0), [5.0, 5.0], [5.0, 5.0])
    assert cost == 0.0
    assert result.hops == 0


def test_passage_time_matches_enumeration_in_both_modes():
    for ps, rng in _small_sets(120, seed=2):
        cm = CostModel(float(rng.choice(ALPHAS)))
        x, y = rng.random((2, 2)) * 4.0
        for mode in (PARTICLE_ENDPOINTS, EXACT_ENDPOINTS):
            cost, result = passage_time(ps, cm, x, y, mode)
            expected, oracle = brute_force_passage_time(ps, cm, x, y, mode)
            assert result.vertex_ids == oracle.vertex_ids
            assert cost == pytest.approx(expected, rel=1e-12)


def test_exact_mode_paths_run_between_virtual_terminals():
    ps = sample_poisson(Window.cube(10.0, 2), 1.0, seed=6)
    _, result = passage_time(ps, CostModel(2.0), [1.0, 1.0], [9.0, 9.0], EXACT_ENDPOINTS)
    assert result.vertex_ids[0] == SOURCE_TERMINAL
    assert result.vertex_ids[-1] == TARGET_TERMINAL
    assert result.points[0].tolist() == [1.0, 1.0]


def test_passage_time_rejects_unknown_mode_and_empty_set():
    ps = PointSet.from_points(np.zeros((0, 2)), Window.cube(1.0, 2))
    with pytest.raises(EmptyDomainError):
        passage_time(ps, CostModel(2.0), [0.1, 0.1], [0.5, 0.5])
    with pytest.raises(InvalidArgumentError):
        passage_time(ps, CostModel(2.0), [0.1, 0.1], [0.5, 0.5], mode="nearest")


def test_truncated_limit_recovers_exact_endpoint_time():
    ps = sample_poisson(Window.cube(10.0, 2), 1.0, seed=9)
    x, y = np.array([1.0, 2.0]), np.array([8.0, 7.0])
    exact, _ = passage_time(ps, CostModel(2.0), x, y, EXACT_ENDPOINTS)
    truncated, result = truncated_passage_time(ps, CostModel(2.0, 1e6), 1e-9, x, y)
    assert truncated == pytest.approx(exact, rel=1e-12)
    assert result.extras["representatives"] == len(ps)


def test_truncated_matches_restricted_enumeration():
    for ps, rng in _small_sets(60, seed=3):
        cm = CostModel(2.0, h=1.0)
        eps_sub = 1.5
        x, y = rng.random((2, 2)) * 4.0
        reps = representatives(ps, eps_sub)
        cost, _ = truncated_passage_time(ps, cm, eps_sub, x, y)
        expected, _ = brute_force_passage_time(ps, cm, x, y, EXACT_ENDPOINTS, intermediates=reps)
        assert cost == pytest.approx(expected, rel=1e-12)


def test_truncated_needs_finite_h():
    ps = sample_poisson(Window.cube(5.0, 2), 1.0, seed=1)
    with pytest.raises(InvalidArgumentError):
        truncated_passage_time(ps, CostModel(2.0), 0.1, [1.0, 1.0], [4.0, 4.0])


def test_trusted_passage_time_is_reproducible():
    cm = CostModel(2.0)
    policy = WindowPolicy(margin_scale=5.0, trust_scale=2.0)
    first = trusted_passage_time(cm, [0.0, 0.0], [10.0, 0.0], 1.0, seed=42, replicate=3, policy=policy)
    again = trusted_passage_time(cm, [0.0, 0.0], [10.0, 0.0], 1.0, seed=42, replicate=3, policy=policy)
    assert first[0] == again[0]
    assert first[1].vertex_ids == again[1].vertex_ids
    assert "regrowths" in first[1].extras


def test_gap_report_fields():
    ps = sample_poisson(Window.cube(12.0, 2), 1.0, seed=10)
    report = passage_time_gap_report(ps, CostModel(2.0), [2.0, 2.0], [10.0, 10.0])
    assert report["gap"] == pytest.approx(abs(report["t_particle"] - report["t_exact"]))
    assert report["gamma_x"] >= 0.0 and report["gamma_y"] >= 0.0
    assert isinstance(report["within_bound"], bool)


# --- oracles ---

def test_brute_force_guard():
    ps = sample_poisson(Window.cube(6.0, 2), 1.0, seed=1)
    assert len(ps) > 12
    with pytest.raises(GuardError):
        brute_force_geodesic(ps, CostModel(2.0), 0, 1)


def test_minimax_triangle():
    cx = (1.0 - 1.44 + 2.25) / 3.0
    pts = [[1.0, 1.0], [2.5, 1.0], [1.0 + cx, 1.0 + math.sqrt(1.0 - cx * cx)]]
    ps = PointSet.from_points(pts, Window.cube(4.0, 2))
    value, path = minimax_distance(ps, 0, 1)
    assert value == pytest.approx(1.2)
    assert path == [0, 2, 1]


def test_minimax_and_mst_match_enumeration():
    for ps, rng in _small_sets(80, max_n=7, seed=4):
        a, b = rng.choice(len(ps), size=2, replace=False).tolist()
        assert minimax_distance(ps, a, b)[0] == pytest.approx(exhaustive_minimax(ps, a, b)[0], rel=1e-12)
        edges = {(min(i, j), max(i, j)) for i, j, _ in mst_edges(ps.points)}
        assert edges == exhaustive_mst(ps)[0]


def test_mst_spans_repeated_points_above_the_all_pairs_limit():
    rng = np.random.default_rng(12)
    base = rng.random((60, 2)) * 10.0
    pts = np.vstack([base, base[:10]])
    edges = mst_edges(pts)
    assert len(edges) == len(pts) - 1
    assert sum(length == 0.0 for _, _, length in edges) == 10
    ps = PointSet.from_points(pts, Window.cube(10.0, 2))
    value, _ = minimax_distance(ps, 3, 63)
    assert value == 0.0


# --- staircase ---

def test_staircase_bounds_exact_passage_time():
    cm = CostModel(2.0)
    for seed in range(5):
        ps = sample_poisson(Window.cube(20.0, 2), 1.0, seed=seed)
        x, y = np.array([2.0, 10.0]), np.array([18.0, 10.0])
        upper, result = staircase_upper_bound(ps, cm, x, y)
        exact, _ = passage_time(ps, cm, x, y, EXACT_ENDPOINTS)
        assert upper >= exact * (1.0 - 1e-12)
        assert result.vertex_ids[0] == SOURCE_TERMINAL
        assert result.vertex_ids[-1] == TARGET_TERMINAL


def test_staircase_rejects_empty_set():
    ps = PointSet.from_points(np.zeros((0, 2)), Window.cube(1.0, 2))
    with pytest.raises(EmptyDomainError):
        staircase_upper_bound(ps, CostModel(2.0), [0.0, 0.0], [1.0, 1.0])


# --- audits ---

def test_crossing_audit_trivial_cases():
    ps = sample_poisson(Window.cube(30.0, 2), 1.0, seed=12)
    g = build_candidate_graph(ps, CostModel(2.0))
    p = geodesic(g, 0, 1)
    assert crossing_audit(p, p) == []
    near = PointSet.from_points([[0.0, 0.0], [1.0, 0.0], [0.0, 9.0], [1.0, 9.0]], Window.cube(10.0, 2))
    gn = build_candidate_graph(near, CostModel(2.0))
    assert crossing_audit(geodesic(gn, 0, 1), geodesic(gn, 2, 3)) == []


def test_geodesics_do_not_cross():
    ps = sample_poisson(Window.cube(20.0, 2), 1.0, seed=13)
    g = build_candidate_graph(ps, CostModel(2.0))
    rng = np.random.default_rng(13)
    paths = [geodesic(g, a, b) for a, b in rng.choice(len(ps), size=(15, 2)).tolist() if a != b]
    for p1, p2 in itertools.combinations(paths, 2):
        assert crossing_audit(p1, p2) == []


def test_geodesics_do_not_double_back_and_subpaths_are_geodesics():
    ps = sample_poisson(Window.cube(25.0, 2), 1.0, seed=14)
    g = build_candidate_graph(ps, CostModel(2.0))
    p = geodesic(g, ps.nearest_particle([1.0, 1.0]), ps.nearest_particle([24.0, 24.0]))
    assert no_doubling_back_audit(p) == []
    assert subpath_audit(g, p) == []
    single = geodesic(build_candidate_graph(_line(0.0, 5.0), CostModel(2.0)), 0, 1)
    assert no_doubling_back_audit(single) == []


def test_metric_axioms_hold():
    ps = sample_poisson(Window.cube(10.0, 2), 1.0, seed=15)
    g = build_candidate_graph(ps, CostModel(3.0))
    rng = np.random.default_rng(15)
    triples = [tuple(t) for t in rng.choice(len(ps), size=(20, 3)).tolist()]
    assert metric_axioms_audit(g, triples) == []


def test_window_policy_margin_band_and_window():
    policy = WindowPolicy()
    assert policy.margin(0.0, 1.0, 2) == pytest.approx(20.0)
    assert policy.margin(10000.0, 1.0, 2) == pytest.approx(10000.0 ** 0.8)
    assert policy.margin(0.0, 1.0, 2, attempt=2) == pytest.approx(80.0)
    assert policy.trust_band(0.0, 4.0, 2) == pytest.approx(2.5)
    window = policy.window_for([0.0, 0.0], [10.0, 0.0], 1.0)
    assert window.lower == pytest.approx((-20.0, -20.0))
    assert window.upper == pytest.approx((30.0, 20.0))
    with pytest.raises(InvalidArgumentError):
        WindowPolicy.from_dict({"margin": 3.0})
    with pytest.raises(InvalidArgumentError):
        WindowPolicy(trust_scale=0.0)
