"""Replicate tasks for the structural experiment kinds.

Same contract as the estimator tasks: a (stage, parameter, replicate) tuple
in, a flat dict out, fixed arguments bound with functools.partial.
"""
import itertools
import math

import numpy as np

from core.libs.costmodel import CostModel, lens_property_report
from core.libs.costmodel.lens_report import MAX_WITNESSES
from core.libs.forest import (
    coalescence,
    directional_tree,
    euclidean_mst,
    geodesic_tree_from,
    height_field,
    msf_edge_criterion,
    mst_edge_set,
    parent_stability,
    straightness_audit,
    tree_stats,
    verify_height_recursion,
)
from core.libs.geodesic import (
    DEFAULT_NEIGHBOR_BUDGET,
    DEFAULT_POLICY,
    EXACT_ENDPOINTS,
    PARTICLE_ENDPOINTS,
    brute_force_passage_time,
    build_candidate_graph,
    crossing_audit,
    exhaustive_minimax,
    exhaustive_mst,
    geodesic,
    metric_axioms_audit,
    minimax_distance,
    no_doubling_back_audit,
    passage_time,
    passage_time_gap_report,
    staircase_upper_bound,
    subpath_audit,
    trusted_passage_time,
)
from core.libs.pointcloud import PointSet, Window, sample_poisson, substream_rng

ORACLE_MAX_POINTS = 8
ORACLE_MST_POINTS = 6
ORACLE_SIDE = 4.0
ORACLE_TOLERANCE = 1e-12
AUDIT_TRIPLES = 64
MSF_SIDE = 6.0
# None is the pure power
LENS_H_VALUES = (None, 0.5, 2.0)


def _same(a, b):
    return math.isclose(a, b, rel_tol=ORACLE_TOLERANCE, abs_tol=ORACLE_TOLERANCE)


def oracle_replicate(task, d, alpha, seed, k=DEFAULT_NEIGHBOR_BUDGET):
    """One small random instance checked against every exhaustive oracle."""
    stage, _, replicate = task
    rng = substream_rng(seed, replicate, stage)
    n = int(rng.integers(2, ORACLE_MAX_POINTS + 1))
    window = Window.cube(ORACLE_SIDE, d)
    ps = PointSet.from_points(rng.random((n, d)) * ORACLE_SIDE, window, seed=seed)
    x, y = rng.random((2, d)) * ORACLE_SIDE
    cm = CostModel(alpha)
    g = build_candidate_graph(ps, cm, k)
    checks = {}
    paths = {}
    for mode in (PARTICLE_ENDPOINTS, EXACT_ENDPOINTS):
        cost, result = passage_time(ps, cm, x, y, mode, k, graph=g)
        expected, oracle = brute_force_passage_time(ps, cm, x, y, mode)
        checks[mode] = _same(cost, expected) and result.vertex_ids == oracle.vertex_ids
        paths[mode] = result
    a, b = sorted(rng.choice(n, size=2, replace=False).tolist())
    value, _ = minimax_distance(ps, a, b)
    checks["minimax"] = _same(value, exhaustive_minimax(ps, a, b)[0])
    tree_edges = mst_edge_set(euclidean_mst(ps))
    if n <= ORACLE_MST_POINTS:
        checks["mst"] = tree_edges == exhaustive_mst(ps)[0]
    checks["msf_criterion"] = all(msf_edge_criterion(ps, i, j) == ((i, j) in tree_edges)
                                  for i, j in itertools.combinations(range(n), 2))
    audits = graph_audits(g, paths[PARTICLE_ENDPOINTS], rng)
    audits["staircase"] = staircase_violations(ps, cm, x, y, paths[EXACT_ENDPOINTS].cost)
    return {"stage": stage, "replicate": replicate, "n": n, "checks": checks, "match": all(checks.values()),
            "audits": audits, "audit_violations": sum(audits.values())}


def staircase_violations(ps, cm, x, y, cost):
    """1 when the staircase walk from x to y beats `cost`, else 0."""
    bound, _ = staircase_upper_bound(ps, cm, x, y)
    return int(cost > bound + ORACLE_TOLERANCE * max(1.0, bound))


def graph_audits(g, path, rng, triples=AUDIT_TRIPLES):
    """Violation counts of the structural audits around one particle geodesic on graph g."""
    n = g.n
    ids = list(itertools.permutations(range(n), 3))
    if len(ids) > triples:
        ids = [ids[i] for i in sorted(rng.choice(len(ids), size=triples, replace=False).tolist())]
    audits = {
        "metric_axioms": len(metric_axioms_audit(g, ids)),
        "subpath": len(subpath_audit(g, path, rng=rng)),
        "doubling_back": len(no_doubling_back_audit(path)),
    }
    if g.ps.dimension == 2 and g.cm.alpha >= 2.0:
        a, b = rng.choice(n, size=2, replace=False).tolist()
        audits["crossing"] = len(crossing_audit(path, geodesic(g, a, b)))
    return audits


def sample_replicate(task, d, density, seed, side):
    stage, _, replicate = task
    ps = sample_poisson(Window.cube(side, d, -side / 2.0), density, seed, replicate, stage)
    return {"stage": stage, "replicate": replicate, "pointset": ps.to_record()}


def geodesic_replicate(task, d, cm, density, seed, policy=DEFAULT_POLICY, k=DEFAULT_NEIGHBOR_BUDGET,
                       mode=PARTICLE_ENDPOINTS, gap_report=False):
    stage, ell, replicate = task
    x = np.zeros(d)
    y = np.zeros(d)
    y[0] = ell
    cost, result, ps = trusted_passage_time(cm, x, y, density, seed, replicate, stage, mode, k, policy=policy)
    record = {"stage": stage, "ell": ell, "replicate": replicate, "cost": cost, "trusted": result.trusted,
              "n": len(ps), "path": result.to_record()}
    record["audits"] = {
        "staircase": staircase_violations(ps, cm, result.points[0], result.points[-1], cost),
        "doubling_back": len(no_doubling_back_audit(result)),
    }
    if gap_report:
        record["gap"] = passage_time_gap_report(ps, cm, x, y, k, policy)
    return record


def _ball_sample(d, radius, density, seed, replicate, stage, policy):
    window = Window.around(np.zeros((1, d)), radius + policy.margin(radius, density, d))
    return sample_poisson(window, density, seed, replicate, stage)


def tree_replicate(task, d, cm, density, seed, radius, policy=DEFAULT_POLICY, k=DEFAULT_NEIGHBOR_BUDGET,
                   keep_tree=False):
    """Geodesic tree from the particle nearest the origin: shape statistics and coverage."""
    stage, _, replicate = task
    ps = _ball_sample(d, radius, density, seed, replicate, stage, policy)
    t = geodesic_tree_from(ps, cm, ps.nearest_particle(np.zeros(d)), k, policy=policy)
    record = {"stage": stage, "replicate": replicate, "radius": radius, "covered": int(t.coverage.sum())}
    record.update(tree_stats(t))
    if keep_tree:
        record["tree"] = t.to_record()
    return record


def directional_replicate(task, d, cm, density, seed, radius, policy=DEFAULT_POLICY, k=DEFAULT_NEIGHBOR_BUDGET):
    """Directional trees at R and 2R toward e1 on one sample.

    Every covered particle of the R-tree must coalesce with the first one;
    parent stability is measured on the R-tree core.
    """
    stage, _, replicate = task
    ps = _ball_sample(d, 2.0 * radius, density, seed, replicate, stage, policy)
    e1 = np.zeros(d)
    e1[0] = 1.0
    near = directional_tree(ps, cm, e1, radius, k=k, policy=policy)
    far = directional_tree(ps, cm, e1, 2.0 * radius, core_radius=near.core_radius, k=k, policy=policy,
                           graph=near.graph)
    covered = near.covered_ids.tolist()
    failures = sum(1 for q in covered[1:] if not coalescence(near, q, covered[0]).coalesced)
    record = {"stage": stage, "replicate": replicate, "radius": radius, "root": near.root_id,
              "covered": len(covered), "stability": parent_stability(near, far),
              "coalescence_pairs": max(len(covered) - 1, 0), "coalescence_failures": failures}
    record.update(tree_stats(near))
    return record


def msf_replicate(task, d, density, seed, side=MSF_SIDE):
    """Euclidean MST of a small sample and the pairwise edge criterion against it."""
    stage, _, replicate = task
    ps = sample_poisson(Window.cube(side, d), density, seed, replicate, stage)
    n = len(ps)
    if n < 2:
        return {"stage": stage, "replicate": replicate, "n": n, "edges": 0, "pairs": 0, "mismatches": 0,
                "total_length": 0.0}
    t = euclidean_mst(ps)
    edges = mst_edge_set(t)
    mismatches = [[i, j] for i, j in itertools.combinations(range(n), 2)
                  if msf_edge_criterion(ps, i, j) != ((i, j) in edges)]
    lengths = [float(np.linalg.norm(ps.points[i] - ps.points[j])) for i, j in sorted(edges)]
    return {"stage": stage, "replicate": replicate, "n": n, "edges": len(edges), "pairs": n * (n - 1) // 2,
            "mismatches": len(mismatches), "mismatch_pairs": mismatches[:20], "total_length": math.fsum(lengths)}


def height_replicate(task, d, cm, density, seed, radius, policy=DEFAULT_POLICY, k=DEFAULT_NEIGHBOR_BUDGET):
    """Height field of a directional tree based at the particle nearest the origin, recursion checked on the core."""
    stage, _, replicate = task
    ps = _ball_sample(d, radius, density, seed, replicate, stage, policy)
    e1 = np.zeros(d)
    e1[0] = 1.0
    t = directional_tree(ps, cm, e1, radius, k=k, policy=policy)
    field_ = height_field(t, ps.nearest_particle(np.zeros(d)))
    report = verify_height_recursion(t, field_, t.covered_ids.tolist(), rng=substream_rng(seed, replicate, stage))
    record = {"stage": stage, "replicate": replicate, "radius": radius, "base": field_.base_id,
              "sublevel_size": len(field_.sublevel_set())}
    record.update(report.to_dict())
    return record


def straightness_replicate(task, d, cm, density, seed, radius, eps, policy=DEFAULT_POLICY,
                           k=DEFAULT_NEIGHBOR_BUDGET):
    stage, _, replicate = task
    ps = _ball_sample(d, radius, density, seed, replicate, stage, policy)
    t = geodesic_tree_from(ps, cm, ps.nearest_particle(np.zeros(d)), k, policy=policy)
    record = {"stage": stage, "replicate": replicate, "radius": radius}
    record.update(straightness_audit(t, eps=eps))
    return record


def lens_replicate(task, d, alpha, seed, trials, E=1.0, h_values=LENS_H_VALUES):
    """Lens and cost-function checks for the pure power and for each truncation h in h_values."""
    stage, _, replicate = task
    record = {"stage": stage, "replicate": replicate, "alpha": alpha, "trials": int(trials), "E": float(E),
              "violations": {}, "by_h": [], "witnesses": []}
    for i, h in enumerate(h_values):
        cm = CostModel(alpha, math.inf if h is None else float(h))
        report = lens_property_report(cm, trials, seed, E=E, d=d, replicate=replicate,
                                      stage=stage * len(h_values) + i)
        summary = report.to_dict()
        for check, count in summary["violations"].items():
            record["violations"][check] = record["violations"].get(check, 0) + count
        record["by_h"].append({"h": summary["h"], "violations": report.total_violations, "passed": report.passed})
        record["witnesses"].extend(dict(w, cost_h=summary["h"]) for w in summary["witnesses"])
    del record["witnesses"][MAX_WITNESSES:]
    record["passed"] = all(entry["passed"] for entry in record["by_h"])
    return record
