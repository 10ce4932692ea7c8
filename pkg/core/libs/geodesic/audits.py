"""Structural audits of computed geodesics.

None of these raise on a failed property: they return the violations found,
each with enough coordinates to reproduce it.
"""
import itertools

import numpy as np

from core.libs.costmodel.cost_model import metric_distance
from core.libs.costmodel.geometry import segments_intersect
from core.libs.errors import InvalidArgumentError
from core.libs.geodesic.search import geodesic

# --- Constants ---
DOUBLING_SAMPLES = 16
DOUBLING_MAX_PAIRS = 10_000
VERTEX_FACTOR = 16.0
SPAN_FACTOR = 33.0
DOUBLING_SLACK = 1e-9
METRIC_SLACK = 1e-10
# 4 x 4 grid of link parameters, endpoints included
_GRID = np.array([0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0])
_SAMPLE_T = np.array(list(itertools.product(_GRID, _GRID)))


def _same_vertex(p1, i, p2, j):
    return p1.vertex_ids[i] == p2.vertex_ids[j] and np.array_equal(p1.points[i], p2.points[j])


def crossing_audit(p1, p2):
    """Link pairs of two planar geodesics that intersect without sharing an endpoint."""
    if p1.points.shape[1] != 2 or p2.points.shape[1] != 2:
        raise InvalidArgumentError("crossing audit is defined in dimension 2 only")
    violations = []
    if p1.hops == 0 or p2.hops == 0:
        return violations
    a0, a1 = p1.points[:-1], p1.points[1:]
    b0, b1 = p2.points[:-1], p2.points[1:]
    a_lo, a_hi = np.minimum(a0, a1), np.maximum(a0, a1)
    b_lo, b_hi = np.minimum(b0, b1), np.maximum(b0, b1)
    # bounding-box prefilter
    overlap = np.all((a_lo[:, None, :] <= b_hi[None, :, :] + 1e-9) & (b_lo[None, :, :] <= a_hi[:, None, :] + 1e-9),
                     axis=2)
    for i, j in zip(*np.nonzero(overlap)):
        i, j = int(i), int(j)
        if any(_same_vertex(p1, u, p2, v) for u in (i, i + 1) for v in (j, j + 1)):
            continue
        if segments_intersect(a0[i], a1[i], b0[j], b1[j]):
            violations.append({
                "link_a": i,
                "link_b": j,
                "ids_a": [p1.vertex_ids[i], p1.vertex_ids[i + 1]],
                "ids_b": [p2.vertex_ids[j], p2.vertex_ids[j + 1]],
            })
    return violations


def no_doubling_back_audit(p, samples=DOUBLING_SAMPLES, max_pairs=DOUBLING_MAX_PAIRS):
    """Check |q_{i+1} - a| <= 16|a - b|, |q_j - b| <= 16|a - b|, |q_{i+1} - q_j| <= 33|a - b|.

    a runs over points of link i, b over points of link j > i; each link pair
    contributes `samples` (a, b) combinations from a fixed parameter grid.
    """
    pts = p.points
    links = len(pts) - 1
    violations = []
    if links < 2:
        return violations
    t = _SAMPLE_T[:samples]
    link_pairs = [(i, j) for i in range(links) for j in range(i + 1, links)]
    budget = max(1, max_pairs // len(t))
    if len(link_pairs) > budget:
        keep = np.unique(np.linspace(0, len(link_pairs) - 1, budget).astype(int))
        link_pairs = [link_pairs[k] for k in keep.tolist()]
    for i, j in link_pairs:
        a = (1.0 - t[:, :1]) * pts[i] + t[:, :1] * pts[i + 1]
        b = (1.0 - t[:, 1:]) * pts[j] + t[:, 1:] * pts[j + 1]
        ab = np.linalg.norm(a - b, axis=1)
        first = np.linalg.norm(pts[i + 1] - a, axis=1)
        second = np.linalg.norm(pts[j] - b, axis=1)
        span = float(np.linalg.norm(pts[i + 1] - pts[j]))
        bad = ((first > VERTEX_FACTOR * ab + DOUBLING_SLACK)
               | (second > VERTEX_FACTOR * ab + DOUBLING_SLACK)
               | (span > SPAN_FACTOR * ab + DOUBLING_SLACK))
        for s in np.nonzero(bad)[0].tolist():
            violations.append({"link_a": i, "link_b": j, "a": a[s].tolist(), "b": b[s].tolist()})
    return violations


def subpath_audit(g, p, pairs=8, rng=None):
    """Re-query sampled contiguous particle subpaths; each must come back unchanged."""
    particle_positions = [i for i, v in enumerate(p.vertex_ids) if v >= 0]
    violations = []
    if len(particle_positions) < 2:
        return violations
    rng = rng if rng is not None else np.random.default_rng(0)
    candidates = list(itertools.combinations(particle_positions, 2))
    if len(candidates) > pairs:
        picks = rng.choice(len(candidates), size=pairs, replace=False)
        candidates = [candidates[k] for k in sorted(picks.tolist())]
    for s, e in candidates:
        expected = p.vertex_ids[s:e + 1]
        again = geodesic(g, expected[0], expected[-1])
        if again.vertex_ids != expected:
            violations.append({"start": s, "end": e, "expected": expected, "found": again.vertex_ids})
    return violations


def metric_axioms_audit(g, triples):
    """Symmetry and triangle inequality of D = T^(1/alpha) on particle triples."""
    cm = g.cm
    cache = {}

    def distance(u, v):
        if (u, v) not in cache:
            cache[(u, v)] = metric_distance(geodesic(g, u, v).cost, cm)
        return cache[(u, v)]

    violations = []
    for a, b, c in triples:
        ab, ba = distance(a, b), distance(b, a)
        if abs(ab - ba) > METRIC_SLACK * max(1.0, ab):
            violations.append({"kind": "symmetry", "ids": [a, b], "values": [ab, ba]})
        ac, bc = distance(a, c), distance(b, c)
        if ac > (ab + bc) * (1.0 + METRIC_SLACK):
            violations.append({"kind": "triangle", "ids": [a, b, c], "values": [ac, ab, bc]})
    return violations
