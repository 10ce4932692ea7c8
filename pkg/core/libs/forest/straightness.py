"""Cone confinement of tree branches and descriptive tree statistics."""
from collections import Counter

import numpy as np

from core.libs.costmodel.geometry import angles_to
from core.libs.errors import InvalidArgumentError

DEFAULT_STRAIGHTNESS_OFFSET = 0.05
DEFAULT_RADII = (1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0)


def preorder(t):
    """Preorder of the reached vertices with subtree slices: subtree(v) = order[tin[v]:tout[v]]."""
    kids = t.children()
    order = []
    tin = np.full(t.n, -1, dtype=np.int64)
    tout = np.full(t.n, -1, dtype=np.int64)
    stack = [(t.root_id, False)]
    while stack:
        v, done = stack.pop()
        if done:
            tout[v] = len(order)
            continue
        tin[v] = len(order)
        order.append(v)
        stack.append((v, True))
        for c in reversed(kids[v]):
            stack.append((c, False))
    return np.asarray(order, dtype=np.int64), tin, tout


def cone_angle(distance, offset):
    """f*(l) = l ** (-1/4 + offset)."""
    return distance ** (-0.25 + offset)


def straightness_audit(t, q_id=None, eps=DEFAULT_STRAIGHTNESS_OFFSET, radii=DEFAULT_RADII):
    """For each covered q' != q, are all covered descendants of q' inside q + C(q' - q, f*(|q' - q|))?"""
    q_id = t.root_id if q_id is None else int(q_id)
    if q_id != t.root_id:
        raise InvalidArgumentError(f"straightness is audited from the tree root {t.root_id}, got {q_id}")
    report = {"root": q_id, "offset": eps, "checked": 0, "violations": [], "beyond": {}}
    if t.n == 0 or not np.any(t.coverage):
        report["beyond"] = {str(r): 0 for r in radii}
        return report
    order, tin, tout = preorder(t)
    apex = t.points[q_id]
    violators = []
    for v in t.covered_ids.tolist():
        if v == q_id:
            continue
        axis = t.points[v] - apex
        distance = float(np.linalg.norm(axis))
        if distance == 0.0:
            continue
        subtree = order[tin[v]:tout[v]]
        subtree = subtree[t.coverage[subtree]]
        report["checked"] += 1
        limit = cone_angle(distance, eps)
        angles = angles_to(axis, t.points[subtree] - apex)
        worst = int(np.argmax(angles)) if len(angles) else -1
        if worst >= 0 and angles[worst] > limit:
            violators.append(distance)
            if len(report["violations"]) < 50:
                report["violations"].append({"q_prime": v, "distance": distance, "limit": limit,
                                             "descendant": int(subtree[worst]), "angle": float(angles[worst])})
    violators = np.asarray(violators)
    report["violation_count"] = int(len(violators))
    report["beyond"] = {str(r): int(np.sum(violators > r)) for r in radii}
    return report


def tree_stats(t):
    """Degree histogram, depth and the direction dispersal along the deepest branch."""
    reached = np.nonzero(t.depth >= 0)[0]
    degree = np.zeros(t.n, dtype=np.int64)
    for v, p in t.edges():
        degree[v] += 1
        degree[p] += 1
    histogram = Counter(int(degree[v]) for v in reached.tolist())
    stats = {
        "n": int(len(reached)),
        "edges": len(t.edges()),
        "degree_histogram": {str(k): histogram[k] for k in sorted(histogram)},
        "max_degree": int(degree[reached].max()) if len(reached) else 0,
        "max_depth": int(t.depth.max()) if len(reached) else 0,
        "dispersal": 0.0,
    }
    if len(reached) > 1:
        deepest = int(reached[np.argmax(t.depth[reached])])
        branch = t.chain(deepest)[::-1]
        offsets = t.points[branch[1:]] - t.points[branch[0]]
        norms = np.linalg.norm(offsets, axis=1)
        units = offsets[norms > 0] / norms[norms > 0][:, None]
        if len(units):
            stats["dispersal"] = float(1.0 - np.linalg.norm(units.mean(axis=0)))
    return stats
