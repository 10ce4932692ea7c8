"""Coalescence points and height functions of directional trees."""
from dataclasses import dataclass, field
import math

import numpy as np

from core.libs.errors import InvalidArgumentError
from core.libs.geodesic import shortest_path_tree

HEIGHT_SLACK = 1e-10
MAX_WITNESSES = 20
HEIGHT_FORMAT = "height-field"
HEIGHT_VERSION = 1


@dataclass(frozen=True)
class CoalescenceRecord:
    pair: tuple
    meeting_id: int
    depth_from_first: int
    depth_from_second: int
    coalesced: bool

    def to_dict(self):
        return {
            "pair": list(self.pair),
            "meeting": self.meeting_id,
            "depths": [self.depth_from_first, self.depth_from_second],
            "coalesced": self.coalesced,
        }


def coalescence(t, q_id, q2_id):
    """Lowest common ancestor of two covered particles, found by walking up from the deeper one."""
    t.require_covered(q_id, q2_id)
    u, v = int(q_id), int(q2_id)
    steps_u = steps_v = 0
    while t.depth[u] > t.depth[v]:
        u, steps_u = int(t.parent[u]), steps_u + 1
    while t.depth[v] > t.depth[u]:
        v, steps_v = int(t.parent[v]), steps_v + 1
    while u != v:
        if t.parent[u] < 0 or t.parent[v] < 0:
            return CoalescenceRecord((int(q_id), int(q2_id)), -1, steps_u, steps_v, False)
        u, v = int(t.parent[u]), int(t.parent[v])
        steps_u, steps_v = steps_u + 1, steps_v + 1
    return CoalescenceRecord((int(q_id), int(q2_id)), u, steps_u, steps_v, True)


def height_function(t, q_id, q0_id):
    """H(q, q0) = T(q, root) - T(q0, root)."""
    t.require_covered(q_id, q0_id)
    return float(t.cost_to_root[q_id] - t.cost_to_root[q0_id])


def height_via_meeting(t, q_id, q0_id):
    """The same height computed through the coalescence vertex W."""
    record = coalescence(t, q_id, q0_id)
    w = record.meeting_id
    return float((t.cost_to_root[q_id] - t.cost_to_root[w]) - (t.cost_to_root[q0_id] - t.cost_to_root[w]))


@dataclass
class HeightField:
    direction: tuple
    base_id: int
    target_radius: float
    values: dict = field(default_factory=dict)

    def __getitem__(self, q_id):
        return self.values[q_id]

    def sublevel_set(self, level=0.0):
        return sorted(q for q, h in self.values.items() if h <= level)

    def to_record(self):
        return {
            "format": HEIGHT_FORMAT,
            "version": HEIGHT_VERSION,
            "direction": list(self.direction) if self.direction is not None else None,
            "base": self.base_id,
            "target_radius": self.target_radius,
            "table": [[q, self.values[q]] for q in sorted(self.values)],
        }


def height_field(t, q0_id):
    t.require_covered(q0_id)
    base = t.cost_to_root[q0_id]
    values = {int(q): float(t.cost_to_root[q] - base) for q in t.covered_ids.tolist()}
    return HeightField(t.direction, int(q0_id), t.target_radius, values)


def height_sublevel_set(field_, level=0.0):
    """Covered ids q with H(q, q0) <= level (the finite-radius proxy of the limiting ball)."""
    return field_.sublevel_set(level)


@dataclass
class HeightRecursionReport:
    core_size: int
    checked: dict = field(default_factory=lambda: {"inequality": 0, "parent_equality": 0, "excluded_set": 0})
    violations: dict = field(default_factory=lambda: {"inequality": 0, "parent_equality": 0, "excluded_set": 0})
    witnesses: list = field(default_factory=list)

    @property
    def passed(self):
        return sum(self.violations.values()) == 0

    def record(self, check, bad, witness):
        self.checked[check] += 1
        if bad:
            self.violations[check] += 1
            if len(self.witnesses) < MAX_WITNESSES:
                self.witnesses.append({"check": check, **witness})

    def to_dict(self):
        return {
            "core_size": self.core_size,
            "checked": dict(self.checked),
            "violations": dict(self.violations),
            "witnesses": list(self.witnesses),
            "passed": self.passed,
        }


def _slack(*values):
    return HEIGHT_SLACK * max(1.0, *(abs(v) for v in values))


def verify_height_recursion(t, field_, core_ids, excluded_samples=4, excluded_size=3, rng=None):
    """Check the Bellman-type recursion of the height function on a core.

    (i)   H(q) <= phi(|q - q'|) + H(q') for every covered q' != q;
    (ii)  equality at the tree parent of q;
    (iii) for sampled finite sets Q0 containing q, H(q) <= T(q, q') + H(q')
          for every covered q' outside Q0, with equality at the first particle
          of q's chain to the root that lies outside Q0.
    """
    cm = t.cm
    if cm is None:
        raise InvalidArgumentError("height recursion needs a tree with a cost model")
    core = [int(q) for q in core_ids if t.is_covered(int(q))]
    report = HeightRecursionReport(len(core))
    base = t.cost_to_root[field_.base_id]
    covered = t.covered_ids
    h_covered = t.cost_to_root[covered] - base
    rng = rng if rng is not None else np.random.default_rng(0)

    for q in core:
        hq = float(t.cost_to_root[q] - base)
        others = covered[covered != q]
        if len(others):
            rhs = cm.phi(np.linalg.norm(t.points[others] - t.points[q], axis=1)) + h_covered[covered != q]
            worst = int(np.argmin(rhs - hq))
            bad = hq > float(rhs[worst]) + _slack(hq, float(rhs[worst]))
            report.record("inequality", bad, {"q": q, "q_prime": int(others[worst]), "h": hq,
                                              "bound": float(rhs[worst])})
        p = int(t.parent[q])
        if p >= 0:
            expected = float(cm.phi(float(np.linalg.norm(t.points[q] - t.points[p])))) + float(t.cost_to_root[p] - base)
            bad = abs(hq - expected) > _slack(hq, expected)
            report.record("parent_equality", bad, {"q": q, "parent": p, "h": hq, "expected": expected})

    if t.graph is None or not core:
        return report
    picks = rng.choice(len(core), size=min(excluded_samples, len(core)), replace=False)
    for q in (core[i] for i in sorted(picks.tolist())):
        pool = [int(v) for v in covered.tolist() if v != q]
        extra = rng.choice(len(pool), size=min(excluded_size, len(pool)), replace=False) if pool else []
        excluded = {q, *(pool[i] for i in np.atleast_1d(extra).tolist())}
        dist, _, _ = shortest_path_tree(t.graph, q)
        dist = np.asarray(dist)
        hq = float(t.cost_to_root[q] - base)
        outside = np.asarray([v for v in covered.tolist() if v not in excluded], dtype=np.int64)
        if len(outside):
            rhs = dist[outside] + (t.cost_to_root[outside] - base)
            worst = int(np.argmin(rhs - hq))
            bad = hq > float(rhs[worst]) + _slack(hq, float(rhs[worst]))
            report.record("excluded_set", bad, {"q": q, "excluded": sorted(excluded), "q_prime": int(outside[worst]),
                                                "h": hq, "bound": float(rhs[worst])})
        exit_vertex = next((w for w in t.chain(q) if w not in excluded), None)
        if exit_vertex is not None and math.isfinite(dist[exit_vertex]):
            expected = float(dist[exit_vertex] + t.cost_to_root[exit_vertex] - base)
            bad = abs(hq - expected) > _slack(hq, expected)
            report.record("excluded_set", bad, {"q": q, "excluded": sorted(excluded), "exit": exit_vertex,
                                                "h": hq, "expected": expected})
    return report


def parent_stability(t_small, t_large, core_ids=None):
    """Fraction of core particles covered in both trees whose parent did not change."""
    if t_small.n != t_large.n:
        raise InvalidArgumentError("trees must be built on the same point set")
    both = t_small.coverage & t_large.coverage
    if core_ids is not None:
        mask = np.zeros(t_small.n, dtype=bool)
        mask[np.asarray(list(core_ids), dtype=np.int64)] = True
        both &= mask
    ids = np.nonzero(both)[0]
    unchanged = int(np.sum(t_small.parent[ids] == t_large.parent[ids]))
    return {
        "compared": int(len(ids)),
        "unchanged": unchanged,
        "fraction": unchanged / len(ids) if len(ids) else 1.0,
    }


def ball_from_tree(t, s):
    """Covered particles q with T(root, q) <= s."""
    if s < 0:
        raise InvalidArgumentError(f"ball radius must be >= 0, got {s}")
    mask = t.coverage & (t.cost_to_root <= s)
    return np.nonzero(mask)[0].tolist()
