"""Parent-array trees of geodesics.

A tree stores, for every particle reached from its root, the parent on the
geodesic toward the root, the cost to the root and the depth in hops.
Coverage marks the particles whose chain to the root stays at least a trust
band away from the window boundary; only covered particles are used by the
tree-level queries.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from core.libs.costmodel.cost_model import CostModel
from core.libs.errors import CoverageError, InvalidArgumentError
from core.libs.geodesic import (
    AUDIT_NONE,
    DEFAULT_NEIGHBOR_BUDGET,
    DEFAULT_POLICY,
    PARTICLE_ENDPOINTS,
    PathResult,
    build_candidate_graph,
    shortest_path_tree,
)

ROOTED_AT_PARTICLE = "rooted-at-particle"
ROOTED_AT_DIRECTION = "rooted-at-direction"
TREE_KINDS = (ROOTED_AT_PARTICLE, ROOTED_AT_DIRECTION)
TREE_FORMAT = "tree"
TREE_VERSION = 1
# core radius is at most this fraction of the target radius
CORE_FRACTION = 3.0
RADIUS_TOLERANCE = 1e-12


@dataclass
class GeodesicTree:
    kind: str
    root_id: int
    points: np.ndarray
    parent: np.ndarray
    cost_to_root: np.ndarray
    depth: np.ndarray
    coverage: np.ndarray
    cm: object = None
    direction: tuple = None
    target_radius: float = None
    core_radius: float = None
    center: tuple = None
    graph: object = field(default=None, repr=False)

    @property
    def n(self):
        return len(self.parent)

    @property
    def reached(self):
        return self.depth >= 0

    @property
    def covered_ids(self):
        return np.nonzero(self.coverage)[0]

    def is_covered(self, v):
        return 0 <= v < self.n and bool(self.coverage[v])

    def require_covered(self, *ids):
        for v in ids:
            if not self.is_covered(v):
                raise CoverageError(f"particle {v} is not covered by this tree")

    def chain(self, v):
        """Ids from v up to the root."""
        out = [int(v)]
        while out[-1] != self.root_id:
            p = int(self.parent[out[-1]])
            if p < 0:
                raise CoverageError(f"particle {v} is not connected to the root")
            out.append(p)
        return out

    def children(self):
        kids = [[] for _ in range(self.n)]
        for v in np.nonzero(self.parent >= 0)[0].tolist():
            kids[int(self.parent[v])].append(v)
        return kids

    def edges(self):
        return [(int(v), int(p)) for v, p in enumerate(self.parent.tolist()) if p >= 0]

    @classmethod
    def from_parent_array(cls, points, parent, root_id, cm=None, kind=ROOTED_AT_PARTICLE, coverage=None, **extra):
        """Rebuild depth and cost-to-root from a parent array; phi costs when cm is given, lengths otherwise."""
        points = np.asarray(points, dtype=float)
        parent = np.asarray(parent, dtype=np.int64)
        n = len(parent)
        if not 0 <= root_id < n or parent[root_id] != -1:
            raise InvalidArgumentError(f"root {root_id} must be a vertex with parent -1")
        depth = np.full(n, -1, dtype=np.int64)
        cost = np.full(n, math.inf)
        depth[root_id], cost[root_id] = 0, 0.0
        kids = [[] for _ in range(n)]
        for v in range(n):
            if parent[v] >= 0:
                kids[int(parent[v])].append(v)
        stack = [root_id]
        while stack:
            u = stack.pop()
            for v in kids[u]:
                if depth[v] >= 0:
                    raise InvalidArgumentError("parent array contains a cycle")
                length = float(np.linalg.norm(points[v] - points[u]))
                step = float(cm.phi(length)) if cm is not None else length
                depth[v] = depth[u] + 1
                cost[v] = cost[u] + step
                stack.append(v)
        if coverage is None:
            coverage = depth >= 0
        return cls(kind, int(root_id), points, parent, cost, depth, np.asarray(coverage, dtype=bool), cm, **extra)

    def to_record(self):
        return {
            "format": TREE_FORMAT,
            "version": TREE_VERSION,
            "kind": self.kind,
            "root": self.root_id,
            "direction": list(self.direction) if self.direction is not None else None,
            "target_radius": self.target_radius,
            "core_radius": self.core_radius,
            "center": list(self.center) if self.center is not None else None,
            "cost_model": self.cm.to_dict() if self.cm is not None else None,
            "coordinates": self.points.tolist(),
            "parent": self.parent.tolist(),
            "cost_to_root": [c if math.isfinite(c) else None for c in self.cost_to_root.tolist()],
            "coverage": self.coverage.tolist(),
        }

    @classmethod
    def from_record(cls, record):
        if record.get("format") != TREE_FORMAT or record.get("version") != TREE_VERSION:
            raise InvalidArgumentError(f"not a v{TREE_VERSION} tree record")
        cm = CostModel.from_dict(record["cost_model"]) if record["cost_model"] is not None else None
        tree = cls.from_parent_array(
            record["coordinates"], record["parent"], record["root"], cm, record["kind"], record["coverage"],
            direction=tuple(record["direction"]) if record["direction"] is not None else None,
            target_radius=record["target_radius"],
            core_radius=record["core_radius"],
            center=tuple(record["center"]) if record["center"] is not None else None,
        )
        # stored costs come from the search and may differ from a re-summation in the last bit
        tree.cost_to_root = np.asarray([math.inf if c is None else c for c in record["cost_to_root"]], dtype=float)
        return tree


def _chain_margins(ps, parent, depth):
    """min boundary distance over each reached vertex's chain to the root."""
    margins = np.full(len(parent), -math.inf)
    boundary = ps.window.boundary_distance(ps.points)
    reached = np.nonzero(depth >= 0)[0]
    for v in reached[np.argsort(depth[reached], kind="stable")].tolist():
        p = parent[v]
        margins[v] = boundary[v] if p < 0 else min(boundary[v], margins[p])
    return margins


def _coverage(ps, root_id, parent, depth, policy):
    margins = _chain_margins(ps, parent, depth)
    spans = np.linalg.norm(ps.points - ps.points[root_id], axis=1)
    bands = np.asarray([policy.trust_band(s, ps.density, ps.dimension) for s in spans.tolist()])
    return (depth >= 0) & (margins >= bands)


def _search_tree(g, root_id):
    dist, hops, parent = shortest_path_tree(g, root_id)
    parent = np.asarray(parent, dtype=np.int64)
    cost = np.asarray(dist, dtype=float)
    depth = np.where(np.isfinite(cost), np.asarray(hops, dtype=np.int64), -1)
    return parent, cost, depth


def geodesic_tree_from(ps, cm, q_id, k=DEFAULT_NEIGHBOR_BUDGET, audit=AUDIT_NONE, policy=DEFAULT_POLICY, graph=None):
    """Union of the geodesics from particle q_id: the single-source shortest-path tree."""
    g = graph if graph is not None else build_candidate_graph(ps, cm, k, audit, policy)
    parent, cost, depth = _search_tree(g, q_id)
    coverage = _coverage(ps, q_id, parent, depth, g.policy)
    return GeodesicTree(ROOTED_AT_PARTICLE, int(q_id), ps.points, parent, cost, depth, coverage, cm, graph=g)


def directional_tree(ps, cm, direction, target_radius, core_radius=None, center=None, k=DEFAULT_NEIGHBOR_BUDGET,
                     audit=AUDIT_NONE, policy=DEFAULT_POLICY, graph=None):
    """Tree of geodesics to the particle nearest center + R * direction.

    Coverage is restricted to the core ball of radius `core_radius`
    (default R / 3) around `center`.
    """
    u = np.asarray(direction, dtype=float)
    norm = float(np.linalg.norm(u))
    if norm == 0.0:
        raise InvalidArgumentError("direction must be nonzero")
    u = u / norm
    center = np.zeros(ps.dimension) if center is None else np.asarray(center, dtype=float)
    if core_radius is None:
        core_radius = target_radius / CORE_FRACTION
    else:
        core_radius = float(core_radius)
        if target_radius < CORE_FRACTION * core_radius * (1.0 - RADIUS_TOLERANCE):
            raise InvalidArgumentError(
                f"target radius {target_radius} must be at least {CORE_FRACTION:g} x core radius {core_radius}")
    if not core_radius > 0:
        raise InvalidArgumentError(f"core radius must be positive, got {core_radius}")
    root_id = ps.nearest_particle(center + target_radius * u)
    g = graph if graph is not None else build_candidate_graph(ps, cm, k, audit, policy)
    parent, cost, depth = _search_tree(g, root_id)
    coverage = _coverage(ps, root_id, parent, depth, g.policy)
    coverage &= np.linalg.norm(ps.points - center, axis=1) <= core_radius
    return GeodesicTree(ROOTED_AT_DIRECTION, int(root_id), ps.points, parent, cost, depth, coverage, cm,
                        direction=tuple(u.tolist()), target_radius=float(target_radius),
                        core_radius=core_radius, center=tuple(center.tolist()), graph=g)


def directional_geodesic(t, q_id, require_coverage=True):
    """The parent chain from q_id to the root, as a path starting at q_id.

    With require_coverage=False any reached particle is accepted and the
    path's `trusted` flag says whether its chain keeps the trust band
    clear of the window boundary.
    """
    if require_coverage:
        t.require_covered(q_id)
    ids = t.chain(q_id)
    window, band = None, 0.0
    if t.graph is not None:
        ps = t.graph.ps
        window = ps.window
        span = float(np.linalg.norm(t.points[q_id] - t.points[t.root_id]))
        band = t.graph.policy.trust_band(span, ps.density, ps.dimension)
    return PathResult.from_points(ids, t.points[ids], t.cost_to_root[q_id], PARTICLE_ENDPOINTS, window, band)
