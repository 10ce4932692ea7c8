"""The alpha = infinity limit: Euclidean minimum spanning tree and the forest edge criterion."""
import numpy as np

from core.libs.errors import InvalidArgumentError
from core.libs.forest.geodesic_tree import ROOTED_AT_PARTICLE, GeodesicTree
from core.libs.geodesic import connected_below, mst_edges


def euclidean_mst(ps):
    """Minimum total-length spanning tree, rooted at particle 0; cost-to-root is Euclidean length."""
    n = len(ps)
    if n < 1:
        raise InvalidArgumentError("minimum spanning tree needs at least one particle")
    parent = np.full(n, -1, dtype=np.int64)
    adjacency = [[] for _ in range(n)]
    for a, b, _ in mst_edges(ps.points):
        adjacency[a].append(b)
        adjacency[b].append(a)
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    stack = [0]
    while stack:
        u = stack.pop()
        for v in adjacency[u]:
            if not seen[v]:
                seen[v] = True
                parent[v] = u
                stack.append(v)
    return GeodesicTree.from_parent_array(ps.points, parent, 0, None, ROOTED_AT_PARTICLE)


def mst_edge_set(t):
    return {(min(a, b), max(a, b)) for a, b in t.edges()}


def msf_edge_criterion(ps, q_id, q2_id):
    """True iff every path from q to q2 avoiding the direct edge has a link longer than |q - q2|."""
    n = len(ps)
    if n < 2:
        raise InvalidArgumentError(f"edge criterion needs n >= 2 particles, got {n}")
    if q_id == q2_id or not (0 <= q_id < n and 0 <= q2_id < n):
        raise InvalidArgumentError(f"invalid particle pair ({q_id}, {q2_id})")
    length = float(np.linalg.norm(ps.points[q_id] - ps.points[q2_id]))
    return not connected_below(ps, q_id, q2_id, length, skip_edge=(q_id, q2_id))
