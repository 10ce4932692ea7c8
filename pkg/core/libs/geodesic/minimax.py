"""Minimax (bottleneck) distances through the Euclidean minimum spanning tree."""
from collections import deque

import numpy as np
from scipy.spatial import Delaunay, QhullError

from core.libs.errors import InvalidArgumentError

# below this size the all-pairs edge list is cheap and avoids degenerate triangulations
ALL_PAIRS_LIMIT = 64


class UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, v):
        root = v
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[v] != root:
            self.parent[v], v = root, self.parent[v]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1
        return True


def _candidate_pairs(points):
    """Edge superset of the MST: Delaunay edges, or all pairs for small, repeated or degenerate inputs."""
    n = len(points)
    if n > ALL_PAIRS_LIMIT and len(np.unique(points, axis=0)) == n:
        try:
            tri = Delaunay(points)
        except QhullError:
            tri = None
        # qhull leaves out coplanar input points, which would have no edges
        if tri is not None and len(tri.coplanar) == 0:
            simplices = tri.simplices
            m = simplices.shape[1]
            pairs = np.concatenate([simplices[:, [i, j]] for i in range(m) for j in range(i + 1, m)])
            pairs.sort(axis=1)
            return np.unique(pairs, axis=0)
    i, j = np.triu_indices(n, k=1)
    return np.column_stack([i, j])


def mst_edges(points):
    """Kruskal over candidate pairs; equal lengths are ordered by (i, j)."""
    points = np.asarray(points, dtype=float)
    n = len(points)
    if n < 2:
        return []
    pairs = _candidate_pairs(points)
    lengths = np.linalg.norm(points[pairs[:, 0]] - points[pairs[:, 1]], axis=1)
    order = np.lexsort((pairs[:, 1], pairs[:, 0], lengths))
    uf = UnionFind(n)
    edges = []
    for e in order.tolist():
        a, b = int(pairs[e, 0]), int(pairs[e, 1])
        if uf.union(a, b):
            edges.append((a, b, float(lengths[e])))
            if len(edges) == n - 1:
                break
    return edges


def mst_adjacency(n, edges):
    adjacency = [[] for _ in range(n)]
    for a, b, length in edges:
        adjacency[a].append((b, length))
        adjacency[b].append((a, length))
    return adjacency


def tree_path(adjacency, a, b):
    """Vertex sequence from a to b in a tree given as adjacency lists."""
    previous = {a: None}
    queue = deque([a])
    while queue:
        u = queue.popleft()
        if u == b:
            break
        for v, _ in adjacency[u]:
            if v not in previous:
                previous[v] = u
                queue.append(v)
    path = [b]
    while previous[path[-1]] is not None:
        path.append(previous[path[-1]])
    path.reverse()
    return path


def minimax_distance(ps, a_id, b_id):
    """(largest link on the MST path from a to b, that path)."""
    n = len(ps)
    if n < 2:
        raise InvalidArgumentError(f"minimax distance needs n >= 2 particles, got {n}")
    for v in (a_id, b_id):
        if not 0 <= v < n:
            raise InvalidArgumentError(f"particle id {v} out of range")
    if a_id == b_id:
        return 0.0, [a_id]
    points = ps.points
    path = tree_path(mst_adjacency(n, mst_edges(points)), a_id, b_id)
    value = max(float(np.linalg.norm(points[u] - points[v])) for u, v in zip(path, path[1:]))
    return value, path


def connected_below(ps, source, target, limit, skip_edge=None):
    """Whether source reaches target using links of length <= limit, optionally without one edge."""
    points = ps.points
    skip = frozenset(skip_edge) if skip_edge is not None else None
    seen = {source}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in ps.range_query(points[u], limit):
            if v in seen or (skip is not None and frozenset((u, v)) == skip):
                continue
            if v == target:
                return True
            seen.add(v)
            queue.append(v)
    return False
