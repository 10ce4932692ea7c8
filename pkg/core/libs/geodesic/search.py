"""Shortest paths over the candidate graph.

Labels are ordered by (cost, hop count, id sequence from the source); with
positive link weights every tie candidate for a vertex is relaxed before the
vertex is settled, so the settled label is the minimum in that total order.
"""
import heapq
import math

import numpy as np
from scipy.spatial import cKDTree

from core.libs.costmodel.lens import LENS_SLACK, lens_mask
from core.libs.errors import InvalidArgumentError, NoPathError
from core.libs.geodesic.path_result import (
    EXACT_ENDPOINTS,
    PARTICLE_ENDPOINTS,
    SOURCE_TERMINAL,
    TARGET_TERMINAL,
    PathResult,
)


def _chain(parent, v):
    out = []
    while v != -1:
        out.append(v)
        v = parent[v]
    out.reverse()
    return out


def _lex_smaller(parent, u, w):
    """Source-to-u id sequence sorts before source-to-w (equal lengths)."""
    return _chain(parent, u) < _chain(parent, w)


def dijkstra(neighbors, n_vertices, source, target=None):
    dist = [math.inf] * n_vertices
    hops = [0] * n_vertices
    parent = [-1] * n_vertices
    settled = [False] * n_vertices
    dist[source] = 0.0
    heap = [(0.0, 0, source)]
    while heap:
        du, hu, u = heapq.heappop(heap)
        if settled[u] or du > dist[u] or (du == dist[u] and hu > hops[u]):
            continue
        settled[u] = True
        if u == target:
            break
        ids, weights = neighbors(u)
        nh = hu + 1
        for v, w in zip(ids, weights):
            if settled[v]:
                continue
            nd = du + w
            dv = dist[v]
            if nd < dv or (nd == dv and (nh < hops[v] or (nh == hops[v] and _lex_smaller(parent, u, parent[v])))):
                dist[v] = nd
                hops[v] = nh
                parent[v] = u
                heapq.heappush(heap, (nd, nh, v))
    return dist, hops, parent


def _tree_for(g):
    tree = getattr(g, "_kdtree", None)
    if tree is None:
        tree = cKDTree(g.ps.points)
        g._kdtree = tree
    return tree


def terminal_links(g, x):
    """Particles a virtual terminal at x links to: kNN of x with empty lens interior.

    The lens witnesses are particles only; the other terminal never blocks.
    """
    points = g.ps.points
    n = len(points)
    x = np.asarray(x, dtype=float)
    k_eff = min(g.k, n)
    dists, idx = _tree_for(g).query(x, k=k_eff)
    idx = np.atleast_1d(idx).astype(np.int64)
    ys = points[idx]
    d_row = np.sqrt(np.sum((ys - x) ** 2, axis=-1))
    d_nbr = np.sqrt(np.sum((ys[:, None, :] - ys[None, :, :]) ** 2, axis=-1))
    phi_row = g.cm.phi(d_row)
    lhs = phi_row[None, :] + g.cm.phi(d_nbr)
    has_witness = (lhs < phi_row[:, None] * (1.0 - LENS_SLACK)).any(axis=1) & (d_row > 0)
    keep = ~has_witness
    return idx[keep].tolist(), d_row[keep]


def direct_link_open(ps, cm, x, y):
    """No particle strictly inside the lens of the segment x-y."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    length = float(np.linalg.norm(x - y))
    if length == 0.0 or len(ps) == 0:
        return True
    # W(x, y) lies within distance |x - y| of x
    ids = ps.range_query(x, length)
    if not ids:
        return True
    return not bool(np.any(lens_mask(cm, x, y, ps.points[ids], strict=True)))


class TerminalOverlay:
    """Candidate graph plus virtual source (id n) and target (id n + 1)."""

    def __init__(self, g, x, y):
        self.g = g
        n = g.n
        self.n = n
        self.source, self.target = n, n + 1
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.extra = {}
        links = {self.source: ([], []), self.target: ([], [])}
        for terminal, point in ((self.source, self.x), (self.target, self.y)):
            ids, lengths = terminal_links(g, point)
            weights = g.cm.phi(lengths).tolist()
            links[terminal] = (list(ids), list(weights))
            for p, w in zip(ids, weights):
                self.extra.setdefault(p, ([], []))
                self.extra[p][0].append(terminal)
                self.extra[p][1].append(w)
        if direct_link_open(g.ps, g.cm, self.x, self.y):
            w = float(g.cm.phi(float(np.linalg.norm(self.x - self.y))))
            links[self.source][0].append(self.target)
            links[self.source][1].append(w)
            links[self.target][0].append(self.source)
            links[self.target][1].append(w)
        self.links = links

    def neighbors(self, u):
        if u >= self.n:
            return self.links[u]
        ids, weights = self.g.neighbors(u)
        more = self.extra.get(u)
        if more is None:
            return ids, weights
        return ids + more[0], weights + more[1]

    def coordinates(self, v):
        if v == self.source:
            return self.x
        if v == self.target:
            return self.y
        return self.g.ps.points[v]

    def public_id(self, v):
        if v == self.source:
            return SOURCE_TERMINAL
        if v == self.target:
            return TARGET_TERMINAL
        return v


def _trust_band(g, ell):
    return g.policy.trust_band(ell, g.ps.density, g.ps.dimension)


def geodesic(g, a_id, b_id):
    n = g.n
    for v in (a_id, b_id):
        if not 0 <= v < n:
            raise InvalidArgumentError(f"particle id {v} out of range 0..{n - 1}")
    points = g.ps.points
    ell = float(np.linalg.norm(points[a_id] - points[b_id]))
    band = _trust_band(g, ell)
    if a_id == b_id:
        return PathResult.from_points([a_id], points[[a_id]], 0.0, PARTICLE_ENDPOINTS, g.ps.window, band)
    dist, _, parent = dijkstra(g.neighbors, n, a_id, b_id)
    if math.isinf(dist[b_id]):
        raise NoPathError(f"particles {a_id} and {b_id} are not connected")
    ids = _chain(parent, b_id)
    return PathResult.from_points(ids, points[ids], dist[b_id], PARTICLE_ENDPOINTS, g.ps.window, band)


def exact_endpoint_geodesic(g, x, y):
    overlay = TerminalOverlay(g, x, y)
    dist, _, parent = dijkstra(overlay.neighbors, g.n + 2, overlay.source, overlay.target)
    if math.isinf(dist[overlay.target]):
        raise NoPathError("virtual endpoints are not connected")
    chain = _chain(parent, overlay.target)
    coords = np.asarray([overlay.coordinates(v) for v in chain])
    ell = float(np.linalg.norm(overlay.x - overlay.y))
    return PathResult.from_points([overlay.public_id(v) for v in chain], coords, dist[overlay.target],
                                  EXACT_ENDPOINTS, g.ps.window, _trust_band(g, ell))


def shortest_path_tree(g, root):
    """Single-source labels (dist, hops, parent) over the whole candidate graph."""
    if not 0 <= root < g.n:
        raise InvalidArgumentError(f"root id {root} out of range")
    return dijkstra(g.neighbors, g.n, root)
