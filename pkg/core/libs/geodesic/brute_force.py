"""Exhaustive enumeration oracles over self-avoiding sequences.

Candidates are compared by the same total order as the graph search:
(cost, hop count, id sequence), costs summed left to right from the source.
"""
import itertools
import math

import numpy as np

from core.libs.errors import GuardError, InvalidArgumentError
from core.libs.geodesic.path_result import (
    EXACT_ENDPOINTS,
    PARTICLE_ENDPOINTS,
    SOURCE_TERMINAL,
    TARGET_TERMINAL,
    PathResult,
)

MAX_BRUTE_FORCE_POINTS = 12


def _guard(n):
    if n > MAX_BRUTE_FORCE_POINTS:
        raise GuardError(f"exhaustive enumeration limited to n <= {MAX_BRUTE_FORCE_POINTS}, got {n}")


def _distance_matrix(points):
    diff = points[:, None, :] - points[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def _enumerate(weights, source, target, allowed):
    """Best (cost, hops, ids) over sequences source -> allowed* -> target."""
    best = [math.inf, 0, None]

    def better(cost, seq):
        if cost != best[0]:
            return cost < best[0]
        if len(seq) != best[1] + 1:
            return len(seq) < best[1] + 1
        return best[2] is None or seq < best[2]

    def extend(u, cost, seq, remaining):
        if cost > best[0]:
            return
        w = weights[u][target]
        if not math.isinf(w):
            total = cost + w
            candidate = seq + [target]
            if better(total, candidate):
                best[0], best[1], best[2] = total, len(candidate) - 1, candidate
        for v in remaining:
            step = weights[u][v]
            if math.isinf(step):
                continue
            extend(v, cost + step, seq + [v], [r for r in remaining if r != v])

    extend(source, 0.0, [source], list(allowed))
    return best


def brute_force_geodesic(ps, cm, a_id, b_id):
    n = len(ps)
    _guard(n)
    for v in (a_id, b_id):
        if not 0 <= v < n:
            raise InvalidArgumentError(f"particle id {v} out of range")
    points = ps.points
    if a_id == b_id:
        return PathResult.from_points([a_id], points[[a_id]], 0.0, PARTICLE_ENDPOINTS)
    weights = cm.phi(_distance_matrix(points)).tolist()
    allowed = [v for v in range(n) if v not in (a_id, b_id)]
    cost, _, seq = _enumerate(weights, a_id, b_id, allowed)
    return PathResult.from_points(seq, points[seq], cost, PARTICLE_ENDPOINTS)


def brute_force_passage_time(ps, cm, x, y, mode=PARTICLE_ENDPOINTS, intermediates=None):
    """Enumeration oracle for both endpoint conventions.

    `intermediates` restricts the particles allowed strictly inside the path
    (the representative subset for the truncated variant).
    """
    n = len(ps)
    _guard(n)
    if mode == PARTICLE_ENDPOINTS:
        a_id, b_id = ps.nearest_particle(x), ps.nearest_particle(y)
        result = brute_force_geodesic(ps, cm, a_id, b_id)
        return result.cost, result
    if mode != EXACT_ENDPOINTS:
        raise InvalidArgumentError(f"unknown endpoint mode {mode!r}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    # internal numbering matches the graph search: particles, then source n, target n + 1
    allowed = list(range(n)) if intermediates is None else sorted(int(i) for i in intermediates)
    points = np.vstack([ps.points, x[None, :], y[None, :]]) if n else np.vstack([x[None, :], y[None, :]])
    weights = cm.phi(_distance_matrix(points)).tolist()
    cost, _, seq = _enumerate(weights, n, n + 1, allowed)
    public = [SOURCE_TERMINAL if v == n else TARGET_TERMINAL if v == n + 1 else v for v in seq]
    result = PathResult.from_points(public, points[seq], cost, EXACT_ENDPOINTS)
    return cost, result


def exhaustive_minimax(ps, a_id, b_id):
    """min over self-avoiding paths of the largest link length."""
    n = len(ps)
    _guard(n)
    if a_id == b_id:
        return 0.0, [a_id]
    lengths = _distance_matrix(ps.points)
    best_value, best_path = math.inf, None
    others = [v for v in range(n) if v not in (a_id, b_id)]
    for size in range(len(others) + 1):
        for middle in itertools.permutations(others, size):
            seq = [a_id, *middle, b_id]
            value = max(lengths[u, v] for u, v in zip(seq, seq[1:]))
            if value < best_value:
                best_value, best_path = float(value), seq
    return best_value, best_path


def exhaustive_mst(ps):
    """Minimum total-length spanning tree by enumerating every (n-1)-edge subset."""
    n = len(ps)
    if n > 9:
        raise GuardError(f"spanning-tree enumeration limited to n <= 9, got {n}")
    if n < 2:
        return set(), 0.0
    lengths = _distance_matrix(ps.points)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    best_total, best_edges = math.inf, None
    for subset in itertools.combinations(pairs, n - 1):
        parent = list(range(n))

        def find(v):
            while parent[v] != v:
                parent[v] = parent[parent[v]]
                v = parent[v]
            return v

        acyclic = True
        for i, j in subset:
            ri, rj = find(i), find(j)
            if ri == rj:
                acyclic = False
                break
            parent[ri] = rj
        if not acyclic:
            continue
        total = sum(lengths[i, j] for i, j in subset)
        if total < best_total:
            best_total, best_edges = total, set(subset)
    return best_edges, float(best_total)
