"""Passage times between arbitrary locations for every cost variant.

All costs are additive (sum of phi over links); the metric distance is the
1/alpha root and is available from PathResult.metric_distance.
"""
import math
import sys

import numpy as np

from core.libs.costmodel.lens import lens_mask
from core.libs.errors import EmptyDomainError, InvalidArgumentError
from core.libs.geodesic.brute_force import brute_force_passage_time
from core.libs.geodesic.candidate_graph import AUDIT_NONE, DEFAULT_NEIGHBOR_BUDGET, build_candidate_graph
from core.libs.geodesic.path_result import ENDPOINT_MODES, EXACT_ENDPOINTS, PARTICLE_ENDPOINTS, PathResult
from core.libs.geodesic.search import exact_endpoint_geodesic, geodesic
from core.libs.geodesic.window_policy import DEFAULT_POLICY
from core.libs.pointcloud import PointSet, box_index, sample_poisson

# --- Constants ---
GAMMA_DIRECTIONS = 64
GAMMA_BISECTIONS = 48
# stage words reserved per regrowth sequence
REGROWTH_STAGES = 4


def passage_time(ps, cm, x, y, mode=PARTICLE_ENDPOINTS, k=DEFAULT_NEIGHBOR_BUDGET, audit=AUDIT_NONE,
                 policy=DEFAULT_POLICY, graph=None):
    if mode not in ENDPOINT_MODES:
        raise InvalidArgumentError(f"unknown endpoint mode {mode!r}; expected one of {ENDPOINT_MODES}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if mode == PARTICLE_ENDPOINTS:
        if len(ps) == 0:
            raise EmptyDomainError("particle-endpoint passage time on an empty point set")
        a_id, b_id = ps.nearest_particle(x), ps.nearest_particle(y)
        if a_id == b_id or len(ps) < 2:
            band = policy.trust_band(0.0, ps.density, ps.dimension)
            result = PathResult.from_points([a_id], ps.points[[a_id]], 0.0, PARTICLE_ENDPOINTS, ps.window, band)
            return 0.0, result
        g = graph if graph is not None else build_candidate_graph(ps, cm, k, audit, policy)
        result = geodesic(g, a_id, b_id)
        return result.cost, result
    if len(ps) < 2:
        # no candidate graph on fewer than two particles; enumeration is exact here
        cost, result = brute_force_passage_time(ps, cm, x, y, EXACT_ENDPOINTS)
        band = policy.trust_band(float(np.linalg.norm(x - y)), ps.density, ps.dimension)
        result = PathResult.from_points(result.vertex_ids, result.points, cost, EXACT_ENDPOINTS, ps.window, band)
        return cost, result
    g = graph if graph is not None else build_candidate_graph(ps, cm, k, audit, policy)
    result = exact_endpoint_geodesic(g, x, y)
    return result.cost, result


def representatives(ps, eps_sub):
    """One particle per eps_sub-box: the leftmost, ties by the lower remaining coordinates, then id."""
    if not eps_sub > 0:
        raise InvalidArgumentError(f"sub-box size must be positive, got {eps_sub}")
    n = len(ps)
    if n == 0:
        return []
    points = ps.points
    boxes = box_index(points, eps_sub)
    d = points.shape[1]
    # np.lexsort sorts by the last key first
    keys = [np.arange(n)] + [points[:, i] for i in range(d - 1, -1, -1)] + [boxes[:, i] for i in range(d - 1, -1, -1)]
    order = np.lexsort(keys)
    sorted_boxes = boxes[order]
    first = np.ones(n, dtype=bool)
    first[1:] = np.any(sorted_boxes[1:] != sorted_boxes[:-1], axis=1)
    return sorted(order[first].tolist())


def truncated_passage_time(ps, cm, eps_sub, x, y, k=DEFAULT_NEIGHBOR_BUDGET, audit=AUDIT_NONE,
                           policy=DEFAULT_POLICY):
    """Exact-endpoint passage time with truncated phi over the representative subset."""
    if cm.is_pure_power:
        raise InvalidArgumentError("truncated passage time needs a cost model with finite h")
    reps = representatives(ps, eps_sub)
    sub = PointSet.from_points(ps.points[reps] if reps else np.zeros((0, ps.dimension)),
                               ps.window, ps.density, ps.seed)
    cost, result = passage_time(sub, cm, x, y, EXACT_ENDPOINTS, k, audit, policy)
    result.vertex_ids = [reps[v] if v >= 0 else v for v in result.vertex_ids]
    result.extras["representatives"] = len(reps)
    return cost, result


def trusted_passage_time(cm, x, y, density, seed, replicate=0, stage=0, mode=PARTICLE_ENDPOINTS,
                         k=DEFAULT_NEIGHBOR_BUDGET, audit=AUDIT_NONE, policy=DEFAULT_POLICY, logger=None):
    """Sample a window around x and y, compute, and regrow the window until the path is trusted.

    Each attempt draws a fresh configuration in the grown window from its own
    substream, so a replicate's outcome depends only on (seed, replicate, stage).
    Returns (cost, PathResult, PointSet) for the last attempt; the path's
    extras record the regrowth count and the window used.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = len(x)
    ell = float(np.linalg.norm(x - y))
    for attempt in range(policy.max_regrowths + 1):
        window = policy.window_for(x, y, density, attempt)
        margin = policy.margin(ell, density, d, attempt)
        ps = sample_poisson(window, density, seed, replicate, stage * REGROWTH_STAGES + attempt)
        cost, result = passage_time(ps, cm, x, y, mode, k, audit, policy)
        result.extras["regrowths"] = attempt
        result.extras["window_margin"] = margin
        if result.trusted:
            return cost, result, ps
        print(f"[WINDOW] replicate {replicate}: path margin {result.margin:.3f} below trust band, "
              f"attempt {attempt + 1}/{policy.max_regrowths + 1}", file=sys.stderr)
        if logger is not None:
            logger.log_event("window_regrowth", {"replicate": replicate, "attempt": attempt, "ell": ell,
                                                 "margin": margin, "path_margin": result.margin})
    return cost, result, ps


def _directions(d, count, rng):
    if d == 2:
        angles = 2.0 * math.pi * np.arange(count) / count
        return np.column_stack([np.cos(angles), np.sin(angles)])
    raw = rng.standard_normal((count, d))
    return raw / np.linalg.norm(raw, axis=1)[:, None]


def _lens_empty(ps, cm, a, c):
    length = float(np.linalg.norm(c - a))
    if length == 0.0:
        return True
    ids = ps.range_query(a, length)
    if not ids:
        return True
    pts = ps.points[ids]
    # a particle sitting on an endpoint is not a witness
    pts = pts[np.any(pts != a, axis=1) & np.any(pts != c, axis=1)]
    return len(pts) == 0 or not bool(np.any(lens_mask(cm, a, c, pts, strict=True)))


def gamma_radius(ps, cm, a, directions=GAMMA_DIRECTIONS, rng=None):
    """Lower bound on sup{|c - a| : W(a, c) has no particle inside}, within the window.

    Scans `directions` unit vectors and bisects the radius along each, capped
    so that c stays in the window.
    """
    a = np.asarray(a, dtype=float)
    d = len(a)
    rng = rng if rng is not None else np.random.default_rng(0)
    lower = np.asarray(ps.window.lower)
    upper = np.asarray(ps.window.upper)
    best = 0.0
    for u in _directions(d, directions, rng):
        with np.errstate(divide="ignore", invalid="ignore"):
            steps = np.where(u > 0, (upper - a) / u, np.where(u < 0, (lower - a) / u, np.inf))
        r_max = float(max(0.0, np.min(steps)))
        if r_max <= best:
            continue
        if _lens_empty(ps, cm, a, a + r_max * u):
            best = r_max
            continue
        lo, hi = best, r_max
        if not _lens_empty(ps, cm, a, a + lo * u):
            lo = 0.0
        for _ in range(GAMMA_BISECTIONS):
            mid = 0.5 * (lo + hi)
            if _lens_empty(ps, cm, a, a + mid * u):
                lo = mid
            else:
                hi = mid
        best = max(best, lo)
    return best


def passage_time_gap_report(ps, cm, x, y, k=DEFAULT_NEIGHBOR_BUDGET, policy=DEFAULT_POLICY, graph=None):
    """Compare the particle-endpoint and exact-endpoint passage times with 2^alpha (G(x) + G(y))^alpha.

    The window-restricted radii are lower bounds, so `within_bound` is a
    diagnostic only.
    """
    g = graph if graph is not None else build_candidate_graph(ps, cm, k, AUDIT_NONE, policy)
    t_particle, _ = passage_time(ps, cm, x, y, PARTICLE_ENDPOINTS, graph=g)
    t_exact, _ = passage_time(ps, cm, x, y, EXACT_ENDPOINTS, graph=g)
    gx, gy = gamma_radius(ps, cm, x), gamma_radius(ps, cm, y)
    bound = 2.0 ** cm.alpha * (gx + gy) ** cm.alpha
    gap = abs(t_particle - t_exact)
    return {
        "t_particle": t_particle,
        "t_exact": t_exact,
        "gap": gap,
        "gamma_x": gx,
        "gamma_y": gy,
        "bound": bound,
        "within_bound": bool(gap <= bound),
    }
