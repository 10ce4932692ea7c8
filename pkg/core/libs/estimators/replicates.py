"""Single-replicate Monte Carlo tasks.

Every task takes a (stage, parameter, replicate) tuple plus fixed keyword
arguments and returns a flat dict, so the harness can run them through a
process pool (via functools.partial) and write each dict as a record.
The stage index selects an independent substream per grid point.
"""
import numpy as np

from core.libs.costmodel.cost_model import CostModel
from core.libs.costmodel.geometry import points_to_segment_distance
from core.libs.geodesic import (
    DEFAULT_NEIGHBOR_BUDGET,
    DEFAULT_POLICY,
    EXACT_ENDPOINTS,
    PARTICLE_ENDPOINTS,
    no_doubling_back_audit,
    passage_time,
    truncated_passage_time,
    trusted_passage_time,
)
from core.libs.pointcloud import Window, sample_poisson, substream_rng
from core.libs.forest import ball_from_tree, geodesic_tree_from
from core.libs.estimators.boxpath import boxpath_stats

ONE_DIMENSIONAL_MARGIN = 20.0
# balls are compared against radii up to this multiple of s / mu
SHAPE_REACH = 1.5


def one_dimensional_passage_time(alpha, density, ell, rng):
    """Closed form on the line: sum of alpha-powers of the gaps between q(0) and q(ell)."""
    margin = ONE_DIMENSIONAL_MARGIN / density
    n = int(rng.poisson(density * (ell + 2.0 * margin)))
    if n == 0:
        return 0.0
    points = np.sort(-margin + rng.random(n) * (ell + 2.0 * margin))
    i0 = int(np.argmin(np.abs(points)))
    i1 = int(np.argmin(np.abs(points - ell)))
    lo, hi = min(i0, i1), max(i0, i1)
    gaps = np.diff(points[lo:hi + 1])
    total = 0.0
    for g in np.power(gaps, alpha).tolist():
        total += g
    return total


def _unit(d, direction):
    if direction is None:
        u = np.zeros(d)
        u[0] = 1.0
        return u
    u = np.asarray(direction, dtype=float)
    return u / np.linalg.norm(u)


def passage_replicate(task, d, cm, density, seed, policy=DEFAULT_POLICY, k=DEFAULT_NEIGHBOR_BUDGET,
                      direction=None, mode=PARTICLE_ENDPOINTS):
    """T(0, ell u) and the maximal deviation of its geodesic from the segment."""
    stage, ell, replicate = task
    record = {"stage": stage, "ell": ell, "replicate": replicate}
    if d == 1:
        rng = substream_rng(seed, replicate, stage)
        record.update({"cost": one_dimensional_passage_time(cm.alpha, density, ell, rng), "trusted": True,
                       "d_max": 0.0, "hops": None, "regrowths": 0, "n": None})
        return record
    x = np.zeros(d)
    y = ell * _unit(d, direction)
    cost, result, ps = trusted_passage_time(cm, x, y, density, seed, replicate, stage, mode, k, policy=policy)
    record.update({
        "cost": cost,
        "trusted": result.trusted,
        "d_max": float(points_to_segment_distance(result.points, x, y).max()),
        "hops": result.hops,
        "regrowths": result.extras.get("regrowths", 0),
        "n": len(ps),
    })
    return record


def shape_radius_epsilon(points, ball_mask, radius):
    """Smallest eps with every point within (1 - eps) r in the ball and the ball within (1 + eps) r."""
    norms = np.linalg.norm(points, axis=1)
    outer = float(norms[ball_mask].max() / radius - 1.0) if np.any(ball_mask) else 0.0
    outside = norms[~ball_mask]
    inner = float(1.0 - outside.min() / radius) if len(outside) else 0.0
    return max(outer, inner, 0.0)


def shape_replicate(task, d, cm, density, seed, s_grid, mu_hat, policy=DEFAULT_POLICY, k=DEFAULT_NEIGHBOR_BUDGET):
    """eps-hat(s) for each s of the grid from one tree rooted at q(0)."""
    stage, _, replicate = task
    reach = SHAPE_REACH * max(s_grid) / mu_hat
    margin = policy.margin(reach, density, d)
    window = Window.around(np.zeros((1, d)), reach + margin)
    ps = sample_poisson(window, density, seed, replicate, stage)
    root = ps.nearest_particle(np.zeros(d))
    tree = geodesic_tree_from(ps, cm, root, k, policy=policy)
    record = {"stage": stage, "replicate": replicate, "n": len(ps), "epsilons": [], "untrusted_fraction": []}
    for s in s_grid:
        radius = s / mu_hat
        near = np.linalg.norm(ps.points, axis=1) <= SHAPE_REACH * radius
        untrusted = float(np.mean(~tree.coverage[near])) if np.any(near) else 0.0
        ball = np.zeros(len(ps), dtype=bool)
        ball[ball_from_tree(tree, s)] = True
        covered_near = near & tree.coverage
        eps = shape_radius_epsilon(ps.points[covered_near], ball[covered_near], radius)
        record["epsilons"].append(eps)
        record["untrusted_fraction"].append(untrusted)
    return record


def truncation_replicate(task, d, alpha, density, seed, h_values, eps_sub, policy=DEFAULT_POLICY,
                         k=DEFAULT_NEIGHBOR_BUDGET):
    """T' against the truncated, representative-restricted T'' for each truncation level h."""
    stage, ell, replicate = task
    x = np.zeros(d)
    y = ell * _unit(d, None)
    window = policy.window_for(x, y, density)
    ps = sample_poisson(window, density, seed, replicate, stage)
    t_exact, _ = passage_time(ps, CostModel(alpha), x, y, EXACT_ENDPOINTS, k, policy=policy)
    truncated = []
    for h in h_values:
        t_trunc, _ = truncated_passage_time(ps, CostModel(alpha, h), eps_sub, x, y, k, policy=policy)
        truncated.append(t_trunc)
    return {"stage": stage, "ell": ell, "replicate": replicate, "t_exact": t_exact, "t_truncated": truncated,
            "h_values": list(h_values)}


def boxpath_replicate(task, d, cm, density, seed, eps=None, policy=DEFAULT_POLICY, k=DEFAULT_NEIGHBOR_BUDGET):
    """Box-path statistics and the no-doubling-back audit of one geodesic T(0, ell e1)."""
    stage, ell, replicate = task
    x = np.zeros(d)
    y = ell * _unit(d, None)
    cost, result, ps = trusted_passage_time(cm, x, y, density, seed, replicate, stage, PARTICLE_ENDPOINTS, k,
                                            policy=policy)
    record = {"stage": stage, "ell": ell, "replicate": replicate, "cost": cost, "trusted": result.trusted}
    record.update(boxpath_stats(ps, result, eps))
    record["doubling_back_violations"] = len(no_doubling_back_audit(result))
    return record
