"""Epsilon-box paths along polygonal paths.

Box nu is the cube of side eps centered at eps * nu. The path's box visits
are traced link by link with a grid traversal; the box path keeps the first
box and then, from each box, jumps to the box entered when the path leaves
it for the last time.
"""
import math

import numpy as np

from core.libs.errors import InvalidArgumentError
from core.libs.pointcloud import box_index

LONG_LINK_FACTOR = 33.0
DEFAULT_BOX_FRACTION = 0.5
TIE_TOLERANCE = 1e-12


def default_box_size(density, d):
    return DEFAULT_BOX_FRACTION * density ** (-1.0 / d)


def _segment_boxes(a, b, eps):
    """Boxes crossed by the segment a-b in order; simultaneous crossings step diagonally."""
    u0 = a / eps + 0.5
    u1 = b / eps + 0.5
    box = np.floor(u0).astype(np.int64)
    end = np.floor(u1).astype(np.int64)
    visits = [tuple(box.tolist())]
    du = u1 - u0
    step = np.sign(du).astype(np.int64)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_delta = np.where(du != 0, 1.0 / np.abs(du), np.inf)
        t_max = np.where(du > 0, (box + 1 - u0) / du, np.where(du < 0, (box - u0) / du, np.inf))
    guard = int(np.abs(end - box).sum()) + len(box) + 1
    while not np.array_equal(box, end) and guard > 0:
        t = float(t_max.min())
        if t > 1.0:
            break
        axes = t_max <= t + TIE_TOLERANCE
        box = box + np.where(axes, step, 0)
        t_max = np.where(axes, t_max + t_delta, t_max)
        visits.append(tuple(box.tolist()))
        guard -= 1
    if not np.array_equal(box, end):
        # rounding left the traversal one step short
        visits.append(tuple(end.tolist()))
    return visits


def box_visits(points, eps):
    """Every box entered by the polygonal path, consecutive repeats removed."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    visits = [tuple(box_index(points[0], eps)[0].tolist())]
    for a, b in zip(points[:-1], points[1:]):
        for box in _segment_boxes(a, b, eps):
            if box != visits[-1]:
                visits.append(box)
    return visits


def box_path(points, eps):
    """Loop-erased box sequence: from each box, the box entered at its last exit."""
    visits = box_visits(points, eps)
    last = {box: i for i, box in enumerate(visits)}
    path = [visits[0]]
    i = last[visits[0]]
    while i + 1 < len(visits):
        nxt = visits[i + 1]
        path.append(nxt)
        i = last[nxt]
    return path


def boxes_adjacent(a, b):
    return max(abs(x - y) for x, y in zip(a, b)) == 1


def boxpath_stats(ps, p, eps=None):
    """Length of the box path, its occupied fraction and long-link midpoint coverage."""
    if p.points.size == 0:
        raise InvalidArgumentError("box path needs a nonempty path")
    d = p.points.shape[1]
    eps = default_box_size(ps.density, d) if eps is None else float(eps)
    if not eps > 0:
        raise InvalidArgumentError(f"box size must be positive, got {eps}")
    beta = box_path(p.points, eps)
    occupancy = ps.box_occupancy(eps)
    occupied = sum(1 for box in beta if occupancy.occupied(box))
    members = set(beta)
    threshold = LONG_LINK_FACTOR * eps * math.sqrt(d + 3)
    lengths = np.linalg.norm(np.diff(p.points, axis=0), axis=1)
    long_links = np.nonzero(lengths > threshold)[0].tolist()
    uncovered = []
    for i in long_links:
        mid = 0.5 * (p.points[i] + p.points[i + 1])
        if tuple(box_index(mid, eps)[0].tolist()) not in members:
            uncovered.append(i)
    return {
        "eps": eps,
        "box_path_length": len(beta),
        "occupied_fraction": occupied / len(beta),
        "long_links": len(long_links),
        "long_link_threshold": threshold,
        "midpoints_covered": not uncovered,
        "uncovered_links": uncovered,
        "connected": all(boxes_adjacent(a, b) for a, b in zip(beta, beta[1:])),
    }
