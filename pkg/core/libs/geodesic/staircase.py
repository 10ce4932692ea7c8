"""Greedy staircase path: an explicit upper bound on the passage time.

Coordinates are taken in a frame with origin x and first axis pointing at y.
From the current vertex a, the next vertex is the particle c != a with the
smallest forward step b_1 = (c - a)_1 among those in the wedge
0 <= sigma_i * b_i <= b_1 (i >= 2), where sigma_i = -1 if a_i >= 0 else 1,
so every step drifts back toward the axis. The walk stops once it passes
the first coordinate of y and closes with a direct link to y.
"""
import numpy as np

from core.libs.costmodel.cost_model import path_cost
from core.libs.costmodel.geometry import orthonormal_frame
from core.libs.errors import EmptyDomainError
from core.libs.geodesic.path_result import EXACT_ENDPOINTS, SOURCE_TERMINAL, TARGET_TERMINAL, PathResult


def _next_vertex(local, a):
    """Id of the particle minimising b_1 over the wedge at a, or -1."""
    b = local - a
    sigma = np.where(a[1:] >= 0.0, -1.0, 1.0)
    signed = b[:, 1:] * sigma
    inside = (b[:, 0] >= 0.0) & np.all((signed >= 0.0) & (signed <= b[:, :1]), axis=1)
    inside &= np.any(b != 0.0, axis=1)
    candidates = np.nonzero(inside)[0]
    if len(candidates) == 0:
        return -1
    steps = b[candidates, 0]
    # lexsort: smallest step first, then smallest id
    return int(candidates[np.lexsort((candidates, steps))[0]])


def staircase_upper_bound(ps, cm, x, y, window=None):
    """(cost, PathResult) of the staircase path from x to y.

    The path uses exact endpoints; `complete` is False when the walk ran out
    of particles before passing y, in which case the prefix is closed
    directly to y.
    """
    if len(ps) == 0:
        raise EmptyDomainError("staircase construction on an empty point set")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ell = float(np.linalg.norm(y - x))
    frame = orthonormal_frame(y - x) if ell > 0 else np.eye(len(x))
    local = (ps.points - x) @ frame
    a = np.zeros(len(x))
    ids = [SOURCE_TERMINAL]
    coords = [x]
    complete = True
    while a[0] < ell:
        nxt = _next_vertex(local, a)
        if nxt < 0:
            complete = False
            break
        ids.append(nxt)
        coords.append(ps.points[nxt])
        a = local[nxt]
    ids.append(TARGET_TERMINAL)
    coords.append(y)
    coords = np.asarray(coords)
    cost = path_cost(cm, coords)
    result = PathResult.from_points(ids, coords, cost, EXACT_ENDPOINTS, window if window is not None else ps.window,
                                    0.0, complete)
    return cost, result
