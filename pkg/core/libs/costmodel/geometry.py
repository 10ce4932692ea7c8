import math

import numpy as np

from core.libs.errors import InvalidArgumentError

INTERSECTION_TOLERANCE = 1e-9


def angle(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    nx, ny = np.linalg.norm(x), np.linalg.norm(y)
    if nx == 0 or ny == 0:
        raise InvalidArgumentError("angle is undefined for a zero vector")
    return float(math.acos(max(-1.0, min(1.0, float(np.dot(x, y)) / (nx * ny)))))


def angles_to(x, ys):
    """Vectorized angle between x and each row of ys; zero rows get angle 0."""
    x = np.asarray(x, dtype=float)
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    norms = np.linalg.norm(ys, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    cosines = np.clip(ys @ x / (safe * np.linalg.norm(x)), -1.0, 1.0)
    return np.where(norms > 0, np.arccos(cosines), 0.0)


def cone_contains(x, epsilon, y):
    """y in C(x, epsilon); the apex y = 0 counts as inside."""
    y = np.asarray(y, dtype=float)
    if not np.any(y):
        return True
    return angle(x, y) <= epsilon


def segment_distance(p, a, b):
    p, a, b = (np.asarray(v, dtype=float) for v in (p, a, b))
    ab = b - a
    denom = float(np.dot(ab, ab))
    if denom == 0:
        return float(np.linalg.norm(p - a))
    t = max(0.0, min(1.0, float(np.dot(p - a, ab)) / denom))
    return float(np.linalg.norm(p - ((1.0 - t) * a + t * b)))


def points_to_segment_distance(points, a, b):
    points = np.atleast_2d(np.asarray(points, dtype=float))
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ab = b - a
    denom = float(np.dot(ab, ab))
    if denom == 0:
        return np.linalg.norm(points - a, axis=1)
    t = np.clip((points - a) @ ab / denom, 0.0, 1.0)
    nearest = (1.0 - t)[:, None] * a + t[:, None] * b
    return np.linalg.norm(points - nearest, axis=1)


def _orientation(p, q, r):
    return (q[1] - p[1]) * (r[0] - q[0]) - (q[0] - p[0]) * (r[1] - q[1])


def segments_intersect(p1, q1, p2, q2, tol=INTERSECTION_TOLERANCE):
    """Closed planar segments p1q1 and p2q2 meet (within `tol`)."""
    p1, q1, p2, q2 = (np.asarray(v, dtype=float) for v in (p1, q1, p2, q2))
    o1 = _orientation(p1, q1, p2)
    o2 = _orientation(p1, q1, q2)
    o3 = _orientation(p2, q2, p1)
    o4 = _orientation(p2, q2, q1)
    if ((o1 > 0 and o2 < 0) or (o1 < 0 and o2 > 0)) and ((o3 > 0 and o4 < 0) or (o3 < 0 and o4 > 0)):
        return True
    gap = min(
        segment_distance(p2, p1, q1),
        segment_distance(q2, p1, q1),
        segment_distance(p1, p2, q2),
        segment_distance(q1, p2, q2),
    )
    return gap <= tol


def orthonormal_frame(direction):
    """Orthogonal matrix whose first column is the unit vector along `direction`."""
    u = np.asarray(direction, dtype=float)
    norm = np.linalg.norm(u)
    if norm == 0:
        raise InvalidArgumentError("frame direction must be nonzero")
    u = u / norm
    d = len(u)
    e1 = np.zeros(d)
    e1[0] = 1.0
    v = e1 - u
    vv = float(np.dot(v, v))
    if vv < 1e-30:
        return np.eye(d)
    # Householder reflection swapping e1 and u
    return np.eye(d) - 2.0 * np.outer(v, v) / vv
