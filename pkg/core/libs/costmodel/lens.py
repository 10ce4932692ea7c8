"""The lens W_phi(a, b) = {c : phi(|a-c|) + phi(|c-b|) <= phi(|a-b|)}.

A particle strictly inside the lens of a link makes the link strictly
improvable (route through the particle instead), so only links with an
empty lens interior can appear on geodesics.
"""
from dataclasses import dataclass
import math

import numpy as np

from core.libs.errors import InvalidArgumentError

LENS_SLACK = 1e-12
SQRT3_HALF = math.sqrt(3.0) / 2.0


@dataclass(frozen=True)
class LensRegion:
    """W_phi(a, b): the points c with phi(|a-c|) + phi(|c-b|) <= phi(|a-b|)."""
    a: tuple
    b: tuple
    cm: object

    def __post_init__(self):
        if np.array_equal(np.asarray(self.a, dtype=float), np.asarray(self.b, dtype=float)):
            raise InvalidArgumentError("lens endpoints must differ")

    def contains(self, c, strict=False):
        return lens_contains(self.cm, self.a, self.b, c, strict)

    def mask(self, cs, strict=False):
        return lens_mask(self.cm, np.asarray(self.a, dtype=float), np.asarray(self.b, dtype=float), cs, strict)

    def bounding_ball(self):
        return lens_bounding_ball(self.cm, self.a, self.b)


def lens_excess(cm, a, b, cs):
    """phi(|a-c|) + phi(|c-b|) - phi(|a-b|) for each row c, with the scale phi(|a-b|)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    cs = np.atleast_2d(np.asarray(cs, dtype=float))
    rhs = float(cm.phi(float(np.linalg.norm(a - b))))
    lhs = cm.phi(np.linalg.norm(cs - a, axis=1)) + cm.phi(np.linalg.norm(cs - b, axis=1))
    return lhs - rhs, rhs


def lens_mask(cm, a, b, cs, strict=False):
    excess, rhs = lens_excess(cm, a, b, cs)
    if strict:
        return excess < -LENS_SLACK * rhs
    return excess <= LENS_SLACK * rhs


def lens_contains(cm, a, b, c, strict=False):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.array_equal(a, b):
        raise InvalidArgumentError("lens endpoints must differ")
    return bool(lens_mask(cm, a, b, np.asarray(c, dtype=float)[None, :], strict)[0])


def lens_bounding_ball(cm, a, b):
    """Ball around the midpoint of radius sqrt(3)/2 |a-b|, which contains W_phi(a, b)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.array_equal(a, b):
        raise InvalidArgumentError("lens endpoints must differ")
    return (a + b) / 2.0, SQRT3_HALF * float(np.linalg.norm(a - b))


def lens_half_width(cm, ell, iterations=200):
    """Largest u with the point (ell/2, u, 0, ...) in W_phi(0, ell e1)."""
    if ell <= 0:
        raise InvalidArgumentError(f"lens length must be positive, got {ell}")
    if cm.is_pure_power:
        return ell * math.sqrt(max(0.0, 2.0 ** (-2.0 / cm.alpha) - 0.25))
    target = float(cm.phi(ell))
    lo, hi = 0.0, ell
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if 2.0 * float(cm.phi(math.hypot(ell / 2.0, mid))) <= target:
            lo = mid
        else:
            hi = mid
    return lo


def middle_tube_constant(alpha):
    """C = min((a-1)/2a, 2^(-1/a) - 1/2, 2^(-1/a)(1+a)^(1/a) - 1)."""
    return min(
        (alpha - 1.0) / (2.0 * alpha),
        2.0 ** (-1.0 / alpha) - 0.5,
        2.0 ** (-1.0 / alpha) * (1.0 + alpha) ** (1.0 / alpha) - 1.0,
    )


def middle_tube_threshold(alpha, E):
    """h0 = max(8E, 4E/C): beyond it the E-tube around the middle half lies in the lens."""
    return max(8.0 * E, 4.0 * E / middle_tube_constant(alpha))


def middle_tube_sample(a, b, E, size, rng):
    """Uniform draws from H_E(a, b): within E of the segment from 3a/4+b/4 to a/4+3b/4."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = len(a)
    t = rng.uniform(0.25, 0.75, size)
    base = (1.0 - t)[:, None] * a + t[:, None] * b
    direction = rng.standard_normal((size, d))
    direction /= np.linalg.norm(direction, axis=1)[:, None]
    radius = E * rng.random(size) ** (1.0 / d)
    return base + radius[:, None] * direction
