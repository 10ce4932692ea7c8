from dataclasses import dataclass
import math

import numpy as np

from core.libs.errors import InvalidArgumentError


@dataclass(frozen=True)
class Window:
    """Axis-aligned box [lower, upper] in R^d, d >= 2."""
    lower: tuple
    upper: tuple

    def __post_init__(self):
        lower = tuple(float(v) for v in self.lower)
        upper = tuple(float(v) for v in self.upper)
        if len(lower) != len(upper):
            raise InvalidArgumentError(f"corner dimensions differ: {len(lower)} vs {len(upper)}")
        if len(lower) < 2:
            raise InvalidArgumentError(f"window dimension must be >= 2, got {len(lower)}")
        for lo, hi in zip(lower, upper):
            if not (math.isfinite(lo) and math.isfinite(hi)) or not hi > lo:
                raise InvalidArgumentError(f"degenerate window side [{lo}, {hi}]")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def cube(cls, side, d=2, origin=0.0):
        return cls((origin,) * d, (origin + side,) * d)

    @classmethod
    def around(cls, points, margin):
        """Bounding box of `points` inflated by `margin` on every side."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return cls(tuple(pts.min(axis=0) - margin), tuple(pts.max(axis=0) + margin))

    @property
    def dimension(self):
        return len(self.lower)

    @property
    def extent(self):
        return np.asarray(self.upper) - np.asarray(self.lower)

    @property
    def volume(self):
        return float(np.prod(self.extent))

    @property
    def diameter(self):
        return float(np.linalg.norm(self.extent))

    def contains(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.all((pts >= np.asarray(self.lower)) & (pts <= np.asarray(self.upper)), axis=1)

    def boundary_distance(self, points):
        """Distance from each point to the window boundary (negative outside)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        below = pts - np.asarray(self.lower)
        above = np.asarray(self.upper) - pts
        return np.minimum(below, above).min(axis=1)

    def inflate(self, margin):
        return Window(tuple(np.asarray(self.lower) - margin), tuple(np.asarray(self.upper) + margin))

    def to_dict(self):
        return {"lower": list(self.lower), "upper": list(self.upper)}
