from dataclasses import dataclass
import math

import numpy as np

from core.libs.errors import InvalidArgumentError


@dataclass(frozen=True)
class CostModel:
    """Link cost phi: t**alpha, or the truncated form linear beyond h.

    With finite h, phi(t) = t**alpha for t <= h and
    h**alpha + alpha * h**(alpha - 1) * (t - h) above, which keeps phi
    continuous, convex and C^1.
    """
    alpha: float
    h: float = math.inf

    def __post_init__(self):
        if not (self.alpha > 1 and math.isfinite(self.alpha)):
            raise InvalidArgumentError(f"alpha must be a finite real > 1, got {self.alpha}")
        if not self.h > 0:
            raise InvalidArgumentError(f"truncation h must be positive, got {self.h}")

    @classmethod
    def truncated(cls, alpha, ell, h0=1.0, h1=1.0, kappa3=0.5):
        """phi_ell with h_ell = max(h0, h1 * ell**kappa3)."""
        return cls(alpha, max(h0, h1 * ell ** kappa3))

    @property
    def is_pure_power(self):
        return math.isinf(self.h)

    def phi(self, s):
        """Vectorized phi; expects nonnegative lengths."""
        s = np.asarray(s, dtype=float)
        power = np.power(s, self.alpha)
        if self.is_pure_power:
            return power
        h = self.h
        linear = h ** self.alpha + self.alpha * h ** (self.alpha - 1.0) * (s - h)
        return np.where(s <= h, power, linear)

    def to_dict(self):
        return {"alpha": self.alpha, "h": None if self.is_pure_power else self.h}

    @classmethod
    def from_dict(cls, record):
        h = record.get("h")
        return cls(record["alpha"], math.inf if h is None else h)


def link_cost(cm, s):
    if s < 0:
        raise InvalidArgumentError(f"link length must be >= 0, got {s}")
    return float(cm.phi(s))


def link_lengths(pts):
    pts = np.asarray(pts, dtype=float)
    if len(pts) < 2:
        return np.zeros(0)
    return np.sqrt(np.sum(np.diff(pts, axis=0) ** 2, axis=1))


def path_cost(cm, pts):
    """Sum of phi over consecutive links, accumulated left to right."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if len(pts) == 0:
        raise InvalidArgumentError("path needs at least one point")
    total = 0.0
    for cost in cm.phi(link_lengths(pts)).tolist():
        total += cost
    return total


def metric_distance(cost, cm):
    """D_alpha = T ** (1/alpha)."""
    return float(cost) ** (1.0 / cm.alpha)
