from dataclasses import asdict, dataclass

import numpy as np

from core.libs.errors import InvalidArgumentError
from core.libs.pointcloud import Window


@dataclass(frozen=True)
class WindowPolicy:
    """Finite-window buffer and trust band for a query spanning distance ell.

    margin(ell) = max(margin_scale * s, ell ** margin_exponent)
    band(ell)   = max(trust_scale * s, ell ** trust_exponent)
    where s = density ** (-1/d) is the typical interparticle spacing.
    """
    margin_scale: float = 20.0
    margin_exponent: float = 0.8
    trust_scale: float = 5.0
    trust_exponent: float = 0.55
    regrowth_factor: float = 2.0
    max_regrowths: int = 3
    max_untrusted_fraction: float = 0.05

    def __post_init__(self):
        for name in ("margin_scale", "trust_scale", "regrowth_factor"):
            if not getattr(self, name) > 0:
                raise InvalidArgumentError(f"window policy {name} must be positive")
        if self.max_regrowths < 0:
            raise InvalidArgumentError("window policy max_regrowths must be >= 0")

    @staticmethod
    def spacing(density, d):
        return density ** (-1.0 / d)

    def margin(self, ell, density, d, attempt=0):
        base = max(self.margin_scale * self.spacing(density, d), max(ell, 0.0) ** self.margin_exponent)
        return base * self.regrowth_factor ** attempt

    def trust_band(self, ell, density, d):
        return max(self.trust_scale * self.spacing(density, d), max(ell, 0.0) ** self.trust_exponent)

    def window_for(self, x, y, density, attempt=0):
        """Bounding box of x and y grown by the margin for their distance."""
        pts = np.vstack([np.asarray(x, dtype=float), np.asarray(y, dtype=float)])
        ell = float(np.linalg.norm(pts[1] - pts[0]))
        return Window.around(pts, self.margin(ell, density, pts.shape[1], attempt))

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, overrides):
        known = set(cls.__dataclass_fields__)
        unknown = set(overrides) - known
        if unknown:
            raise InvalidArgumentError(f"unknown window policy fields: {sorted(unknown)}")
        return cls(**overrides)


DEFAULT_POLICY = WindowPolicy()
