from dataclasses import dataclass, field

import numpy as np

from core.libs.costmodel.cost_model import link_lengths, metric_distance

PARTICLE_ENDPOINTS = "particle-endpoints"
EXACT_ENDPOINTS = "exact-endpoints"
ENDPOINT_MODES = (PARTICLE_ENDPOINTS, EXACT_ENDPOINTS)

# ids used for the virtual terminals in exact-endpoint mode
SOURCE_TERMINAL = -1
TARGET_TERMINAL = -2

PATH_FORMAT = "path"
PATH_VERSION = 1


@dataclass
class PathResult:
    vertex_ids: list
    points: np.ndarray
    cost: float
    link_lengths: np.ndarray
    endpoint_mode: str = PARTICLE_ENDPOINTS
    trusted: bool = True
    margin: float = float("inf")
    complete: bool = True
    extras: dict = field(default_factory=dict)

    @classmethod
    def from_points(cls, vertex_ids, points, cost, endpoint_mode=PARTICLE_ENDPOINTS,
                    window=None, trust_band=0.0, complete=True):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        margin = float(window.boundary_distance(points).min()) if window is not None else float("inf")
        return cls(
            vertex_ids=[int(i) for i in vertex_ids],
            points=points,
            cost=float(cost),
            link_lengths=link_lengths(points),
            endpoint_mode=endpoint_mode,
            trusted=bool(margin >= trust_band),
            margin=margin,
            complete=complete,
        )

    @property
    def hops(self):
        return len(self.vertex_ids) - 1

    def metric_distance(self, cm):
        return metric_distance(self.cost, cm)

    def reversed(self):
        return PathResult(list(reversed(self.vertex_ids)), self.points[::-1].copy(), self.cost,
                          self.link_lengths[::-1].copy(), self.endpoint_mode, self.trusted,
                          self.margin, self.complete, dict(self.extras))

    def to_record(self):
        return {
            "format": PATH_FORMAT,
            "version": PATH_VERSION,
            "endpoint_mode": self.endpoint_mode,
            "ids": list(self.vertex_ids),
            "coordinates": self.points.tolist(),
            "link_lengths": self.link_lengths.tolist(),
            "cost": self.cost,
            "trusted": self.trusted,
            "margin": self.margin if np.isfinite(self.margin) else None,
            "complete": self.complete,
        }

    @classmethod
    def from_record(cls, record):
        return cls(
            vertex_ids=list(record["ids"]),
            points=np.asarray(record["coordinates"], dtype=float),
            cost=record["cost"],
            link_lengths=np.asarray(record["link_lengths"], dtype=float),
            endpoint_mode=record["endpoint_mode"],
            trusted=record["trusted"],
            margin=float("inf") if record["margin"] is None else record["margin"],
            complete=record.get("complete", True),
        )
