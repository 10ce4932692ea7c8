"""Randomized checks of the deterministic lens and cost-function inequalities."""
from dataclasses import dataclass, field
import math

import numpy as np

from core.libs.costmodel.cost_model import CostModel
from core.libs.costmodel.lens import (
    LENS_SLACK,
    LensRegion,
    middle_tube_threshold,
    lens_mask,
    middle_tube_sample,
)
from core.libs.errors import InvalidArgumentError
from core.libs.pointcloud.seeding import substream_rng

MAX_WITNESSES = 20
SAMPLE_BOX = 10.0
REJECTION_TRIES = 256

CHECKS = ("convexity", "scaling", "doubling_bound", "excess_bound", "middle_tube")


@dataclass
class LensPropertyReport:
    alpha: float
    h: float
    trials: int
    seed: int
    E: float
    checked: dict = field(default_factory=lambda: {name: 0 for name in CHECKS})
    violations: dict = field(default_factory=lambda: {name: 0 for name in CHECKS})
    witnesses: list = field(default_factory=list)

    @property
    def total_violations(self):
        return sum(self.violations.values())

    @property
    def passed(self):
        return self.total_violations == 0

    def record(self, check, ok, witness):
        self.checked[check] += 1
        if not ok:
            self.violations[check] += 1
            if len(self.witnesses) < MAX_WITNESSES:
                self.witnesses.append({"check": check, **witness})

    def to_dict(self):
        return {
            "alpha": self.alpha,
            "h": None if math.isinf(self.h) else self.h,
            "trials": self.trials,
            "seed": self.seed,
            "E": self.E,
            "checked": dict(self.checked),
            "violations": dict(self.violations),
            "witnesses": list(self.witnesses),
            "passed": self.passed,
        }


def _sample_member(region, rng):
    center, radius = region.bounding_ball()
    d = len(center)
    for _ in range(REJECTION_TRIES):
        direction = rng.standard_normal(d)
        direction /= np.linalg.norm(direction)
        c = center + radius * rng.random() ** (1.0 / d) * direction
        if region.contains(c):
            return c
    return center


def _within(lhs, rhs):
    return lhs <= rhs * (1.0 + LENS_SLACK) + 1e-300


def lens_property_report(cm, trials, seed, E=1.0, d=2, replicate=0, stage=0):
    """Check convexity/scaling of the lens, the phi doubling and excess bounds, and the middle tube."""
    if trials < 1:
        raise InvalidArgumentError(f"trials must be >= 1, got {trials}")
    rng = substream_rng(seed, replicate, stage)
    report = LensPropertyReport(cm.alpha, cm.h, int(trials), int(seed), float(E))
    alpha = cm.alpha
    e1 = np.zeros(d)
    e1[0] = 1.0
    h0 = middle_tube_threshold(alpha, E)
    tube_cm = cm if cm.h > h0 else CostModel(alpha, 2.0 * h0)

    for _ in range(trials):
        a, b, c = rng.uniform(-SAMPLE_BOX, SAMPLE_BOX, (3, d))
        if np.array_equal(a, b):
            continue

        # closed and convex
        region = LensRegion(tuple(a), tuple(b), cm)
        c1, c2 = _sample_member(region, rng), _sample_member(region, rng)
        theta = rng.random()
        mix = theta * c1 + (1.0 - theta) * c2
        report.record("convexity", region.contains(mix),
                      {"a": a.tolist(), "b": b.tolist(), "c": c1.tolist(), "c_prime": c2.tolist(), "theta": theta})

        # W(0, l' e1) inside W(0, l e1) for l' < l, and pointwise scaling, pure power only
        if cm.is_pure_power:
            ell = rng.uniform(0.5, SAMPLE_BOX)
            ell_small = ell * rng.random()
            if ell_small > 0:
                inner = _sample_member(LensRegion(tuple(np.zeros(d)), tuple(ell_small * e1), cm), rng)
                ok = bool(lens_mask(cm, np.zeros(d), ell * e1, inner[None, :])[0])
                unit = inner / ell_small
                ok = ok and bool(lens_mask(cm, np.zeros(d), e1, unit[None, :])[0]) == bool(
                    lens_mask(cm, np.zeros(d), ell_small * e1, (ell_small * unit)[None, :])[0])
                report.record("scaling", ok, {"ell": ell, "ell_small": ell_small, "c": inner.tolist()})

        ab, bc, ac = (float(np.linalg.norm(u - v)) for u, v in ((a, b), (b, c), (a, c)))
        phi_ab, phi_bc, phi_ac = (float(cm.phi(t)) for t in (ab, bc, ac))
        report.record("doubling_bound", _within(phi_ac ** 2, 2.0 ** (2.0 * alpha) * (phi_ab ** 2 + phi_bc ** 2)),
                      {"a": a.tolist(), "b": b.tolist(), "c": c.tolist()})
        if not cm.is_pure_power:
            report.record("excess_bound", _within(phi_ac - phi_ab - phi_bc, 2.0 ** alpha * cm.h ** alpha),
                          {"a": a.tolist(), "b": b.tolist(), "c": c.tolist()})

        # middle tube H_E(a, b) inside the lens once |a-b| and h exceed h0
        length = h0 * (1.0 + rng.exponential())
        direction = rng.standard_normal(d)
        direction /= np.linalg.norm(direction)
        ta, tb = a, a + length * direction
        tube = middle_tube_sample(ta, tb, E, 4, rng)
        inside = LensRegion(tuple(ta), tuple(tb), tube_cm).mask(tube)
        report.record("middle_tube", bool(np.all(inside)),
                      {"a": ta.tolist(), "b": tb.tolist(), "E": E, "h": None if tube_cm.is_pure_power else tube_cm.h})
    return report
