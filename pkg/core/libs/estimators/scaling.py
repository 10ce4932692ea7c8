"""Per-distance aggregates and log-log regression with bootstrap intervals."""
from dataclasses import dataclass, field
import math

import numpy as np
import scipy.stats

from core.libs.errors import InvalidArgumentError, RegressionError

BOOTSTRAP_RESAMPLES = 1000
CONFIDENCE = 0.95
STATISTICS = ("mean", "variance")


@dataclass
class Aggregate:
    """Running (count, sum, sum of squares); merge is associative."""
    count: int = 0
    total: float = 0.0
    total_sq: float = 0.0

    def add(self, value):
        self.count += 1
        self.total += value
        self.total_sq += value * value
        return self

    @classmethod
    def of(cls, values):
        agg = cls()
        for v in values:
            agg.add(float(v))
        return agg

    def merge(self, other):
        return Aggregate(self.count + other.count, self.total + other.total, self.total_sq + other.total_sq)

    @property
    def mean(self):
        return self.total / self.count if self.count else math.nan

    @property
    def variance(self):
        if self.count < 2:
            return math.nan
        return max(0.0, (self.total_sq - self.total * self.total / self.count) / (self.count - 1))

    @property
    def stderr(self):
        return math.sqrt(self.variance / self.count) if self.count >= 2 else math.nan

    def to_dict(self):
        return {"count": self.count, "sum": self.total, "sum_sq": self.total_sq}


def ols_slope(x, y):
    """(slope, intercept) of y on x by ordinary least squares."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) != len(y):
        raise RegressionError(f"regression inputs differ in length: {len(x)} vs {len(y)}")
    if len(np.unique(x)) < 2:
        raise RegressionError("regression needs at least two distinct abscissae")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise RegressionError("regression inputs must be finite")
    fit = scipy.stats.linregress(x, y)
    return float(fit.slope), float(fit.intercept)


def _statistic(values, statistic):
    values = np.asarray(values, dtype=float)
    if statistic == "mean":
        return float(values.mean())
    return float(values.var(ddof=1))


def log_log_slope(ells, samples, statistic="mean"):
    stats = [_statistic(s, statistic) for s in samples]
    if any(not v > 0 for v in stats):
        raise RegressionError(f"log-log regression needs positive {statistic} at every distance")
    return ols_slope(np.log(ells), np.log(stats))


def bootstrap_slope(ells, samples, statistic="mean", resamples=BOOTSTRAP_RESAMPLES, confidence=CONFIDENCE, rng=None):
    """Percentile interval of the log-log slope, resampling replicates independently per distance."""
    rng = rng if rng is not None else np.random.default_rng(0)
    log_ells = np.log(np.asarray(ells, dtype=float))
    arrays = [np.asarray(s, dtype=float) for s in samples]
    slopes = np.empty(resamples)
    for b in range(resamples):
        stats = []
        for values in arrays:
            pick = values[rng.integers(0, len(values), len(values))]
            stats.append(_statistic(pick, statistic))
        stats = np.asarray(stats)
        slopes[b] = ols_slope(log_ells, np.log(stats))[0] if np.all(stats > 0) else np.nan
    tail = (1.0 - confidence) / 2.0
    return float(np.nanpercentile(slopes, 100 * tail)), float(np.nanpercentile(slopes, 100 * (1.0 - tail)))


@dataclass(frozen=True)
class DeviationSample:
    """Largest distance from a geodesic's vertices to the segment it joins."""
    ell: float
    d_max: float
    trusted: bool

    def __post_init__(self):
        if not self.d_max >= 0:
            raise InvalidArgumentError(f"deviation must be >= 0, got {self.d_max}")

    @classmethod
    def from_record(cls, record):
        return cls(float(record["ell"]), float(record["d_max"]), bool(record["trusted"]))


@dataclass
class ScalingEstimate:
    name: str
    statistic: str
    ells: list
    samples: list
    replicates: int
    seed: int
    slope: float = math.nan
    intercept: float = math.nan
    ci: tuple = (math.nan, math.nan)
    failures: int = 0
    extras: dict = field(default_factory=dict)

    @property
    def aggregates(self):
        return [Aggregate.of(s) for s in self.samples]

    @property
    def means(self):
        return [a.mean for a in self.aggregates]

    @property
    def variances(self):
        return [a.variance for a in self.aggregates]

    @property
    def stderrs(self):
        return [a.stderr for a in self.aggregates]

    def fit(self, resamples=BOOTSTRAP_RESAMPLES, rng=None):
        if len(self.ells) < 2:
            raise RegressionError(f"{self.name}: slope needs at least two distances, got {len(self.ells)}")
        self.slope, self.intercept = log_log_slope(self.ells, self.samples, self.statistic)
        self.ci = bootstrap_slope(self.ells, self.samples, self.statistic, resamples, rng=rng)
        return self

    def slope_from_aggregates(self):
        """The point slope recomputed from the stored (count, sum, sum of squares)."""
        stats = [a.mean if self.statistic == "mean" else a.variance for a in self.aggregates]
        return ols_slope(np.log(self.ells), np.log(stats))[0]

    def to_dict(self):
        return {
            "name": self.name,
            "statistic": self.statistic,
            "ells": list(self.ells),
            "aggregates": [a.to_dict() for a in self.aggregates],
            "means": self.means,
            "variances": self.variances,
            "stderrs": self.stderrs,
            "slope": self.slope,
            "intercept": self.intercept,
            "ci": list(self.ci),
            "replicates": self.replicates,
            "seed": self.seed,
            "failures": self.failures,
            "extras": dict(self.extras),
        }
