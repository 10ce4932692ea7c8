import json
import math
from dataclasses import asdict, dataclass, field, fields

from core.libs.errors import EfppError, UsageError
from core.libs.geodesic import DEFAULT_NEIGHBOR_BUDGET, WindowPolicy

# --- Constants ---
KINDS = (
    "oracle-suite", "mu", "chi", "xi", "shape", "concentration", "superadditivity", "trees", "msf", "height",
    "straightness", "boxpath", "lens-properties", "sample", "geodesic", "directional-trees",
)
# kinds that need a distance grid, and the ones that need an s grid
GRID_KINDS = ("mu", "chi", "xi", "concentration", "superadditivity", "boxpath", "geodesic")
S_GRID_KINDS = ("shape",)
# kinds whose drivers are two-dimensional or higher only
SPATIAL_KINDS = ("oracle-suite", "shape", "trees", "msf", "height", "straightness", "boxpath", "sample",
                 "directional-trees", "geodesic")
WORKERS_ENV = "EFPP_WORKERS"


@dataclass
class ExperimentSpec:
    """One experiment: kind, model parameters, grids and run controls.

    `params` carries kind-specific extras (oracle instance count, mu_hat for
    the shape check, truncation levels, tree radius, ...).
    """
    kind: str
    d: int = 2
    alpha: float = 2.0
    density: float = 1.0
    ells: list = field(default_factory=list)
    s_grid: list = field(default_factory=list)
    replicates: int = 30
    seed: int = 0
    window: dict = field(default_factory=dict)
    out: str = None
    budget: float = 1.0
    workers: int = 1
    k: int = DEFAULT_NEIGHBOR_BUDGET
    timings: bool = False
    mongo_uri: str = None
    params: dict = field(default_factory=dict)

    @property
    def effective_replicates(self):
        """Replicate count scaled by the budget multiplier, at least one."""
        return max(1, int(math.ceil(self.replicates * self.budget - 1e-9)))

    @property
    def policy(self):
        try:
            return WindowPolicy.from_dict(self.window)
        except (EfppError, TypeError) as e:
            raise UsageError(f"invalid window overrides: {e}", field="window")

    @property
    def experiment_id(self):
        grid = ",".join(f"{v:g}" for v in (self.ells or self.s_grid))
        return f"{self.kind}/d{self.d}/a{self.alpha:g}/l{self.density:g}/[{grid}]/s{self.seed}"

    def validate(self):
        if self.kind not in KINDS:
            raise UsageError(f"unknown experiment kind {self.kind!r}", field="kind")
        if not isinstance(self.d, int) or self.d < 1:
            raise UsageError(f"--d must be a positive integer, got {self.d}", field="d")
        if self.d < 2 and self.kind in SPATIAL_KINDS:
            raise UsageError(f"{self.kind} needs --d >= 2", field="d")
        if not (self.alpha > 1 and math.isfinite(self.alpha)):
            raise UsageError(f"--alpha must be a finite real > 1, got {self.alpha}", field="alpha")
        if not (self.density > 0 and math.isfinite(self.density)):
            raise UsageError(f"--lambda must be positive, got {self.density}", field="lambda")
        if self.kind in GRID_KINDS and not self.ells:
            raise UsageError(f"{self.kind} needs a --lengths grid", field="lengths")
        if self.kind in S_GRID_KINDS and not self.s_grid:
            raise UsageError(f"{self.kind} needs an --s-grid", field="s-grid")
        for name, grid in (("lengths", self.ells), ("s-grid", self.s_grid)):
            if any(not (v > 0 and math.isfinite(v)) for v in grid):
                raise UsageError(f"--{name} values must be positive, got {grid}", field=name)
        if self.replicates < 1:
            raise UsageError(f"--replicates must be >= 1, got {self.replicates}", field="replicates")
        if not 0 <= self.seed < 1 << 64:
            raise UsageError(f"--seed must be an unsigned 64-bit integer, got {self.seed}", field="seed")
        if not self.budget > 0:
            raise UsageError(f"--budget must be positive, got {self.budget}", field="budget")
        if self.workers < 1:
            raise UsageError(f"--workers must be >= 1, got {self.workers}", field="workers")
        if self.k < 1:
            raise UsageError(f"--k must be >= 1, got {self.k}", field="k")
        self.policy
        return self

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, record):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(record) - known)
        if unknown:
            raise UsageError(f"unknown config keys: {unknown}", field=unknown[0])
        if "kind" not in record:
            raise UsageError("config has no experiment kind", field="kind")
        return cls(**record)


def load_config(path):
    """JSON config file as a dict; `lambda` is accepted as an alias for density."""
    try:
        with open(path, encoding="utf-8") as handle:
            config = json.load(handle)
    except OSError as e:
        raise UsageError(f"cannot read config file {path}: {e}", field="config")
    except json.JSONDecodeError as e:
        raise UsageError(f"config file {path} is not valid JSON: {e}", field="config")
    if not isinstance(config, dict):
        raise UsageError(f"config file {path} must hold a JSON object", field="config")
    if "lambda" in config:
        config["density"] = config.pop("lambda")
    return config
