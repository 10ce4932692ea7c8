import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from core.libs.errors import EmptyDomainError, InvalidArgumentError
from core.libs.pointcloud.seeding import substream_rng
from core.libs.pointcloud.window import Window

# --- Constants ---
INVERSION_MEAN_LIMIT = 50.0
MAX_GRID_CELLS = 10 ** 8
POINTSET_FORMAT = "pointset"
POINTSET_VERSION = 1


def poisson_count(mean, rng):
    """Poisson variate: inversion up to mean 50, numpy's transformed rejection above."""
    if mean <= INVERSION_MEAN_LIMIT:
        u = rng.random()
        k = 0
        p = math.exp(-mean)
        cumulative = p
        while u > cumulative:
            k += 1
            p *= mean / k
            cumulative += p
            if p == 0.0:
                break
        return k
    return int(rng.poisson(mean))


class UniformGrid:
    """Cell index over a window, stored CSR-style (ids sorted by linear cell)."""

    def __init__(self, points, window, cell_size):
        self.window = window
        self.origin = np.asarray(window.lower)
        extent = window.extent
        shape = np.maximum(np.ceil(extent / cell_size).astype(np.int64), 1)
        while int(np.prod(shape)) > MAX_GRID_CELLS:
            cell_size *= 2.0
            shape = np.maximum(np.ceil(extent / cell_size).astype(np.int64), 1)
        self.cell_size = float(cell_size)
        self.shape = tuple(int(s) for s in shape)
        cells = self.cells_of(points)
        linear = np.ravel_multi_index(cells.T, self.shape) if len(points) else np.zeros(0, dtype=np.int64)
        self.order = np.argsort(linear, kind="stable")
        self.starts = np.searchsorted(linear[self.order], np.arange(int(np.prod(self.shape)) + 1))

    def cells_of(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.size == 0:
            return np.zeros((0, len(self.shape)), dtype=np.int64)
        raw = np.floor((pts - self.origin) / self.cell_size).astype(np.int64)
        return np.clip(raw, 0, np.asarray(self.shape) - 1)

    def ids_in_cell(self, cell):
        linear = int(np.ravel_multi_index(tuple(int(c) for c in cell), self.shape))
        return self.order[self.starts[linear]:self.starts[linear + 1]]

    def ids_in_block(self, lo, hi):
        """Ids in the cell block lo..hi (inclusive, clipped to the grid)."""
        lo = np.clip(np.asarray(lo, dtype=np.int64), 0, np.asarray(self.shape) - 1)
        hi = np.clip(np.asarray(hi, dtype=np.int64), 0, np.asarray(self.shape) - 1)
        if np.any(hi < lo):
            return np.zeros(0, dtype=np.int64)
        chunks = []
        # rows along the last axis are contiguous in linear order
        prefix_ranges = [range(int(a), int(b) + 1) for a, b in zip(lo[:-1], hi[:-1])]
        for prefix in itertools.product(*prefix_ranges):
            first = np.ravel_multi_index(prefix + (int(lo[-1]),), self.shape)
            last = np.ravel_multi_index(prefix + (int(hi[-1]),), self.shape)
            chunks.append(self.order[self.starts[first]:self.starts[last + 1]])
        if not chunks:
            return np.zeros(0, dtype=np.int64)
        return np.concatenate(chunks)

    def ring_cells(self, center, radius):
        """Grid cells at Chebyshev distance exactly `radius` from `center`."""
        d = len(self.shape)
        shape = np.asarray(self.shape)
        if radius == 0:
            return [tuple(int(c) for c in center)]
        ring = []
        for offset in itertools.product(range(-radius, radius + 1), repeat=d):
            if max(abs(o) for o in offset) != radius:
                continue
            cell = np.asarray(center) + np.asarray(offset)
            if np.all(cell >= 0) and np.all(cell < shape):
                ring.append(tuple(int(c) for c in cell))
        return ring


@dataclass(frozen=True)
class BoxOccupancy:
    """Occupancy of the epsilon-boxes (centers at epsilon * Z^d) covering a window."""
    epsilon: float
    lower_index: tuple
    upper_index: tuple
    counts: dict = field(default_factory=dict)

    def cells(self):
        ranges = [range(lo, hi + 1) for lo, hi in zip(self.lower_index, self.upper_index)]
        return itertools.product(*ranges)

    def count(self, cell):
        return self.counts.get(tuple(cell), 0)

    def occupied(self, cell):
        return self.count(cell) > 0

    def as_map(self):
        """Every covering cell -> (occupied, count)."""
        return {cell: (self.count(cell) > 0, self.count(cell)) for cell in self.cells()}

    @property
    def total(self):
        return int(sum(self.counts.values()))


def box_index(points, epsilon):
    """Lattice index nu of the epsilon-box containing each point (box centered at epsilon*nu)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return np.floor(pts / epsilon + 0.5).astype(np.int64)


class PointSet:
    """Immutable particle configuration in a window with a uniform-grid index."""

    def __init__(self, points, window, density, seed=0):
        if not density > 0:
            raise InvalidArgumentError(f"density must be positive, got {density}")
        pts = np.asarray(points, dtype=float).reshape(-1, window.dimension)
        if len(pts) and not np.all(window.contains(pts)):
            raise InvalidArgumentError("points must lie inside the window")
        pts = pts.copy()
        pts.setflags(write=False)
        self.points = pts
        self.window = window
        self.density = float(density)
        self.seed = int(seed)
        self.grid = UniformGrid(pts, window, density ** (-1.0 / window.dimension))

    @classmethod
    def from_points(cls, points, window, density=1.0, seed=0):
        return cls(points, window, density, seed)

    def __len__(self):
        return len(self.points)

    @property
    def dimension(self):
        return self.window.dimension

    # --- queries ---

    def nearest_particle(self, x):
        if len(self.points) == 0:
            raise EmptyDomainError("nearest_particle on an empty point set")
        x = np.asarray(x, dtype=float).reshape(-1)
        grid = self.grid
        center = grid.cells_of(x[None, :])[0]
        best_id, best_d2 = -1, math.inf
        for radius in range(max(grid.shape) + 1):
            for cell in grid.ring_cells(center, radius):
                ids = grid.ids_in_cell(cell)
                if len(ids) == 0:
                    continue
                d2 = np.sum((self.points[ids] - x) ** 2, axis=1)
                for i, dist2 in zip(ids.tolist(), d2.tolist()):
                    if dist2 < best_d2 or (dist2 == best_d2 and i < best_id):
                        best_id, best_d2 = i, dist2
            # everything beyond this ring is at least radius * cell_size away
            if best_id >= 0 and math.sqrt(best_d2) < radius * grid.cell_size:
                break
        return best_id

    def range_query(self, center, r):
        if r < 0:
            raise InvalidArgumentError(f"radius must be >= 0, got {r}")
        center = np.asarray(center, dtype=float).reshape(-1)
        if len(self.points) == 0:
            return []
        lo = self.grid.cells_of((center - r)[None, :])[0]
        hi = self.grid.cells_of((center + r)[None, :])[0]
        ids = self.grid.ids_in_block(lo, hi)
        if len(ids) == 0:
            return []
        d2 = np.sum((self.points[ids] - center) ** 2, axis=1)
        return sorted(ids[d2 <= r * r].tolist())

    def box_occupancy(self, epsilon):
        if not epsilon > 0:
            raise InvalidArgumentError(f"box size must be positive, got {epsilon}")
        lower_index = tuple(int(v) for v in box_index(np.asarray(self.window.lower), epsilon)[0])
        upper_index = tuple(int(v) for v in box_index(np.asarray(self.window.upper), epsilon)[0])
        counts = {}
        if len(self.points):
            cells, tallies = np.unique(box_index(self.points, epsilon), axis=0, return_counts=True)
            counts = {tuple(int(v) for v in c): int(t) for c, t in zip(cells, tallies)}
        return BoxOccupancy(float(epsilon), lower_index, upper_index, counts)

    # --- serialization ---

    def to_record(self):
        return {
            "format": POINTSET_FORMAT,
            "version": POINTSET_VERSION,
            "d": self.dimension,
            "lambda": self.density,
            "seed": self.seed,
            "window": self.window.to_dict(),
            "n": len(self.points),
            "points": self.points.tolist(),
        }

    @classmethod
    def from_record(cls, record):
        if record.get("format") != POINTSET_FORMAT or record.get("version") != POINTSET_VERSION:
            raise InvalidArgumentError(f"not a v{POINTSET_VERSION} point set record")
        window = Window(tuple(record["window"]["lower"]), tuple(record["window"]["upper"]))
        points = np.asarray(record["points"], dtype=float).reshape(-1, record["d"])
        if len(points) != record["n"]:
            raise InvalidArgumentError(f"record announces {record['n']} points, body has {len(points)}")
        return cls(points, window, record["lambda"], record["seed"])


def sample_poisson(window, density, seed, replicate=0, stage=0):
    """Homogeneous Poisson sample of intensity `density` in `window`.

    Count first (Poisson with mean density * volume), then that many i.i.d.
    uniform points, both drawn from the substream (seed, replicate, stage).
    """
    if not isinstance(window, Window):
        raise InvalidArgumentError("window must be a Window")
    if not density > 0 or not math.isfinite(density):
        raise InvalidArgumentError(f"density must be positive, got {density}")
    rng = substream_rng(seed, replicate, stage)
    n = poisson_count(density * window.volume, rng)
    lower = np.asarray(window.lower)
    points = lower + rng.random((n, window.dimension)) * window.extent
    # guard against the upper edge through rounding
    points = np.minimum(points, np.asarray(window.upper))
    return PointSet(points, window, density, seed)


def nearest_particle(ps, x):
    return ps.nearest_particle(x)


def range_query(ps, center, r):
    return ps.range_query(center, r)


def box_occupancy(ps, epsilon):
    return ps.box_occupancy(epsilon)
