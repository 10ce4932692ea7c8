"""Empty-lens candidate graph.

Each particle proposes its k nearest neighbours as partners; a proposed link
(a, b) survives only when no particle lies strictly inside W_phi(a, b). Any
such witness c has phi(|a-c|) < phi(|a-b|), hence |a-c| < |a-b|, so it is
itself among a's k nearest neighbours: the witness search never has to look
beyond the proposer's own neighbour list, which is contained in the bounding
ball B(a, |a-b|) of the lens.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from core.libs.costmodel.lens import LENS_SLACK, lens_mask
from core.libs.errors import InvalidArgumentError, UnstablePruneError
from core.libs.geodesic.window_policy import DEFAULT_POLICY

# --- Constants ---
DEFAULT_NEIGHBOR_BUDGET = 32
MAX_DOUBLINGS = 3
AUDIT_NONE = "none"
AUDIT_DOUBLING = "doubling"
AUDIT_LEVELS = (AUDIT_NONE, AUDIT_DOUBLING)
CHUNK_ELEMENTS = 1 << 22


def pair_lengths(points, i, j):
    diff = points[np.asarray(i)] - points[np.asarray(j)]
    return np.sqrt(np.sum(diff * diff, axis=-1))


@dataclass
class CandidateGraph:
    ps: object
    cm: object
    k: int
    audit: str
    indptr: np.ndarray
    indices: np.ndarray
    lengths: np.ndarray
    weights: np.ndarray
    policy: object = DEFAULT_POLICY
    audit_log: list = field(default_factory=list)

    def __post_init__(self):
        self._adjacency = [
            (self.indices[s:e].tolist(), self.weights[s:e].tolist())
            for s, e in zip(self.indptr[:-1], self.indptr[1:])
        ]

    @property
    def n(self):
        return len(self.indptr) - 1

    def neighbors(self, u):
        return self._adjacency[u]

    def degree(self, u):
        return int(self.indptr[u + 1] - self.indptr[u])

    def edge_set(self):
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        keep = rows < self.indices
        return set(zip(rows[keep].tolist(), self.indices[keep].tolist()))

    def has_edge(self, a, b):
        s, e = self.indptr[a], self.indptr[a + 1]
        return bool(np.any(self.indices[s:e] == b))

    def to_record(self):
        return {
            "format": "candidate-graph",
            "version": 1,
            "k": self.k,
            "audit": self.audit,
            "cost_model": self.cm.to_dict(),
            "edges": sorted(self.edge_set()),
            "audit_log": list(self.audit_log),
        }


def _knn(points, k):
    """k nearest neighbours of every point (self excluded), ascending distance."""
    n = len(points)
    k_eff = min(k, n - 1)
    _, idx = cKDTree(points).query(points, k=k_eff + 1)
    idx = np.asarray(idx).reshape(n, k_eff + 1)
    out = idx[:, 1:].copy()
    # a coincident point may sort ahead of self
    for r in np.nonzero(idx[:, 0] != np.arange(n))[0].tolist():
        out[r] = idx[r][idx[r] != r][:k_eff]
    return out


def _empty_lens_edges(points, cm, k):
    """Undirected edge set of links with empty lens interior among kNN proposals."""
    n = len(points)
    neighbors = _knn(points, k)
    k_eff = neighbors.shape[1]
    chunk = max(1, CHUNK_ELEMENTS // (k_eff * k_eff * points.shape[1]))
    proposed, rejected = [], []
    for start in range(0, n, chunk):
        rows = np.arange(start, min(n, start + chunk))
        nbr = neighbors[rows]                                     # (m, k)
        xs = points[rows]                                         # (m, d)
        ys = points[nbr]                                          # (m, k, d)
        d_row = np.sqrt(np.sum((ys - xs[:, None, :]) ** 2, axis=-1))           # |a - c|, (m, k)
        d_nbr = np.sqrt(np.sum((ys[:, :, None, :] - ys[:, None, :, :]) ** 2, axis=-1))  # |b - c|, (m, k, k)
        phi_row = cm.phi(d_row)
        lhs = phi_row[:, None, :] + cm.phi(d_nbr)                 # [a, b, c]
        rhs = phi_row[:, :, None]
        has_witness = (lhs < rhs * (1.0 - LENS_SLACK)).any(axis=2)
        # coincident pairs have no lens; keep them
        has_witness &= d_row > 0.0
        a = np.broadcast_to(rows[:, None], nbr.shape)
        keys = np.minimum(a, nbr) * n + np.maximum(a, nbr)
        proposed.append(keys[~has_witness])
        rejected.append(keys[has_witness])
    kept = np.setdiff1d(np.concatenate(proposed), np.concatenate(rejected))
    return set(zip((kept // n).tolist(), (kept % n).tolist()))


def _assemble(ps, cm, k, audit, edges, policy, audit_log):
    n = len(ps)
    points = ps.points
    if edges:
        pairs = np.asarray(sorted(edges), dtype=np.int64)
        src = np.concatenate([pairs[:, 0], pairs[:, 1]])
        dst = np.concatenate([pairs[:, 1], pairs[:, 0]])
    else:
        src = dst = np.zeros(0, dtype=np.int64)
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    lengths = pair_lengths(points, src, dst) if len(src) else np.zeros(0)
    indptr = np.searchsorted(src, np.arange(n + 1))
    return CandidateGraph(ps, cm, k, audit, indptr, dst, lengths, cm.phi(lengths),
                          policy=policy, audit_log=audit_log)


def build_candidate_graph(ps, cm, k=DEFAULT_NEIGHBOR_BUDGET, audit=AUDIT_NONE, policy=DEFAULT_POLICY,
                          logger=None):
    if len(ps) < 2:
        raise InvalidArgumentError(f"candidate graph needs n >= 2 particles, got {len(ps)}")
    if k < 1:
        raise InvalidArgumentError(f"neighbour budget must be >= 1, got {k}")
    if audit not in AUDIT_LEVELS:
        raise InvalidArgumentError(f"unknown audit level {audit!r}; expected one of {AUDIT_LEVELS}")
    points = ps.points
    edges = _empty_lens_edges(points, cm, k)
    audit_log = [{"k": k, "edges": len(edges), "exhaustive": k >= len(ps) - 1}]
    if audit == AUDIT_DOUBLING and k < len(ps) - 1:
        budget, current = k, edges
        for _ in range(MAX_DOUBLINGS):
            doubled = _empty_lens_edges(points, cm, 2 * budget)
            stable = doubled == current
            audit_log.append({"k": 2 * budget, "edges": len(doubled), "stable": stable,
                              "exhaustive": 2 * budget >= len(ps) - 1})
            if stable:
                k, edges = budget, current
                break
            budget, current = 2 * budget, doubled
            if budget >= len(ps) - 1:
                k, edges = budget, current
                break
        else:
            if logger is not None:
                logger.log_event("unstable_prune", {"k": k, "final_budget": budget, "n": len(ps)})
            raise UnstablePruneError(
                f"edge set still changing after {MAX_DOUBLINGS} doublings (final budget {budget})")
    return _assemble(ps, cm, k, audit, edges, policy, audit_log)


def all_pairs_lens_edges(ps, cm):
    """O(n^3) reference filter: every pair with empty lens interior."""
    points = ps.points
    n = len(points)
    edges = set()
    for a in range(n):
        for b in range(a + 1, n):
            if np.array_equal(points[a], points[b]):
                edges.add((a, b))
                continue
            others = np.delete(np.arange(n), [a, b])
            if len(others) == 0 or not np.any(lens_mask(cm, points[a], points[b], points[others], strict=True)):
                edges.add((a, b))
    return edges
