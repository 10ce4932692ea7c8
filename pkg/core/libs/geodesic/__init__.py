from core.libs.geodesic.window_policy import DEFAULT_POLICY, WindowPolicy
from core.libs.geodesic.path_result import (
    ENDPOINT_MODES,
    EXACT_ENDPOINTS,
    PARTICLE_ENDPOINTS,
    SOURCE_TERMINAL,
    TARGET_TERMINAL,
    PathResult,
)
from core.libs.geodesic.candidate_graph import (
    AUDIT_DOUBLING,
    AUDIT_NONE,
    DEFAULT_NEIGHBOR_BUDGET,
    CandidateGraph,
    all_pairs_lens_edges,
    build_candidate_graph,
)
from core.libs.geodesic.search import (
    dijkstra,
    exact_endpoint_geodesic,
    geodesic,
    shortest_path_tree,
)
from core.libs.geodesic.brute_force import (
    MAX_BRUTE_FORCE_POINTS,
    brute_force_geodesic,
    brute_force_passage_time,
    exhaustive_minimax,
    exhaustive_mst,
)
from core.libs.geodesic.minimax import UnionFind, connected_below, minimax_distance, mst_edges, tree_path
from core.libs.geodesic.passage import (
    gamma_radius,
    passage_time,
    passage_time_gap_report,
    representatives,
    truncated_passage_time,
    trusted_passage_time,
)
from core.libs.geodesic.audits import (
    crossing_audit,
    metric_axioms_audit,
    no_doubling_back_audit,
    subpath_audit,
)
from core.libs.geodesic.staircase import staircase_upper_bound
