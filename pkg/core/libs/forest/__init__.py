from core.libs.forest.geodesic_tree import (
    ROOTED_AT_DIRECTION,
    ROOTED_AT_PARTICLE,
    GeodesicTree,
    directional_geodesic,
    directional_tree,
    geodesic_tree_from,
)
from core.libs.forest.heights import (
    CoalescenceRecord,
    HeightField,
    HeightRecursionReport,
    ball_from_tree,
    coalescence,
    height_field,
    height_function,
    height_sublevel_set,
    height_via_meeting,
    parent_stability,
    verify_height_recursion,
)
from core.libs.forest.spanning import euclidean_mst, msf_edge_criterion, mst_edge_set
from core.libs.forest.straightness import preorder, straightness_audit, tree_stats
