from core.libs.costmodel.cost_model import CostModel, link_cost, link_lengths, metric_distance, path_cost
from core.libs.costmodel.geometry import (
    angle,
    angles_to,
    cone_contains,
    orthonormal_frame,
    points_to_segment_distance,
    segment_distance,
    segments_intersect,
)
from core.libs.costmodel.lens import (
    LENS_SLACK,
    LensRegion,
    middle_tube_constant,
    middle_tube_threshold,
    lens_bounding_ball,
    lens_contains,
    lens_half_width,
    lens_mask,
    middle_tube_sample,
)
from core.libs.costmodel.lens_report import LensPropertyReport, lens_property_report
