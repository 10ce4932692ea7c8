from core.libs.estimators.scaling import (
    Aggregate,
    DeviationSample,
    ScalingEstimate,
    bootstrap_slope,
    log_log_slope,
    ols_slope,
)
from core.libs.estimators.boxpath import box_path, box_visits, boxes_adjacent, boxpath_stats, default_box_size
from core.libs.estimators.replicates import (
    boxpath_replicate,
    one_dimensional_passage_time,
    passage_replicate,
    shape_radius_epsilon,
    shape_replicate,
    truncation_replicate,
)
from core.libs.estimators.experiments import (
    concentration_check,
    concentration_report,
    density_scaling_check,
    estimate_mu,
    isotropy_check,
    shape_check,
    superadditivity_check,
    truncation_gap_trend,
    variance_scaling,
    wandering_scaling,
)
