from core.libs.pointcloud.window import Window
from core.libs.pointcloud.seeding import substream_rng, substream_key
from core.libs.pointcloud.point_set import (
    BoxOccupancy,
    PointSet,
    UniformGrid,
    box_index,
    box_occupancy,
    nearest_particle,
    poisson_count,
    range_query,
    sample_poisson,
)
