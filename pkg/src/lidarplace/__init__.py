"""Multi-LiDAR placement evaluation over probabilistic occupancy grids.

The pipeline: rasterize bounding-box datasets into per-class occupancy
probabilities, trace every beam of a candidate rig through the voxelized
region of interest, and score the rig by the entropy its coverage removes.
"""

from .geometry import (
    ClassLabel,
    Dataset,
    LabelFrame,
    OrientedBox,
    Pose,
    RoiSpec,
    VoxelGrid,
    build_grid,
    front_half_roi,
    full_roi,
    point_in_box,
    rasterize_box,
    transform_frame,
    voxel_center,
)
from .lidar import (
    CoverageMask,
    Handedness,
    LidarSpec,
    MountedLidar,
    PlacementConfig,
    beam_rays,
    coverage,
    mirror_config,
    traverse_ray,
)
from .metrics import (
    MetricsReport,
    conditional_entropy,
    evaluate,
    info_gain,
    pog_entropy,
    surrogate_metric,
    voxel_entropy,
)
from .placements import builtin, parse_placement, write_placement
from .pog import Pog, estimate_pog, load_pog, merge_counts, save_pog
from .scenario import ScenarioParams, export_dataset, generate, import_dataset, import_kitti_labels
from .search import SearchSpace, grid_sweep, optimize

__all__ = [
    "ClassLabel",
    "CoverageMask",
    "Dataset",
    "Handedness",
    "LabelFrame",
    "LidarSpec",
    "MetricsReport",
    "MountedLidar",
    "OrientedBox",
    "PlacementConfig",
    "Pog",
    "Pose",
    "RoiSpec",
    "ScenarioParams",
    "SearchSpace",
    "VoxelGrid",
    "beam_rays",
    "build_grid",
    "builtin",
    "conditional_entropy",
    "coverage",
    "estimate_pog",
    "evaluate",
    "export_dataset",
    "front_half_roi",
    "full_roi",
    "generate",
    "grid_sweep",
    "import_dataset",
    "import_kitti_labels",
    "info_gain",
    "load_pog",
    "merge_counts",
    "mirror_config",
    "optimize",
    "parse_placement",
    "point_in_box",
    "pog_entropy",
    "rasterize_box",
    "save_pog",
    "surrogate_metric",
    "transform_frame",
    "traverse_ray",
    "voxel_center",
    "voxel_entropy",
    "write_placement",
]
