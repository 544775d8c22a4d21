"""Panoptic point-cloud pseudo-labels: projection, 3D refinement, evaluation."""

from .accumulate import IcpParams, IcpResult, Scene, accumulate, group_scans, icp_align, split_scene
from .cluster import (
    NOISE,
    ClusterParams,
    Clustering,
    KdTree,
    build_kdtree,
    hdbscan,
    reassign_noise,
)
from .core import (
    INSTANCE_MODULUS,
    NO_INSTANCE,
    UNKNOWN_INSTANCE,
    VOID_ID,
    CameraModel,
    ClassTable,
    RigidTransform,
    pack_labels,
    unpack_labels,
)
from .ground import GroundParams, segment_ground
from .io import (
    LabelImage,
    PanopticLabels,
    PointCloud,
    read_calibration,
    read_label_image,
    read_labels,
    read_point_cloud,
    read_poses,
    write_calibration,
    write_label_image,
    write_labels,
    write_point_cloud,
    write_poses,
)
from .metrics import EvalReport, PanopticAggregator, miou, panoptic_quality, report_diff
from .projection import label_points, project_point
from .refine import RefineConfig, correct_instances, refine_semantics, vote_cluster
from .synth import (
    Box,
    Cylinder,
    SyntheticWorld,
    UniformFlip,
    VoidDropout,
    BoundaryBandFlip,
    WorldSpec,
    corrupt_labels,
    default_class_table,
    generate_world,
    standard_world,
)

__version__ = "0.1.0"
