"""Lane graph estimation plumbing: Bezier lane graphs, flat-ground BEV warping,
temporal aggregation, spatio-temporal embeddings and multi-frame merging."""

from .bev_warp import BevGrid, WarpedFrame, compute_mask, crop_to_target, warp_frame, warp_reference
from .camera_geometry import AXIS_CONVENTION, CameraIntrinsics, CameraRig, RigidTransform
from .lane_graph import BezierCenterline, LaneGraph, bezier_eval, build_incidence, interpolate
from .metrics import EvalReport, evaluate
from .postmerge import FrameEstimate, MergeParams, match_and_update, post_merge
from .stetr import EmbeddingConfig, flatten_with_embeddings, toy_query_decoder
from .synthetic import Layout, NoiseParams, generate_scene, simulate_frame_estimates
from .temporal_agg import AggregateOp, AggregatedBev, aggregate
from .tensor_core import BinaryMask, FeatureMap

__version__ = "0.1.0"

__all__ = [
    "BevGrid",
    "WarpedFrame",
    "compute_mask",
    "crop_to_target",
    "warp_frame",
    "warp_reference",
    "AXIS_CONVENTION",
    "CameraIntrinsics",
    "CameraRig",
    "RigidTransform",
    "BezierCenterline",
    "LaneGraph",
    "bezier_eval",
    "build_incidence",
    "interpolate",
    "EvalReport",
    "evaluate",
    "FrameEstimate",
    "MergeParams",
    "match_and_update",
    "post_merge",
    "EmbeddingConfig",
    "flatten_with_embeddings",
    "toy_query_decoder",
    "Layout",
    "NoiseParams",
    "generate_scene",
    "simulate_frame_estimates",
    "AggregateOp",
    "AggregatedBev",
    "aggregate",
    "BinaryMask",
    "FeatureMap",
]
