"""Structure-aware monocular SLAM back-end with global vanishing-direction
primitives, plus a synthetic benchmark harness."""

from .geometry import (
    CameraIntrinsics,
    OrthonormalLine,
    PluckerLine,
    Pose,
    se3_exp,
    se3_log,
)
from .segments import Segment2D, segment_line
from .vanishing import detect_vanishing_points, lift_vanishing_point
from .primitives import GlobalPrimitive, GlobalPrimitiveRegistry, fuse_directions
from .graph import FactorGraph, OptimizeOptions, optimize, total_cost
from .simulate import ScenarioConfig
from .evaluate import Trajectory, ate_rmse, umeyama_align
from .pipeline import PipelineOptions, run_ablation, run_pipeline

__version__ = "0.1.0"

__all__ = [
    "CameraIntrinsics", "OrthonormalLine", "PluckerLine", "Pose",
    "se3_exp", "se3_log", "Segment2D", "segment_line",
    "detect_vanishing_points", "lift_vanishing_point",
    "GlobalPrimitive", "GlobalPrimitiveRegistry", "fuse_directions",
    "FactorGraph", "OptimizeOptions", "optimize", "total_cost",
    "ScenarioConfig", "Trajectory", "ate_rmse", "umeyama_align",
    "PipelineOptions", "run_ablation", "run_pipeline",
]
