"""scaleforge: metric-scale spatial QA generation, rewards, and evaluation.

Subpackages and modules are importable directly; the most commonly used
names are re-exported here.
"""

from .depth import rescale_depth, temporal_smooth
from .formats import SceneBundle, canonical_json, load_scene, read_jsonl, write_jsonl
from .geometry import (
    CameraIntrinsics,
    CameraPose,
    PointCloud,
    back_project,
    object_dims,
    project_points,
    room_footprint,
    rotation_angle,
    to_canonical,
)
from .metrics import mean_relative_accuracy
from .qagen import QAGenConfig, annotate_scene, build_qa, scale_bucket
from .rewards import (
    breakdown_for,
    grpo_advantages,
    grpo_objective,
    progressive_reward,
    r_answer,
    r_format,
    r_scale,
    r_semantic,
)
from .scoring import aggregate, extract_answer, score_item
from .seeding import SplitMix64, derive_stream, fnv1a64
from .tracking import associate, count_confirmed
from .units import parse_quantity

__version__ = "0.1.0"

__all__ = [
    "CameraIntrinsics",
    "CameraPose",
    "PointCloud",
    "QAGenConfig",
    "SceneBundle",
    "SplitMix64",
    "aggregate",
    "annotate_scene",
    "associate",
    "back_project",
    "breakdown_for",
    "build_qa",
    "canonical_json",
    "count_confirmed",
    "derive_stream",
    "extract_answer",
    "fnv1a64",
    "grpo_advantages",
    "grpo_objective",
    "load_scene",
    "mean_relative_accuracy",
    "object_dims",
    "parse_quantity",
    "progressive_reward",
    "project_points",
    "r_answer",
    "r_format",
    "r_scale",
    "r_semantic",
    "read_jsonl",
    "rescale_depth",
    "room_footprint",
    "rotation_angle",
    "scale_bucket",
    "score_item",
    "temporal_smooth",
    "to_canonical",
    "write_jsonl",
    "__version__",
]
