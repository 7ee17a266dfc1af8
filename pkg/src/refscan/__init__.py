"""refscan: reference-conditioned trajectory retrieval and grounding.

Given per-frame visual token grids, a textual reference, and keyframe
detections, the pipeline retrieves semantic-aligned token trajectories,
aggregates them with linear state-space scans at three semantic
hierarchies, fuses the hierarchies with prompt-augmented cross-attention
over temporal and spatial branches, and predicts the referred person's
box plus multi-label actions. Trainable end to end on synthetic
planted-signal fixtures.
"""

from .config import TrainConfig
from .fusion import (
    ModelOutput,
    PipelineSample,
    bce_loss,
    cross_attention,
    forward,
    fuse_predictions,
    init_model_params,
    mse_loss,
    pool_spatial,
    pool_temporal,
)
from .metrics import EvalRecord, auroc, iou, mean_iou, multilabel_map
from .retrieval import Trajectory, TrajectorySet, VisualTokenGrid, build_trajectory, build_trajectory_set, nearest_token
from .semantics import (
    Detection,
    ReferenceBundle,
    SyntheticEncoder,
    build_scene_attribute_tokens,
    default_stopwords,
    embed_reference,
    synthetic_encode,
    tokenize_and_filter,
)
from .ssm import ScanOutput, SsmLayerParams, aggregate_holistic, aggregate_keyword, aggregate_scene, init_ssm_params, ssm_scan, ssm_scan_oracle

__version__ = "0.1.0"

__all__ = [
    "Detection",
    "EvalRecord",
    "ModelOutput",
    "PipelineSample",
    "ReferenceBundle",
    "ScanOutput",
    "SsmLayerParams",
    "SyntheticEncoder",
    "Trajectory",
    "TrajectorySet",
    "TrainConfig",
    "VisualTokenGrid",
    "aggregate_holistic",
    "aggregate_keyword",
    "aggregate_scene",
    "auroc",
    "bce_loss",
    "build_scene_attribute_tokens",
    "build_trajectory",
    "build_trajectory_set",
    "cross_attention",
    "default_stopwords",
    "embed_reference",
    "forward",
    "fuse_predictions",
    "init_model_params",
    "init_ssm_params",
    "iou",
    "mean_iou",
    "mse_loss",
    "multilabel_map",
    "nearest_token",
    "pool_spatial",
    "pool_temporal",
    "ssm_scan",
    "ssm_scan_oracle",
    "synthetic_encode",
    "tokenize_and_filter",
]
