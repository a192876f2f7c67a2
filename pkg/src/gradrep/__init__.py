"""Memory-bank anomaly detection on pre-extracted convolutional features.

Pipeline: fuse multi-level feature maps, keep feature vectors with
probability proportional to their gradient magnitude, train a small
mapping network that pulls normal features toward their center (with
early stopping to avoid collapse), then score test images by exact
nearest-neighbor distance to the mapped repository.
"""

from .config import RunConfig
from .errors import (
    DataError,
    FormatError,
    GradrepError,
    ManifestError,
    MetricError,
    TrainingError,
)
from .evaluation import EvalReport, auroc, few_shot, kfold, pixel_auroc, run_category
from .fusion import adaptive_resize, fuse_levels
from .learner import (
    MappedRepository,
    MlpParams,
    TrainConfig,
    TrainHistory,
    center_loss,
    forward,
    init_mlp,
    map_repository,
    train,
    train_step,
)
from .manifest import DatasetManifest, SampleRecord, load_manifest, load_mask
from .scorer import (
    AnomalyResult,
    gaussian_smooth,
    image_score,
    nearest_distance,
    pixel_score_map,
    score_sample,
    upsample_bilinear,
)
from .selector import (
    Repository,
    build_repository,
    laplacian_response,
    normalize_scores,
    sample_selection_mask,
)
from .tensor_io import read_tensor_file, write_tensor_file

__version__ = "0.1.0"

__all__ = [
    "AnomalyResult",
    "DataError",
    "DatasetManifest",
    "EvalReport",
    "FormatError",
    "GradrepError",
    "ManifestError",
    "MappedRepository",
    "MetricError",
    "MlpParams",
    "Repository",
    "RunConfig",
    "SampleRecord",
    "TrainConfig",
    "TrainHistory",
    "TrainingError",
    "adaptive_resize",
    "auroc",
    "build_repository",
    "center_loss",
    "few_shot",
    "forward",
    "fuse_levels",
    "gaussian_smooth",
    "image_score",
    "init_mlp",
    "kfold",
    "laplacian_response",
    "load_manifest",
    "load_mask",
    "map_repository",
    "nearest_distance",
    "normalize_scores",
    "pixel_auroc",
    "pixel_score_map",
    "read_tensor_file",
    "run_category",
    "sample_selection_mask",
    "score_sample",
    "train",
    "train_step",
    "upsample_bilinear",
    "write_tensor_file",
]
