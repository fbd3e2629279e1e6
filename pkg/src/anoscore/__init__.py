"""anoscore: representation-space naturalness metrics for generative models.

Measures two per-image properties of a frozen feature model -- complexity
(curvature of the feature trajectory under a linear noise walk) and
vulnerability (feature displacement under a feature-space gradient attack) --
and aggregates them into the dataset-level anomaly score (a 2D two-sample KS
statistic) and the per-image AS-i ratio.
"""

__version__ = "0.1.0"

from .complexity import TrajectoryConfig, TrajectoryResult, complexity
from .models import (
    build_model,
    load_model_config,
    make_toy_affine_model,
    make_toy_nonlinear_model,
)
from .rng import sample_unit_direction, seed_material
from .scores import (
    MeasureRecord,
    ScoreResult,
    anomaly_score,
    asi,
    ks1d,
    ks2d,
    mean_asi,
)
from .stats import TTestResult, minmax_normalize, pearson, spearman, welch_ttest
from .types import (
    FeatureModel,
    FeatureVector,
    ImageTensor,
    InputError,
    NumericError,
    RandomDirection,
)
from .vulnerability import AttackConfig, AttackResult, vulnerability

__all__ = [
    "__version__",
    "AttackConfig",
    "AttackResult",
    "FeatureModel",
    "FeatureVector",
    "ImageTensor",
    "InputError",
    "MeasureRecord",
    "NumericError",
    "RandomDirection",
    "ScoreResult",
    "TTestResult",
    "TrajectoryConfig",
    "TrajectoryResult",
    "anomaly_score",
    "asi",
    "build_model",
    "complexity",
    "ks1d",
    "ks2d",
    "load_model_config",
    "make_toy_affine_model",
    "make_toy_nonlinear_model",
    "mean_asi",
    "minmax_normalize",
    "pearson",
    "sample_unit_direction",
    "seed_material",
    "spearman",
    "vulnerability",
    "welch_ttest",
]
