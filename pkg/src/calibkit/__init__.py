"""calibkit: calibration metrics, a differentiable calibration loss, and a
small deterministic trainer for studying confidence calibration.

Set ``CALIBKIT_KERNELS=numpy`` to force the pure-numpy kernel path; the
default uses the compiled kernels when numba is importable.
"""

__version__ = "0.1.0"

from .data import Dataset, LogFormat, SplitSpec, gen_synthetic, load_predictions, split
from .errors import (
    DomainError,
    LabelRangeError,
    MalformedRowError,
    MissingLogError,
    PredictionLogError,
    ProbabilitySumError,
)
from .kernels import BACKEND
from .losses import (
    IndicatorVariant,
    LossConfig,
    LossValue,
    auto_gamma,
    combined_loss,
    curriculum_weight,
    nll_loss,
    soft_ece,
    soft_ece_grad,
    soft_indicator,
    softmax,
    weighted_loss,
)
from .metrics import (
    BinStats,
    ClassificationReport,
    PredictionRecord,
    ReliabilityTable,
    bin_index,
    build_reliability_table,
    classification_report,
    ece,
    records_from_probs,
)
from .reporting import (
    DiagramStyle,
    comparison_table,
    render_reliability_svg,
    save_predictions,
)
from .training import (
    EpochStats,
    ModelParams,
    TrainConfig,
    TrainReport,
    TrainingMode,
    backward,
    evaluate,
    forward,
    init_model,
    sgd_step,
    train,
)

__all__ = [
    "__version__",
    "BACKEND",
    "BinStats",
    "ClassificationReport",
    "Dataset",
    "DiagramStyle",
    "DomainError",
    "EpochStats",
    "IndicatorVariant",
    "LabelRangeError",
    "LogFormat",
    "LossConfig",
    "LossValue",
    "MalformedRowError",
    "MissingLogError",
    "ModelParams",
    "PredictionLogError",
    "PredictionRecord",
    "ProbabilitySumError",
    "ReliabilityTable",
    "SplitSpec",
    "TrainConfig",
    "TrainReport",
    "TrainingMode",
    "auto_gamma",
    "backward",
    "bin_index",
    "build_reliability_table",
    "classification_report",
    "combined_loss",
    "comparison_table",
    "curriculum_weight",
    "ece",
    "evaluate",
    "forward",
    "gen_synthetic",
    "init_model",
    "load_predictions",
    "nll_loss",
    "records_from_probs",
    "render_reliability_svg",
    "save_predictions",
    "sgd_step",
    "soft_ece",
    "soft_ece_grad",
    "soft_indicator",
    "softmax",
    "split",
    "train",
    "weighted_loss",
]
