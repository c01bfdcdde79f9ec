"""Multi-trial architecture search over block-encoded sequence models."""

__version__ = "0.1.0"

from .complexity import FlopsBreakdown, InputShape, estimate_flops
from .errors import (
    ArchSearchError,
    EvaluatorFailureThreshold,
    LayoutError,
    NumericalError,
    StrategyConverged,
    TableMissError,
    ValidationError,
)
from .evaluation import (
    EvaluationBudget,
    EvaluationResult,
    SurrogateSpec,
    TrainerEndpoint,
    evaluate_external,
    evaluate_surrogate,
)
from .metrics import MetricReport, PredictionBatch, classification_report, cross_entropy
from .space import (
    ClassificationHead,
    EncodedVector,
    Genotype,
    IntRange,
    SearchSpaceDef,
    SequenceBlock,
    decode,
    default_space,
    distance,
    encode,
    minimal_genotype,
    mutate,
    neighbors,
    sample_uniform,
    validate_genotype,
    validate_space,
)
from .strategies import STRATEGIES, TrialRecord, make_strategy

__all__ = [
    "__version__",
    "ArchSearchError",
    "ClassificationHead",
    "EncodedVector",
    "EvaluationBudget",
    "EvaluationResult",
    "EvaluatorFailureThreshold",
    "FlopsBreakdown",
    "Genotype",
    "InputShape",
    "IntRange",
    "LayoutError",
    "MetricReport",
    "NumericalError",
    "PredictionBatch",
    "STRATEGIES",
    "SearchSpaceDef",
    "SequenceBlock",
    "StrategyConverged",
    "SurrogateSpec",
    "TableMissError",
    "TrainerEndpoint",
    "TrialRecord",
    "ValidationError",
    "classification_report",
    "cross_entropy",
    "decode",
    "default_space",
    "distance",
    "encode",
    "estimate_flops",
    "evaluate_external",
    "evaluate_surrogate",
    "make_strategy",
    "minimal_genotype",
    "mutate",
    "neighbors",
    "sample_uniform",
    "validate_genotype",
    "validate_space",
]
