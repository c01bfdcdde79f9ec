"""Reference trainer for the architecture search wire protocol."""

__version__ = "0.1.0"

from .data import SequenceDataset, generate_synthetic, ingest
from .genotype import GenotypeSpec, parse_genotype
from .model import build_model, parameter_count
from .train import TrainerSettings, TrainOutcome, train_and_evaluate

__all__ = [
    "__version__",
    "GenotypeSpec",
    "SequenceDataset",
    "TrainOutcome",
    "TrainerSettings",
    "build_model",
    "generate_synthetic",
    "ingest",
    "parameter_count",
    "parse_genotype",
    "train_and_evaluate",
]
