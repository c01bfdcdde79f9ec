"""Training loop: Adam, mini-batches, early stopping on validation
cross-entropy, best-epoch metrics reported."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import torch

from .data import SequenceDataset
from .genotype import GenotypeSpec
from .metrics import PROB_CLIP, metric_set
from .model import build_model

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainerSettings:
    """Training constants; the defaults are the fixed protocol of the study
    (Adam, lr 1e-4, batch 256, dropout 0.3).  Tests override lr/batch for
    desk-scale datasets where two batches per epoch move Adam too little."""

    learning_rate: float = 1e-4
    batch_size: int = 256
    dropout: float = 0.3
    deterministic: bool = True


@dataclass
class TrainOutcome:
    metrics: dict
    epochs_ran: int
    converged: bool


class TrainingError(RuntimeError):
    """Non-finite loss or another unrecoverable training failure."""


def _tensors(dataset: SequenceDataset, idx: np.ndarray) -> tuple[list[torch.Tensor], torch.Tensor]:
    modalities = []
    for m in dataset.modality_names:
        stacked = np.stack([dataset.instances[i][m] for i in idx])
        modalities.append(torch.tensor(stacked, dtype=torch.float32))
    labels = torch.tensor(dataset.labels[idx], dtype=torch.long)
    return modalities, labels


def _nll(probs: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    picked = probs.gather(1, labels.unsqueeze(1)).squeeze(1)
    return -torch.log(picked.clamp_min(PROB_CLIP)).mean()


def train_and_evaluate(
    genotype: GenotypeSpec,
    dataset: SequenceDataset,
    max_epochs: int,
    patience: int,
    fold: int,
    seed: int,
    settings: TrainerSettings = TrainerSettings(),
) -> TrainOutcome:
    """Train on the out-of-fold instances, validate on the fold, early-stop
    on validation cross-entropy and return the best epoch's metric set.
    With patience 0 exactly one epoch runs."""
    dataset.validate()
    if not 0 <= fold < dataset.num_folds:
        raise TrainingError(f"fold {fold} outside 0..{dataset.num_folds - 1}")
    if patience > max_epochs:
        raise TrainingError("patience must be <= max_epochs")
    if settings.deterministic:
        torch.set_num_threads(1)
    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)

    val_mask = dataset.folds == fold
    train_idx = np.flatnonzero(~val_mask)
    val_idx = np.flatnonzero(val_mask)
    if len(train_idx) == 0 or len(val_idx) == 0:
        raise TrainingError(f"fold {fold} leaves an empty train or validation split")

    model = build_model(genotype, dataset.feature_dims, len(dataset.class_names),
                        dropout=settings.dropout)
    optimizer = torch.optim.Adam(model.parameters(), lr=settings.learning_rate)
    val_modalities, val_labels = _tensors(dataset, val_idx)

    best_ce = float("inf")
    best_metrics: dict | None = None
    epochs_since_best = 0
    epochs_ran = 0

    for epoch in range(max_epochs):
        model.train()
        order = rng.permutation(len(train_idx))
        for start in range(0, len(order), settings.batch_size):
            batch_idx = train_idx[order[start: start + settings.batch_size]]
            modalities, labels = _tensors(dataset, batch_idx)
            optimizer.zero_grad()
            loss = _nll(model(modalities), labels)
            if not torch.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch + 1}")
            loss.backward()
            optimizer.step()
        epochs_ran = epoch + 1

        model.eval()
        with torch.no_grad():
            probs = model(val_modalities).numpy()
        report = metric_set(probs, val_labels.numpy())
        if report["ce"] < best_ce:
            best_ce = report["ce"]
            best_metrics = report
            epochs_since_best = 0
        else:
            epochs_since_best += 1
        if epochs_since_best >= patience:
            break

    converged = epochs_ran < max_epochs
    logger.info("trained %s/%s fold %d: best ce %.4f after %d epochs",
                genotype.layer_type, genotype.fusion, fold, best_ce, epochs_ran)
    return TrainOutcome(metrics=best_metrics, epochs_ran=epochs_ran,
                        converged=converged)
