"""Scoring of classifier predictions.

Cross-entropy is the proper scoring rule that steers the search (it keeps
improving as the confidence assigned to the true class grows, unlike
thresholded metrics); accuracy and macro precision/recall/F1 are reported
alongside it.  All percent-scaled metrics live in [0, 100].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

PROB_CLIP = 1e-12
ROW_SUM_TOL = 1e-6


@dataclass(frozen=True)
class PredictionBatch:
    """N predicted probability rows plus the true class indices."""

    probabilities: np.ndarray  # (N, C)
    labels: np.ndarray  # (N,)


@dataclass(frozen=True)
class MetricReport:
    cross_entropy: float
    accuracy: float
    precision_macro: float
    recall_macro: float
    f1_macro: float

    def to_dict(self) -> dict:
        return {
            "ce": self.cross_entropy,
            "accuracy": self.accuracy,
            "precision_macro": self.precision_macro,
            "recall_macro": self.recall_macro,
            "f1_macro": self.f1_macro,
        }

    @staticmethod
    def from_dict(d: dict) -> "MetricReport":
        return MetricReport(
            cross_entropy=float(d["ce"]),
            accuracy=float(d["accuracy"]),
            precision_macro=float(d["precision_macro"]),
            recall_macro=float(d["recall_macro"]),
            f1_macro=float(d["f1_macro"]),
        )


def _validated(batch: PredictionBatch) -> tuple[np.ndarray, np.ndarray]:
    probs = np.asarray(batch.probabilities, dtype=float)
    labels = np.asarray(batch.labels, dtype=int)
    if probs.ndim != 2:
        raise ValidationError(f"probabilities must be 2-D, got shape {probs.shape}")
    n, c = probs.shape
    if n < 1 or c < 2:
        raise ValidationError(f"need N >= 1 and C >= 2, got shape {probs.shape}")
    if labels.shape != (n,):
        raise ValidationError(f"labels shape {labels.shape} does not match N={n}")
    if labels.min() < 0 or labels.max() >= c:
        raise ValidationError("labels must lie in [0, C)")
    if probs.min() < -1e-9 or probs.max() > 1 + 1e-9:
        raise ValidationError("probabilities must lie in [0, 1]")
    row_sums = probs.sum(axis=1)
    bad = np.abs(row_sums - 1.0) > ROW_SUM_TOL
    if bad.any():
        i = int(np.argmax(bad))
        raise ValidationError(
            f"probability row {i} sums to {row_sums[i]:.8f}, expected 1 within {ROW_SUM_TOL}"
        )
    return probs, labels


def cross_entropy(batch: PredictionBatch) -> float:
    """Mean negative natural log of the probability assigned to the true
    class, with probabilities clipped to [1e-12, 1]."""
    probs, labels = _validated(batch)
    true_probs = probs[np.arange(len(labels)), labels]
    return float(np.mean(-np.log(np.clip(true_probs, PROB_CLIP, 1.0))))


def confusion_matrix(predictions: np.ndarray, labels: np.ndarray, num_classes: int) -> np.ndarray:
    """counts[i, j] = instances with true class i predicted as class j."""
    counts = np.zeros((num_classes, num_classes), dtype=int)
    for t, p in zip(labels, predictions):
        counts[t, p] += 1
    return counts


def classification_report(batch: PredictionBatch) -> MetricReport:
    """Argmax-based metrics: accuracy plus macro precision/recall/F1.

    Ties in a probability row resolve to the lowest class index.  Per-class
    precision/recall use the 0/0 -> 0 convention; macro averages run over
    the classes present in the labels or the predictions.  F1 per class is
    the harmonic mean of that class's precision and recall.
    """
    probs, labels = _validated(batch)
    predictions = np.argmax(probs, axis=1)
    n, c = probs.shape
    counts = confusion_matrix(predictions, labels, c)
    present = sorted(set(labels.tolist()) | set(predictions.tolist()))

    precisions, recalls, f1s = [], [], []
    for k in present:
        tp = counts[k, k]
        predicted = counts[:, k].sum()
        actual = counts[k, :].sum()
        prec = tp / predicted if predicted > 0 else 0.0
        rec = tp / actual if actual > 0 else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec > 0 else 0.0
        precisions.append(prec)
        recalls.append(rec)
        f1s.append(f1)

    return MetricReport(
        cross_entropy=cross_entropy(batch),
        accuracy=100.0 * float(np.mean(predictions == labels)),
        precision_macro=100.0 * float(np.mean(precisions)),
        recall_macro=100.0 * float(np.mean(recalls)),
        f1_macro=100.0 * float(np.mean(f1s)),
    )
