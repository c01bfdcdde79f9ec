"""Validation metrics, matching the engine's conventions bit for bit:
natural-log cross-entropy with probabilities clipped at 1e-12, argmax
predictions with ties to the lowest index, macro averages over the classes
present in labels or predictions, 0/0 treated as 0."""

from __future__ import annotations

import numpy as np

PROB_CLIP = 1e-12


def cross_entropy(probs: np.ndarray, labels: np.ndarray) -> float:
    true_probs = probs[np.arange(len(labels)), labels]
    return float(np.mean(-np.log(np.clip(true_probs, PROB_CLIP, 1.0))))


def metric_set(probs: np.ndarray, labels: np.ndarray) -> dict:
    """The protocol's metric dictionary for one validation batch."""
    preds = np.argmax(probs, axis=1)
    present = sorted(set(labels.tolist()) | set(preds.tolist()))
    precisions, recalls, f1s = [], [], []
    for k in present:
        tp = int(np.sum((preds == k) & (labels == k)))
        predicted = int(np.sum(preds == k))
        actual = int(np.sum(labels == k))
        prec = tp / predicted if predicted else 0.0
        rec = tp / actual if actual else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        precisions.append(prec)
        recalls.append(rec)
        f1s.append(f1)
    return {
        "ce": cross_entropy(probs, labels),
        "accuracy": 100.0 * float(np.mean(preds == labels)),
        "precision_macro": 100.0 * float(np.mean(precisions)),
        "recall_macro": 100.0 * float(np.mean(recalls)),
        "f1_macro": 100.0 * float(np.mean(f1s)),
    }
