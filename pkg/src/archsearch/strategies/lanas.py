"""Latent-action tree search: recursive partition of the encoded space.

The tree splits the [0,1]^L encoding with axis-aligned thresholds.  Each
node tracks the visit count and the mean negated objective of the samples
routed through it; descent picks children by UCB1 over node values
normalized to [0,1] across the observed objective range.  A leaf splits
once it holds enough samples, on the single encoded dimension that best
separates its better half from its worse half.  Leaf proposals come from
rejection sampling against the path constraints.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..space import Genotype, SearchSpaceDef, encode, sample_uniform
from .base import SearchStrategy, TrialRecord

logger = logging.getLogger(__name__)

REJECTION_CAP = 200


def ucb1_score(v: float, n: int, total: float, c: float) -> float:
    """v + c * sqrt(ln(total) / n); unvisited nodes (n = 0) score +inf so
    they are explored first."""
    if n == 0:
        return float("inf")
    return v + c * math.sqrt(math.log(total) / n)


@dataclass
class TreeNode:
    visits: int = 0
    neg_objective_sum: float = 0.0
    samples: list[tuple[np.ndarray, float]] = field(default_factory=list)
    split_dim: int | None = None
    split_threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.split_dim is None

    @property
    def value(self) -> float:
        """Mean negated objective of the samples routed through the node."""
        return self.neg_objective_sum / self.visits if self.visits else 0.0


class LatentActionSearch(SearchStrategy):
    name = "lanas"

    def __init__(self, space: SearchSpaceDef, seed: int,
                 exploration: float = 0.5, leaf_capacity: int = 8):
        super().__init__(space, seed)
        self.exploration = exploration
        self.leaf_capacity = int(leaf_capacity)
        self.root = TreeNode()
        self._neg_min = float("inf")
        self._neg_max = float("-inf")

    # -- value normalization --------------------------------------------------

    def _normalized(self, value: float) -> float:
        if not math.isfinite(self._neg_min) or self._neg_max == self._neg_min:
            return 0.5
        return (value - self._neg_min) / (self._neg_max - self._neg_min)

    # -- proposal --------------------------------------------------------------

    def _propose(self) -> Genotype:
        constraints: list[tuple[int, float, bool]] = []  # (dim, threshold, go_left)
        node = self.root
        while not node.is_leaf:
            left_score = ucb1_score(self._normalized(node.left.value),
                                    node.left.visits, node.visits, self.exploration)
            right_score = ucb1_score(self._normalized(node.right.value),
                                     node.right.visits, node.visits, self.exploration)
            go_left = left_score >= right_score
            constraints.append((node.split_dim, node.split_threshold, go_left))
            node = node.left if go_left else node.right
        return self._sample_leaf(constraints)

    def _violations(self, vec: np.ndarray,
                    constraints: list[tuple[int, float, bool]]) -> int:
        count = 0
        for dim, threshold, go_left in constraints:
            on_left = vec[dim] <= threshold
            if on_left != go_left:
                count += 1
        return count

    def _sample_leaf(self, constraints: list[tuple[int, float, bool]]) -> Genotype:
        best_g, best_violations = None, None
        for _ in range(REJECTION_CAP):
            g = sample_uniform(self.space, self.rng)
            if not constraints:
                return g
            v = self._violations(encode(g, self.space).as_array(), constraints)
            if v == 0:
                return g
            if best_violations is None or v < best_violations:
                best_g, best_violations = g, v
        logger.info(
            "lanas: rejection cap %d exhausted, returning sample with %d "
            "constraint violations", REJECTION_CAP, best_violations,
        )
        return best_g

    # -- observation -------------------------------------------------------------

    def _update(self, trial: TrialRecord, objective: float) -> None:
        neg = -objective
        self._neg_min = min(self._neg_min, neg)
        self._neg_max = max(self._neg_max, neg)
        vec = encode(trial.genotype, self.space).as_array()
        node = self.root
        while True:
            node.visits += 1
            node.neg_objective_sum += neg
            if node.is_leaf:
                node.samples.append((vec, neg))
                self._maybe_split(node)
                return
            node = node.left if vec[node.split_dim] <= node.split_threshold else node.right

    def _maybe_split(self, node: TreeNode) -> None:
        if len(node.samples) < self.leaf_capacity:
            return
        xs = np.stack([v for v, _ in node.samples])
        negs = np.array([r for _, r in node.samples])
        order = np.argsort(-negs, kind="stable")  # better (higher neg) first
        n_good = int(math.ceil(len(negs) / 2))
        good_mask = np.zeros(len(negs), dtype=bool)
        good_mask[order[:n_good]] = True

        best = None  # (accuracy, -dim) so ties pick the lowest dimension
        for dim in range(xs.shape[1]):
            mean_good = xs[good_mask, dim].mean()
            mean_bad = xs[~good_mask, dim].mean()
            if mean_good == mean_bad:
                continue
            threshold = 0.5 * (mean_good + mean_bad)
            on_left = xs[:, dim] <= threshold
            if on_left.all() or (~on_left).all():
                continue
            good_goes_left = mean_good < mean_bad
            correct = np.sum(on_left[good_mask] == good_goes_left)
            correct += np.sum(on_left[~good_mask] != good_goes_left)
            candidate = (correct / len(negs), -dim, threshold)
            if best is None or candidate > best:
                best = candidate
        if best is None:
            return  # nothing separates the halves; stay a leaf for now
        _, neg_dim, threshold = best
        dim = -neg_dim
        node.split_dim = dim
        node.split_threshold = threshold
        node.left, node.right = TreeNode(), TreeNode()
        for vec, neg in node.samples:
            child = node.left if vec[dim] <= threshold else node.right
            child.visits += 1
            child.neg_objective_sum += neg
            child.samples.append((vec, neg))
        node.samples = []
