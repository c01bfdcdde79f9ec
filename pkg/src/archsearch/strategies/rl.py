"""Policy-gradient architecture sampling.

The controller keeps one independent categorical distribution (a logit
vector) per search dimension; numeric dimensions enumerate their integer
range.  Conditional dimensions are masked: they are only sampled, and only
receive gradient, when active under the sampled layer type and fusion mode.
REINFORCE with an exponential-moving-average baseline updates the logits
from the negated objective.
"""

from __future__ import annotations

from collections import defaultdict, deque

import numpy as np

from ..space import (
    ClassificationHead,
    Genotype,
    SearchSpaceDef,
    SequenceBlock,
    branch_count,
    genotype_key,
    logical_dims,
)
from .base import SearchStrategy, TrialRecord


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - np.max(logits)
    e = np.exp(z)
    return e / e.sum()


def log_policy_prob(logits: dict[str, np.ndarray], action: dict[str, int]) -> float:
    """log pi(action): sum of per-dimension log-softmax terms over the
    dimensions the action touched."""
    total = 0.0
    for name, choice in action.items():
        z = logits[name] - np.max(logits[name])
        total += float(z[choice] - np.log(np.exp(z).sum()))
    return total


def policy_gradient(logits: dict[str, np.ndarray],
                    action: dict[str, int]) -> dict[str, np.ndarray]:
    """d log pi(action) / d logits, per dimension; dimensions not in the
    action get zero gradient."""
    grads: dict[str, np.ndarray] = {}
    for name, vec in logits.items():
        if name in action:
            g = -softmax(vec)
            g[action[name]] += 1.0
        else:
            g = np.zeros_like(vec)
        grads[name] = g
    return grads


class PolicyGradientSearch(SearchStrategy):
    name = "rl"

    def __init__(self, space: SearchSpaceDef, seed: int,
                 learning_rate: float = 0.05, baseline_decay: float = 0.9):
        super().__init__(space, seed)
        self.learning_rate = learning_rate
        self.baseline_decay = baseline_decay
        self.baseline = 0.0
        self.logits: dict[str, np.ndarray] = {}
        for dim in logical_dims(space):
            n = len(dim.choices) if dim.kind == "cat" else dim.rng.size
            self.logits[dim.name] = np.zeros(n)
        self._pending: dict[str, deque[dict[str, int]]] = defaultdict(deque)

    def _sample_dim(self, name: str) -> int:
        probs = softmax(self.logits[name])
        return int(self.rng.choice(len(probs), p=probs))

    def _propose(self) -> Genotype:
        space = self.space
        action: dict[str, int] = {}
        layer_type = space.seq_layer_types[self._sample_dim("layer_type")]
        action["layer_type"] = space.seq_layer_types.index(layer_type)
        if space.multimodal:
            fusion = space.fusion_modes[self._sample_dim("fusion")]
            action["fusion"] = space.fusion_modes.index(fusion)
        else:
            fusion = "none"
        is_tst = layer_type == "TST"
        branches = []
        for i in range(branch_count(fusion, space.num_modalities)):
            layers_idx = self._sample_dim(f"block{i}.num_layers")
            units_idx = self._sample_dim(f"block{i}.num_units")
            action[f"block{i}.num_layers"] = layers_idx
            action[f"block{i}.num_units"] = units_idx
            ff = heads = None
            if is_tst:
                ff_idx = self._sample_dim(f"block{i}.ff_dim")
                heads_idx = self._sample_dim(f"block{i}.attention_heads")
                action[f"block{i}.ff_dim"] = ff_idx
                action[f"block{i}.attention_heads"] = heads_idx
                ff = space.tst_ff_dim.lo + ff_idx
                heads = space.tst_attention_heads.lo + heads_idx
            branches.append(SequenceBlock(
                num_layers=space.seq_num_layers.lo + layers_idx,
                num_units=space.seq_num_units.lo + units_idx,
                ff_dim=ff,
                attention_heads=heads,
            ))
        hl_idx = self._sample_dim("head.num_layers")
        hu_idx = self._sample_dim("head.num_units")
        action["head.num_layers"] = hl_idx
        action["head.num_units"] = hu_idx
        head = ClassificationHead(space.head_num_layers.lo + hl_idx,
                                  space.head_num_units.lo + hu_idx)
        g = Genotype(layer_type, fusion, tuple(branches), head)
        self._pending[genotype_key(g)].append(action)
        return g

    def _update(self, trial: TrialRecord, objective: float) -> None:
        queue = self._pending.get(genotype_key(trial.genotype))
        if not queue:
            return  # injected trial: the policy never produced it, no update
        action = queue.popleft()
        self.reinforce_update(action, reward=-objective)

    def reinforce_update(self, action: dict[str, int], reward: float) -> None:
        advantage = reward - self.baseline
        grads = policy_gradient(self.logits, action)
        for name, grad in grads.items():
            self.logits[name] += self.learning_rate * advantage * grad
        self.baseline = (self.baseline_decay * self.baseline
                         + (1.0 - self.baseline_decay) * reward)
