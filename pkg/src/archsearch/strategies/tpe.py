"""Tree-structured Parzen estimator.

History splits at the gamma-quantile of observed objectives into a good
group (y < y*) and the rest; independent per-dimension Parzen models l and
g are fit on each group (Gaussian kernels on normalized numeric dimensions
with a Scott's-rule bandwidth floored at 0.05, smoothed categorical
frequencies with pseudo-count 1).  New candidates are drawn from l and the
one maximizing l/g is proposed.  Inactive conditional dimensions enter the
models through the 0.5 sentinel, mirroring the vector encoding, so no
dimension is silently ignored.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from ..space import (
    ClassificationHead,
    DimInfo,
    Genotype,
    SearchSpaceDef,
    SequenceBlock,
    branch_count,
    denormalize_int,
    dim_feature_matrix,
    logical_dims,
    sample_uniform,
)
from .base import SearchStrategy, TrialRecord

logger = logging.getLogger(__name__)

BANDWIDTH_FLOOR = 0.05


@dataclass(frozen=True)
class ParzenNumeric:
    centers: np.ndarray
    bandwidth: float

    def pdf(self, x: float) -> float:
        z = (x - self.centers) / self.bandwidth
        dens = np.exp(-0.5 * z * z) / (self.bandwidth * math.sqrt(2.0 * math.pi))
        return float(np.mean(dens))

    def sample(self, rng: np.random.Generator) -> float:
        center = self.centers[int(rng.integers(len(self.centers)))]
        return float(np.clip(rng.normal(center, self.bandwidth), 0.0, 1.0))


@dataclass(frozen=True)
class ParzenCategorical:
    probs: np.ndarray

    def pdf(self, code: float) -> float:
        return float(self.probs[int(code)])

    def sample(self, rng: np.random.Generator) -> int:
        return int(rng.choice(len(self.probs), p=self.probs))


class ParzenModel:
    """Product of independent per-dimension densities over the sentinel-filled
    normalized dimension values of a genotype."""

    def __init__(self, dims: tuple[DimInfo, ...], components: list):
        self.dims = dims
        self.components = components

    @staticmethod
    def fit(genotypes: list[Genotype], space: SearchSpaceDef,
            bandwidth_floor: float = BANDWIDTH_FLOOR) -> "ParzenModel":
        dims = logical_dims(space)
        values, _, _ = dim_feature_matrix(genotypes, space)
        n = len(genotypes)
        components = []
        for j, dim in enumerate(dims):
            col = values[:, j]
            if dim.kind == "cat":
                k = len(dim.choices)
                counts = np.bincount(col.astype(int), minlength=k).astype(float)
                components.append(ParzenCategorical(probs=(counts + 1.0) / (n + k)))
            else:
                bw = max(bandwidth_floor, float(np.std(col)) * n ** (-0.2))
                components.append(ParzenNumeric(centers=col.copy(), bandwidth=bw))
        return ParzenModel(dims, components)

    def pdf(self, g: Genotype, space: SearchSpaceDef) -> float:
        values, _, _ = dim_feature_matrix([g], space)
        out = 1.0
        for j, comp in enumerate(self.components):
            out *= comp.pdf(values[0, j])
        return out

    def sample(self, rng: np.random.Generator, space: SearchSpaceDef) -> Genotype:
        drawn = {dim.name: comp.sample(rng) for dim, comp in zip(self.dims, self.components)}
        layer_type = space.seq_layer_types[int(drawn["layer_type"])]
        fusion = (space.fusion_modes[int(drawn["fusion"])]
                  if space.multimodal else "none")
        is_tst = layer_type == "TST"
        branches = []
        for i in range(branch_count(fusion, space.num_modalities)):
            branches.append(SequenceBlock(
                num_layers=denormalize_int(drawn[f"block{i}.num_layers"], space.seq_num_layers),
                num_units=denormalize_int(drawn[f"block{i}.num_units"], space.seq_num_units),
                ff_dim=(denormalize_int(drawn[f"block{i}.ff_dim"], space.tst_ff_dim)
                        if is_tst else None),
                attention_heads=(
                    denormalize_int(drawn[f"block{i}.attention_heads"],
                                    space.tst_attention_heads)
                    if is_tst else None),
            ))
        head = ClassificationHead(
            num_layers=denormalize_int(drawn["head.num_layers"], space.head_num_layers),
            num_units=denormalize_int(drawn["head.num_units"], space.head_num_units),
        )
        return Genotype(layer_type, fusion, tuple(branches), head)


def density_ratio(good: ParzenModel, rest: ParzenModel, g: Genotype,
                  space: SearchSpaceDef) -> float:
    """l(theta) / g(theta) for one genotype."""
    return good.pdf(g, space) / rest.pdf(g, space)


def split_history(objectives: np.ndarray, gamma: float) -> tuple[np.ndarray, float]:
    """Boolean good-group mask (y < gamma-quantile) and the threshold."""
    threshold = float(np.quantile(objectives, gamma))
    return objectives < threshold, threshold


class TreeParzenSearch(SearchStrategy):
    name = "tpe"

    def __init__(self, space: SearchSpaceDef, seed: int, gamma: float = 0.25,
                 num_candidates: int = 24, startup_trials: int = 10,
                 bandwidth_floor: float = BANDWIDTH_FLOOR):
        super().__init__(space, seed)
        self.gamma = gamma
        self.num_candidates = int(num_candidates)
        self.startup_trials = max(4, int(startup_trials))
        self.bandwidth_floor = bandwidth_floor
        self.history: list[tuple[Genotype, float]] = []
        self._pending: list[Genotype] = []

    def note_pending(self, genotype: Genotype) -> None:
        self._pending.append(genotype)

    def _propose(self) -> Genotype:
        entries = list(self.history)
        if self._pending and entries:
            liar = min(obj for _, obj in entries)
            entries.extend((g, liar) for g in self._pending)
        if len(entries) < self.startup_trials:
            return sample_uniform(self.space, self.rng)
        objectives = np.array([obj for _, obj in entries])
        good_mask, _ = split_history(objectives, self.gamma)
        good = [g for (g, _), keep in zip(entries, good_mask) if keep]
        rest = [g for (g, _), keep in zip(entries, good_mask) if not keep]
        if not good or not rest:
            logger.info("tpe: degenerate objective split, falling back to uniform sampling")
            return sample_uniform(self.space, self.rng)
        l_model = ParzenModel.fit(good, self.space, self.bandwidth_floor)
        g_model = ParzenModel.fit(rest, self.space, self.bandwidth_floor)
        candidates = [l_model.sample(self.rng, self.space)
                      for _ in range(self.num_candidates)]
        scores = [density_ratio(l_model, g_model, c, self.space) for c in candidates]
        return candidates[int(np.argmax(scores))]

    def _update(self, trial: TrialRecord, objective: float) -> None:
        if trial.genotype in self._pending:
            self._pending.remove(trial.genotype)
        self.history.append((trial.genotype, objective))
