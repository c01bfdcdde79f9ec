"""Uniform random sampling, the no-prior baseline."""

from __future__ import annotations

from ..space import Genotype, sample_uniform
from .base import SearchStrategy, TrialRecord


class RandomSearch(SearchStrategy):
    name = "random"

    def _propose(self) -> Genotype:
        return sample_uniform(self.space, self.rng)

    def _update(self, trial: TrialRecord, objective: float) -> None:
        pass
