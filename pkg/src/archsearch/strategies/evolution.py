"""Regularized (aging) evolution: tournament selection plus single-dimension
mutation, with the oldest population member evicted regardless of fitness."""

from __future__ import annotations

from collections import deque

from ..space import Genotype, SearchSpaceDef, mutate, sample_uniform
from .base import SearchStrategy, TrialRecord


class RegularizedEvolution(SearchStrategy):
    name = "evolution"

    def __init__(self, space: SearchSpaceDef, seed: int,
                 population_size: int = 10, sample_size: int = 3):
        super().__init__(space, seed)
        self.population_size = int(population_size)
        self.sample_size = int(sample_size)
        self.population: deque[tuple[Genotype, float]] = deque(maxlen=self.population_size)
        self._observed_count = 0

    def _propose(self) -> Genotype:
        if self._observed_count < self.population_size or not self.population:
            return sample_uniform(self.space, self.rng)
        k = min(self.sample_size, len(self.population))
        idxs = self.rng.choice(len(self.population), size=k, replace=False)
        contenders = [self.population[int(i)] for i in sorted(idxs)]
        parent = min(contenders, key=lambda entry: entry[1])[0]
        return mutate(parent, self.space, self.rng)

    def _update(self, trial: TrialRecord, objective: float) -> None:
        self.population.append((trial.genotype, objective))
        self._observed_count += 1
