"""Greedy local search from the compact corner of the space.

Starts at the minimal architecture, evaluates the full single-step
neighborhood of the incumbent each round, and moves to the best neighbor
while it strictly improves.  When no neighbor improves, the strategy
signals convergence and the engine falls back to uniform sampling.
"""

from __future__ import annotations

import logging

from ..errors import StrategyConverged
from ..space import Genotype, SearchSpaceDef, minimal_genotype, neighbors
from .base import SearchStrategy, TrialRecord

logger = logging.getLogger(__name__)


class HillClimb(SearchStrategy):
    name = "hillclimb"

    def __init__(self, space: SearchSpaceDef, seed: int,
                 step_sizes: dict[str, int] | None = None):
        super().__init__(space, seed)
        self.step_sizes = step_sizes
        self.incumbent: tuple[float, Genotype] | None = None
        self.frontier: list[Genotype] = []
        self.awaiting: list[Genotype] = []
        self.round_results: list[tuple[float, int, Genotype]] = []
        self._arrival = 0
        self._proposed_initial = False
        self.converged = False

    def _propose(self) -> Genotype:
        if self.converged:
            raise StrategyConverged("hill-climbing converged: no improving neighbor")
        if not self._proposed_initial:
            self._proposed_initial = True
            g = minimal_genotype(self.space)
            self.awaiting.append(g)
            return g
        if not self.frontier and not self.awaiting:
            self._resolve_round()
            if self.converged:
                raise StrategyConverged("hill-climbing converged: no improving neighbor")
        if not self.frontier:
            # Results for the current round are still outstanding (only
            # reachable with concurrent evaluation); nothing left to hand out.
            raise StrategyConverged("hill-climbing frontier exhausted while awaiting results")
        g = self.frontier.pop(0)
        self.awaiting.append(g)
        return g

    def _update(self, trial: TrialRecord, objective: float) -> None:
        if trial.genotype in self.awaiting:
            self.awaiting.remove(trial.genotype)
        self.round_results.append((objective, self._arrival, trial.genotype))
        self._arrival += 1

    def _resolve_round(self) -> None:
        if not self.round_results:
            self.converged = True
            return
        best_obj, _, best_g = min(self.round_results)
        if self.incumbent is None or best_obj < self.incumbent[0]:
            self.incumbent = (best_obj, best_g)
            self.frontier = neighbors(best_g, self.space, self.step_sizes)
            self.round_results = []
            if not self.frontier:
                logger.info("hill-climbing: incumbent has no neighbors, converged")
                self.converged = True
        else:
            logger.info("hill-climbing converged at objective %.6f", self.incumbent[0])
            self.converged = True
