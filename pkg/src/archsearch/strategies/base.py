"""Shared propose/observe interface for the search strategies."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from ..metrics import MetricReport
from ..space import Genotype, SearchSpaceDef, genotype_from_dict, genotype_to_dict

logger = logging.getLogger(__name__)

# A failed trial enters a strategy's bookkeeping at the worst observed
# objective plus this fraction of the observed range, so failures repel the
# search without destabilizing surrogate fits.
FAILURE_PENALTY_FRACTION = 0.10
# Objective charged to a failure observed before any successful trial.
FAILURE_DEFAULT_OBJECTIVE = 1.0


@dataclass(frozen=True)
class TrialRecord:
    """One propose -> evaluate -> observe iteration."""

    trial_id: int
    genotype: Genotype
    objective: float
    metrics: MetricReport
    flops: int
    seed: int
    status: str  # ok | failed | timeout
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        """Deterministic log payload; wall_time intentionally excluded so
        identical runs produce bit-identical logs."""
        return {
            "trial_id": self.trial_id,
            "genotype": genotype_to_dict(self.genotype),
            "objective": self.objective,
            "metrics": self.metrics.to_dict(),
            "flops": self.flops,
            "seed": self.seed,
            "status": self.status,
        }

    @staticmethod
    def from_dict(d: dict) -> "TrialRecord":
        return TrialRecord(
            trial_id=int(d["trial_id"]),
            genotype=genotype_from_dict(d["genotype"]),
            objective=float(d["objective"]),
            metrics=MetricReport.from_dict(d["metrics"]),
            flops=int(d["flops"]),
            seed=int(d["seed"]),
            status=str(d["status"]),
        )


class SearchStrategy:
    """Base class: owns the rng, duplicate-id rejection and the failed-trial
    objective substitution.  Subclasses implement _propose / _update.

    propose/observe are serialized by the engine scheduler (single-writer);
    observations may arrive out of proposal order and are accepted.
    """

    name = "base"

    def __init__(self, space: SearchSpaceDef, seed: int):
        self.space = space
        self.seed = int(seed)
        self.rng = np.random.default_rng(self.seed)
        self.observed_ids: set[int] = set()
        self.ok_objectives: list[float] = []
        self.best: tuple[float, Genotype] | None = None

    # -- public interface --------------------------------------------------

    def propose(self) -> Genotype:
        return self._propose()

    def observe(self, trial: TrialRecord) -> None:
        if trial.trial_id in self.observed_ids:
            raise ValidationError(f"duplicate trial_id {trial.trial_id}")
        self.observed_ids.add(trial.trial_id)
        objective = self.effective_objective(trial)
        if trial.status == "ok":
            self.ok_objectives.append(trial.objective)
            if self.best is None or trial.objective < self.best[0]:
                self.best = (trial.objective, trial.genotype)
        self._update(trial, objective)

    def effective_objective(self, trial: TrialRecord) -> float:
        if trial.status == "ok":
            return trial.objective
        if not self.ok_objectives:
            return FAILURE_DEFAULT_OBJECTIVE
        worst = max(self.ok_objectives)
        spread = worst - min(self.ok_objectives)
        return worst + FAILURE_PENALTY_FRACTION * spread

    def note_pending(self, genotype: Genotype) -> None:
        """Hook for batched proposing (constant-liar in GP/TPE); default no-op."""

    # -- subclass hooks ------------------------------------------------------

    def _propose(self) -> Genotype:
        raise NotImplementedError

    def _update(self, trial: TrialRecord, objective: float) -> None:
        raise NotImplementedError
