"""The eight multi-trial search strategies behind one propose/observe API."""

from __future__ import annotations

from ..space import SearchSpaceDef
from .base import SearchStrategy, TrialRecord
from .evolution import RegularizedEvolution
from .gp import GaussianProcessSearch, KernelParams, expected_improvement, gp_posterior
from .hill_climb import HillClimb
from .lanas import LatentActionSearch, ucb1_score
from .pso import ParticleSwarm
from .random_search import RandomSearch
from .rl import PolicyGradientSearch, log_policy_prob, policy_gradient
from .tpe import ParzenModel, TreeParzenSearch, density_ratio

STRATEGIES: dict[str, type[SearchStrategy]] = {
    cls.name: cls
    for cls in (
        RandomSearch,
        HillClimb,
        ParticleSwarm,
        RegularizedEvolution,
        GaussianProcessSearch,
        TreeParzenSearch,
        PolicyGradientSearch,
        LatentActionSearch,
    )
}


def make_strategy(name: str, space: SearchSpaceDef, seed: int, **params) -> SearchStrategy:
    if name not in STRATEGIES:
        raise KeyError(f"unknown strategy {name!r}; available: {sorted(STRATEGIES)}")
    return STRATEGIES[name](space, seed, **params)


__all__ = [
    "STRATEGIES",
    "SearchStrategy",
    "TrialRecord",
    "KernelParams",
    "ParzenModel",
    "make_strategy",
    "gp_posterior",
    "expected_improvement",
    "ucb1_score",
    "density_ratio",
    "log_policy_prob",
    "policy_gradient",
    "RandomSearch",
    "HillClimb",
    "ParticleSwarm",
    "RegularizedEvolution",
    "GaussianProcessSearch",
    "TreeParzenSearch",
    "PolicyGradientSearch",
    "LatentActionSearch",
]
