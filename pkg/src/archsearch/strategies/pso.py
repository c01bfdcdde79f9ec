"""Particle swarm optimization over the encoded vector space.

Particles live in [0,1]^L (the fixed-length encoding) and decode to
genotypes on evaluation.  Each particle moves when its evaluation is
observed: v <- w*v + c1*r1*(pbest - x) + c2*r2*(gbest - x) with scalar
stochastic coefficients r1, r2, velocities clamped per dimension and
positions clipped back into the unit cube.
"""

from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass

import numpy as np

from ..space import Genotype, SearchSpaceDef, decode, encode, genotype_key, sample_uniform
from .base import SearchStrategy, TrialRecord


@dataclass
class Particle:
    position: np.ndarray
    velocity: np.ndarray
    best_position: np.ndarray | None = None
    best_objective: float = float("inf")


class ParticleSwarm(SearchStrategy):
    name = "pso"

    def __init__(self, space: SearchSpaceDef, seed: int, num_particles: int = 8,
                 inertia: float = 0.729, cognitive: float = 1.49445,
                 social: float = 1.49445, velocity_clamp: float = 0.25):
        super().__init__(space, seed)
        self.inertia = inertia
        self.cognitive = cognitive
        self.social = social
        self.velocity_clamp = velocity_clamp
        self.particles = []
        for _ in range(num_particles):
            pos = encode(sample_uniform(space, self.rng), space).as_array()
            self.particles.append(Particle(position=pos, velocity=np.zeros_like(pos)))
        self.global_best_position: np.ndarray | None = None
        self.global_best_objective = float("inf")
        self._cursor = 0
        # proposal bookkeeping: genotype key -> particle indices, FIFO per key
        self._pending: dict[str, deque[int]] = defaultdict(deque)

    def _propose(self) -> Genotype:
        idx = self._cursor % len(self.particles)
        self._cursor += 1
        g = decode(self.particles[idx].position, self.space)
        self._pending[genotype_key(g)].append(idx)
        return g

    def _update(self, trial: TrialRecord, objective: float) -> None:
        if objective < self.global_best_objective:
            self.global_best_objective = objective
            self.global_best_position = encode(trial.genotype, self.space).as_array()
        queue = self._pending.get(genotype_key(trial.genotype))
        if not queue:
            return  # injected observation: global best updated, no particle to move
        idx = queue.popleft()
        p = self.particles[idx]
        if objective < p.best_objective:
            p.best_objective = objective
            p.best_position = p.position.copy()
        self._move(p)

    def _move(self, p: Particle) -> None:
        r1 = float(self.rng.random())
        r2 = float(self.rng.random())
        pbest = p.best_position if p.best_position is not None else p.position
        gbest = (self.global_best_position
                 if self.global_best_position is not None else p.position)
        v = (self.inertia * p.velocity
             + self.cognitive * r1 * (pbest - p.position)
             + self.social * r2 * (gbest - p.position))
        np.clip(v, -self.velocity_clamp, self.velocity_clamp, out=v)
        p.velocity = v
        p.position = np.clip(p.position + v, 0.0, 1.0)
