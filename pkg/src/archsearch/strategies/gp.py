"""Gaussian-process surrogate search with expected-improvement acquisition.

The kernel is a squared exponential over the genotype pseudometric,
k(x, x') = signal_var * exp(-d(x, x')^2 / (2 * length_scale^2)), the prior
mean is the mean of the observed objectives, and the posterior solve uses a
Cholesky factorization with 1e-9 jitter.  Proposals maximize expected
improvement over a candidate set of uniform samples plus the incumbent's
neighbors.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.stats import norm

from ..errors import NumericalError, ValidationError
from ..space import (
    EncodedVector,
    Genotype,
    SearchSpaceDef,
    decode,
    distance_matrix,
    neighbors,
    sample_uniform,
)
from .base import SearchStrategy, TrialRecord

logger = logging.getLogger(__name__)

JITTER = 1e-9


@dataclass(frozen=True)
class KernelParams:
    length_scale: float = 0.2
    signal_var: float = 1.0
    noise_var: float = 1e-6

    def validate(self) -> None:
        if self.length_scale <= 0 or self.signal_var <= 0 or self.noise_var < 0:
            raise ValidationError(
                "kernel requires length_scale > 0, signal_var > 0, noise_var >= 0"
            )


def _kernel_matrix(d: np.ndarray, kernel: KernelParams) -> np.ndarray:
    return kernel.signal_var * np.exp(-(d ** 2) / (2.0 * kernel.length_scale ** 2))


def _posterior_batch(
    train: list[Genotype],
    y: np.ndarray,
    queries: list[Genotype],
    kernel: KernelParams,
    space: SearchSpaceDef,
    escalate_jitter: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Posterior (means, variances) at each query genotype.

    The squared-exponential kernel over the genotype pseudometric is not
    guaranteed positive definite, so the strategy path retries with larger
    jitter instead of dying mid-run; the plain path surfaces the failure.
    """
    kernel.validate()
    n = len(train)
    prior_mean = float(np.mean(y))
    base = _kernel_matrix(distance_matrix(train, train, space), kernel)

    def factorize(jitter: float):
        k_train = base.copy()
        k_train[np.diag_indices(n)] += kernel.noise_var + jitter
        return cho_factor(k_train, lower=True)

    try:
        factor = factorize(JITTER)
    except np.linalg.LinAlgError as exc:
        if not escalate_jitter:
            raise NumericalError(f"kernel matrix singular after jitter: {exc}") from exc
        # The squared-exponential of this pseudometric is not guaranteed
        # positive definite; shift the diagonal past the most negative
        # eigenvalue so the strategy can keep searching.
        eig_min = float(np.linalg.eigvalsh(base).min())
        shift = max(0.0, -eig_min) + JITTER
        logger.info("gp: kernel matrix indefinite (min eigenvalue %g), "
                    "shifting diagonal by %g", eig_min, shift)
        try:
            factor = factorize(shift)
        except np.linalg.LinAlgError as exc2:
            raise NumericalError(
                f"kernel matrix singular after diagonal repair: {exc2}") from exc2
    alpha = cho_solve(factor, y - prior_mean)
    k_star = _kernel_matrix(distance_matrix(queries, train, space), kernel)
    means = prior_mean + k_star @ alpha
    v = cho_solve(factor, k_star.T)
    variances = kernel.signal_var - np.sum(k_star.T * v, axis=0)
    return means, np.maximum(variances, 0.0)


def gp_posterior(
    history: list[tuple[EncodedVector, float]],
    query: EncodedVector,
    kernel: KernelParams,
    space: SearchSpaceDef,
) -> tuple[float, float]:
    """GP regression posterior (mean, variance) at one encoded query point."""
    if not history:
        raise ValidationError("gp_posterior requires a non-empty history")
    train = [decode(v, space) for v, _ in history]
    y = np.array([obj for _, obj in history], dtype=float)
    means, variances = _posterior_batch(train, y, [decode(query, space)], kernel, space)
    return float(means[0]), float(variances[0])


def expected_improvement(mean: float, variance: float, best_so_far: float) -> float:
    """EI for minimization; collapses to max(0, best - mean) at zero variance."""
    if variance < 0:
        raise ValidationError("variance must be >= 0")
    sigma = math.sqrt(variance)
    if sigma == 0.0:
        return max(0.0, best_so_far - mean)
    z = (best_so_far - mean) / sigma
    return float((best_so_far - mean) * norm.cdf(z) + sigma * norm.pdf(z))


class GaussianProcessSearch(SearchStrategy):
    name = "gp"

    def __init__(self, space: SearchSpaceDef, seed: int,
                 kernel: KernelParams | None = None, startup_trials: int = 4,
                 num_candidates: int = 512):
        super().__init__(space, seed)
        self.kernel = kernel or KernelParams(noise_var=1e-4)
        self.kernel.validate()
        self.startup_trials = int(startup_trials)
        self.num_candidates = int(num_candidates)
        self.history: list[tuple[Genotype, float]] = []
        self._pending: list[Genotype] = []

    def note_pending(self, genotype: Genotype) -> None:
        self._pending.append(genotype)

    def _training_set(self) -> tuple[list[Genotype], np.ndarray]:
        # Constant-liar convention: in-flight candidates enter the fit at the
        # current best objective so batched proposals spread out.
        train = [g for g, _ in self.history]
        y = [obj for _, obj in self.history]
        if self._pending and y:
            liar = min(y)
            for g in self._pending:
                train.append(g)
                y.append(liar)
        return train, np.array(y, dtype=float)

    def _propose(self) -> Genotype:
        if len(self.history) < self.startup_trials:
            return sample_uniform(self.space, self.rng)
        candidates = [sample_uniform(self.space, self.rng)
                      for _ in range(self.num_candidates)]
        if self.best is not None:
            candidates.extend(neighbors(self.best[1], self.space))
        train, y = self._training_set()
        means, variances = _posterior_batch(train, y, candidates, self.kernel,
                                            self.space, escalate_jitter=True)
        best = float(np.min(y))
        sigmas = np.sqrt(variances)
        z = np.where(sigmas > 0, (best - means) / np.where(sigmas > 0, sigmas, 1.0), 0.0)
        ei = np.where(
            sigmas > 0,
            (best - means) * norm.cdf(z) + sigmas * norm.pdf(z),
            np.maximum(0.0, best - means),
        )
        return candidates[int(np.argmax(ei))]

    def _update(self, trial: TrialRecord, objective: float) -> None:
        if trial.genotype in self._pending:
            self._pending.remove(trial.genotype)
        self.history.append((trial.genotype, objective))
