"""Adaptive spectral thresholding: return every item above ``beta`` and none below ``alpha``."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from ._seeding import rng_for
from .sampling import Estimator, Sampler, spectral_estimator
from .spectral import EstimatorMethod, SpectralConfig, confidence_half_width

HalfWidth = Callable[[int, int], float]


@dataclass(frozen=True)
class ThresholdConfig:
    """Band ``[alpha, beta]`` in the units of ``u``.

    ``half_width(n_rows, n_cols)`` overrides the uniform interval; by default
    it is :func:`confidence_half_width` in its all-items form.
    """

    alpha: float
    beta: float
    spectral: SpectralConfig = field(default_factory=SpectralConfig)
    estimator: EstimatorMethod = EstimatorMethod.SPLIT_SVD
    half_width: Optional[HalfWidth] = None
    seed: int = 0

    def __post_init__(self):
        if not self.beta > self.alpha:
            raise ValueError("need beta > alpha")

    @property
    def gap(self) -> float:
        return self.beta - self.alpha

    @property
    def c4(self) -> float:
        return self.spectral.c4_scaled

    def interval(self, n_rows: int, n_cols: int) -> float:
        if self.half_width is not None:
            return float(self.half_width(n_rows, n_cols))
        return confidence_half_width(n_rows, n_cols, config=self.spectral, all_items=True)

    def cleanup_workers(self, n: int) -> float:
        """``12 log n / ((beta - alpha)^2 C4')``; also the borderline-set size."""
        return 12.0 * math.log(n) / (self.gap**2 * self.c4)

    def kappa(self, n: int) -> int:
        return math.floor(self.cleanup_workers(n))

    def initial_workers(self, n: int) -> float:
        """``t_{-1} = 12 log n / C4'``."""
        return 12.0 * math.log(n) / self.c4

    def rounds(self) -> int:
        if self.gap >= 1.0:
            return 0
        return math.ceil(math.log2(1.0 / self.gap) - 1e-12)

    def default_estimator(self) -> Estimator:
        cfg = SpectralConfig(**{**self.spectral.__dict__, "v_hat_method": self.estimator})
        return spectral_estimator(cfg)


@dataclass
class ThresholdState:
    round: int
    active: np.ndarray
    accepted: np.ndarray
    workers: float
    kappa: int
    half_width: float


def gamma_gap(u_i: float, alpha: float, beta: float) -> float:
    """Distance that decides how hard item ``u_i`` is to classify."""
    if not alpha < beta:
        raise ValueError("need alpha < beta")
    if u_i > beta:
        return u_i - alpha
    if u_i >= alpha:
        return beta - alpha
    return beta - u_i


def regime_ok(n: int, config: ThresholdConfig) -> bool:
    return config.gap > math.sqrt(12.0 * math.log(n) / (config.c4 * n))


def _warn_regime(n, config):
    if not regime_ok(n, config):
        warnings.warn(
            f"beta - alpha = {config.gap:.4g} is below sqrt(12 log n / (C4' n)) for n={n}",
            stacklevel=3,
        )


def adaptive_threshold(
    sampler: Sampler,
    config: ThresholdConfig,
    estimator: Optional[Estimator] = None,
    history: Optional[List[ThresholdState]] = None,
) -> np.ndarray:
    """Sorted ids of the items the adaptive thresholding bandit accepts.

    Round ``r`` asks ``ceil(4^(r+1) t_{-1})`` fresh workers about the active
    items, accepts ``u_hat - C > alpha`` and rejects ``u_hat + C < beta``.
    Once fewer than ``kappa = floor(12 log n / ((beta-alpha)^2 C4'))`` items
    remain active the set is padded with uniformly chosen items classified in that round and
    settled in one clean-up batch.
    """
    n = sampler.n_items
    if n < 2:
        raise ValueError("need at least two items")
    _warn_regime(n, config)
    est = estimator or config.default_estimator()
    rng = rng_for(config.seed, 0x5448)
    target = config.cleanup_workers(n)
    kappa = config.kappa(n)

    active = np.arange(n)
    accepted = np.zeros(0, dtype=np.int64)
    cleanup_set = active
    t_prev = config.initial_workers(n)
    for r in range(config.rounds()):
        t_real = 4.0 * t_prev
        t_prev = t_real
        cols = math.ceil(t_real)
        batch = sampler.draw(active, cols)
        u_hat = est(batch)
        ci = config.interval(active.size, cols)
        acc = active[u_hat - ci > config.alpha]
        rej = active[u_hat + ci < config.beta]
        decided = np.union1d(acc, rej)
        remaining = np.setdiff1d(active, decided)
        accepted = np.union1d(accepted, acc)
        if history is not None:
            history.append(ThresholdState(r, active.copy(), accepted.copy(), t_real, kappa, ci))
        active = remaining
        cleanup_set = active
        if active.size < kappa:
            n_pad = min(max(kappa - active.size, 0), decided.size)
            pad = rng.choice(decided, size=n_pad, replace=False) if n_pad else decided[:0]
            cleanup_set = np.union1d(active, pad)
            break
        if active.size == 0:
            break

    if cleanup_set.size:
        t_c = math.ceil(target)
        batch = sampler.draw(cleanup_set, t_c)
        u_hat = est(batch)
        ci = config.interval(cleanup_set.size, t_c)
        accepted = np.union1d(accepted, cleanup_set[u_hat - ci > config.alpha])
    return accepted


def nonadaptive_threshold(
    sampler: Sampler, config: ThresholdConfig, estimator: Optional[Estimator] = None
) -> np.ndarray:
    """One batch of ``ceil(12 log n / ((beta-alpha)^2 C4'))`` workers; keep ``u_hat > (alpha+beta)/2``."""
    n = sampler.n_items
    if n < 2:
        raise ValueError("need at least two items")
    _warn_regime(n, config)
    est = estimator or config.default_estimator()
    items = np.arange(n)
    batch = sampler.draw(items, math.ceil(config.cleanup_workers(n)))
    u_hat = est(batch)
    return items[u_hat > 0.5 * (config.alpha + config.beta)]


def pull_bound(u, config: ThresholdConfig) -> float:
    """Budget bound of the adaptive algorithm for true values ``u``.

    ``2 (12 log n / ((beta-alpha)^2 C4'))^2 + sum over the n - kappa easiest
    items of 32 log n / (C4' Gamma_i^2)``.
    """
    u = np.asarray(u, dtype=float)
    n = u.size
    gammas = np.sort([gamma_gap(x, config.alpha, config.beta) for x in u])
    kappa = config.kappa(n)
    log_n = math.log(n)
    head = 2.0 * config.cleanup_workers(n) ** 2
    tail = float(np.sum(32.0 * log_n / (config.c4 * gammas[kappa:] ** 2)))
    return head + tail
