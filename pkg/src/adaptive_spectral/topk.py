"""Adaptive spectral top-k identification (sequential halving) and its uniform baseline."""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .sampling import Batch, Estimator, Sampler, spectral_estimator
from .spectral import EstimatorMethod, SpectralConfig


class Mode(enum.Enum):
    THEORY = "theory"
    PRACTICAL = "practical"


class BudgetTooSmallError(RuntimeError):
    pass


@dataclass(frozen=True)
class TopKConfig:
    T: int
    k: int
    mode: Mode = Mode.THEORY
    m_max: Optional[int] = None
    reuse_samples: Optional[bool] = None
    estimator: Optional[EstimatorMethod] = None
    spectral: SpectralConfig = field(default_factory=SpectralConfig)

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.T < 1:
            raise ValueError("budget T must be >= 1")
        if self.m_max is not None and self.m_max < 1:
            raise ValueError("m_max must be >= 1")
        practical = self.mode is Mode.PRACTICAL
        if self.reuse_samples is None:
            object.__setattr__(self, "reuse_samples", practical)
        if self.estimator is None:
            method = EstimatorMethod.COLUMN_SUM if practical else EstimatorMethod.SPLIT_SVD
            object.__setattr__(self, "estimator", method)

    def default_estimator(self) -> Estimator:
        cfg = SpectralConfig(**{**self.spectral.__dict__, "v_hat_method": self.estimator})
        return spectral_estimator(cfg)


@dataclass(frozen=True)
class CandidateSet:
    round: int
    items: np.ndarray
    columns: int


def rank_items(item_ids, scores, orientation: int = 1) -> np.ndarray:
    """Item ids ordered best first; ties go to the smaller id."""
    item_ids = np.asarray(item_ids)
    keyed = orientation * np.asarray(scores, dtype=float)
    order = np.lexsort((item_ids, -keyed))
    return item_ids[order]


def _log_rounds(n: int, T: int) -> int:
    """``ceil(log2(n / sqrt(T)))``, or 0 when ``n <= sqrt(T)``."""
    ratio = n / math.sqrt(T)
    if ratio <= 1.0:
        return 0
    return max(0, math.ceil(math.log2(ratio) - 1e-12))


def halving_schedule(T: int, n: int, r: int) -> int:
    """Fresh columns per surviving item in round ``r`` of the theory schedule.

    ``t_r = floor(T / (2 |I_r| R))`` with ``R = ceil(log2(n / sqrt(T)))`` and
    ``|I_r| = ceil(n / 2^r)``.
    """
    R = _log_rounds(n, T)
    if R == 0:
        raise ValueError("n <= sqrt(T): there are no halving rounds")
    if not 0 <= r <= R - 1:
        raise ValueError(f"round {r} outside 0..{R - 1}")
    size = math.ceil(n / 2**r)
    return T // (2 * size * R)


def _check_theory_regime(n: int, T: int, k: int) -> None:
    if not 2 * k < math.sqrt(T):
        warnings.warn(f"theory mode expects 2k < sqrt(T) (k={k}, T={T})", stacklevel=3)
    if not n * math.log(n) <= T <= n * n:
        warnings.warn(f"theory mode expects n log n <= T <= n^2 (n={n}, T={T})", stacklevel=3)


def sequential_halving_topk(
    sampler: Sampler,
    config: TopKConfig,
    estimator: Optional[Estimator] = None,
    history: Optional[List[CandidateSet]] = None,
) -> np.ndarray:
    """Top-k item ids, best first, found by spectral sequential halving."""
    return halving_ranking(sampler, config, estimator, history)[: config.k]


def halving_ranking(
    sampler: Sampler,
    config: TopKConfig,
    estimator: Optional[Estimator] = None,
    history: Optional[List[CandidateSet]] = None,
) -> np.ndarray:
    """Every item of the last estimated set, best first.

    The first ``k`` entries are the top-k answer; in practical mode the last
    set holds at least ``2k`` items, so the first ``2k`` give a top-2k list.

    Theory mode draws fresh columns every round, keeps the better half, then
    spends at most half of the budget on a clean-up estimate of the survivors.
    Practical mode keeps halving until fewer than ``2k`` items remain, reuses
    every column already drawn for the survivors, splits the budget evenly
    over its rounds and stops early when an item would exceed ``m_max``
    columns. The ledger never exceeds ``T``.
    """
    n = sampler.n_items
    k = config.k
    if n < 2 * k:
        raise ValueError(f"need n >= 2k (n={n}, k={k})")
    if sampler.ledger.consumed:
        raise ValueError("sampler ledger must be empty")
    est = estimator or config.default_estimator()
    if config.mode is Mode.THEORY:
        return _theory(sampler, config, est, history)
    return _practical(sampler, config, est, history)


def _record(history, r, items, cols):
    if history is not None:
        history.append(CandidateSet(r, np.array(items, copy=True), int(cols)))


def _theory(sampler, config, est, history):
    n, T, k = sampler.n_items, config.T, config.k
    _check_theory_regime(n, T, k)
    items = np.arange(n)
    R = _log_rounds(n, T)
    for r in range(R):
        t = T // (2 * items.size * R)
        if t < 1:
            raise BudgetTooSmallError(f"budget {T} gives no columns in round {r} for {items.size} items")
        _record(history, r, items, t)
        batch = sampler.draw(items, t)
        ranked = rank_items(items, est(batch), sampler.orientation)
        items = np.sort(ranked[: math.ceil(items.size / 2)])
    t_clean = T // (2 * items.size)
    if t_clean < 1:
        raise BudgetTooSmallError(f"budget {T} leaves no clean-up columns for {items.size} items")
    _record(history, R, items, t_clean)
    batch = sampler.draw(items, t_clean)
    return rank_items(items, est(batch), sampler.orientation)


def _practical_sizes(n: int, k: int) -> List[int]:
    sizes = []
    size = n
    while size >= 2 * k:
        sizes.append(size)
        size = math.ceil(size / 2)
    return sizes


def _practical(sampler, config, est, history):
    n, T, k = sampler.n_items, config.T, config.k
    sizes = _practical_sizes(n, k)
    n_rounds = len(sizes)
    items = np.arange(n)
    batch: Optional[Batch] = None
    ranked = items
    for r, size in enumerate(sizes):
        t = T // (size * n_rounds)
        held = 0 if batch is None else batch.shape[1]
        final = False
        if config.m_max is not None and held + t >= config.m_max:
            t = config.m_max - held
            final = True
        if t < 1:
            if batch is None:
                raise BudgetTooSmallError(f"budget {T} gives no columns in the first round")
            break
        _record(history, r, items, t)
        fresh = sampler.draw(items, t)
        if config.reuse_samples and batch is not None:
            batch = sampler.merge(batch, fresh)
        else:
            batch = fresh
        ranked = rank_items(items, est(batch), sampler.orientation)
        if final or r == n_rounds - 1:
            break
        keep_ids = ranked[: math.ceil(size / 2)]
        keep = np.sort(np.searchsorted(items, keep_ids))
        items = items[keep]
        batch = batch.select(keep)
    return ranked


def nonadaptive_topk(
    sampler: Sampler,
    T: int,
    k: int,
    estimator: Optional[Estimator] = None,
    config: Optional[SpectralConfig] = None,
) -> np.ndarray:
    """Spend ``floor(T / n)`` columns on every item at once and return the top k."""
    return nonadaptive_ranking(sampler, T, k, estimator, config)[:k]


def nonadaptive_ranking(
    sampler: Sampler,
    T: int,
    k: int,
    estimator: Optional[Estimator] = None,
    config: Optional[SpectralConfig] = None,
) -> np.ndarray:
    """All items ranked from one ``n x floor(T / n)`` batch, best first."""
    n = sampler.n_items
    if T < n:
        raise BudgetTooSmallError(f"T={T} < n={n}: not even one column per item")
    if k > n:
        raise ValueError("k exceeds the number of items")
    est = estimator or spectral_estimator(config or SpectralConfig())
    items = np.arange(n)
    batch = sampler.draw(items, T // n)
    return rank_items(items, est(batch), sampler.orientation)
