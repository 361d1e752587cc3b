"""Sources of response columns with exact pull accounting.

A :class:`Sampler` hands out blocks of fresh worker columns for a chosen
subset of items and charges every entry it returns to a :class:`BudgetLedger`.
The bandit algorithms only ever talk to this interface, so the same code runs
on synthetic rank-one instances (:class:`InstanceSampler`) and on a
precomputed response pool such as a min-hash collision matrix
(:class:`MatrixSampler`).

Calibration rows (questions with known answers) ride along with every draw.
They are billed to ``ledger.calibration``, not to the item budget.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from . import spectral
from ._seeding import derive_seed, rng_for
from .model import Channel, RankOneInstance, sample_observations
from .spectral import DegenerateMatrixError, SpectralConfig, VNormSource

_CAL_TAG = 0x43414C


class BudgetExceededError(RuntimeError):
    pass


class PoolExhaustedError(RuntimeError):
    pass


@dataclass
class BudgetLedger:
    limit: Optional[int] = None
    consumed: int = 0
    calibration: int = 0

    def charge(self, pulls: int) -> None:
        if self.limit is not None and self.consumed + pulls > self.limit:
            raise BudgetExceededError(
                f"charging {pulls} pulls would exceed the budget ({self.consumed}/{self.limit})"
            )
        self.consumed += int(pulls)

    @property
    def remaining(self) -> Optional[int]:
        return None if self.limit is None else self.limit - self.consumed


@dataclass(frozen=True, eq=False)
class Batch:
    """Responses of ``item_ids`` to the workers ``col_ids``."""

    entries: np.ndarray
    item_ids: np.ndarray
    col_ids: np.ndarray
    v_norm: Optional[float] = None
    calibration: Optional[np.ndarray] = None
    calibration_u: Optional[np.ndarray] = None

    @property
    def shape(self):
        return self.entries.shape

    def reference(self) -> Optional[np.ndarray]:
        """Unbiased per-worker estimate of ``v`` from the calibration rows."""
        if self.calibration is None or len(self.calibration) == 0:
            return None
        return (self.calibration / self.calibration_u[:, None]).mean(axis=0)

    def select(self, keep) -> "Batch":
        """Restrict to the items at positions ``keep`` (in that order)."""
        keep = np.asarray(keep, dtype=np.int64)
        return replace(self, entries=self.entries[keep], item_ids=self.item_ids[keep])


class Sampler(abc.ABC):
    """Abstract source of response columns.

    ``orientation`` is +1 when larger ``u`` means a better item and -1 when the
    interesting items are the ones with the smallest ``u`` (min-hash overlaps,
    where ``u = 1 - overlap``).
    """

    n_items: int
    orientation: int = 1

    def __init__(self, budget: Optional[int] = None):
        self.ledger = BudgetLedger(limit=budget)

    @abc.abstractmethod
    def draw(self, item_ids, n_cols: int) -> Batch:
        """Fresh columns for ``item_ids``; charges ``len(item_ids) * n_cols``."""

    @abc.abstractmethod
    def v_norm(self, col_ids, calibration=None, calibration_u=None) -> Optional[float]:
        """``||v||`` over ``col_ids`` as this sampler knows it (or None)."""

    def merge(self, old: Batch, new: Batch) -> Batch:
        """Append the columns of ``new`` to ``old`` (same items, same order)."""
        if not np.array_equal(old.item_ids, new.item_ids):
            raise ValueError("can only merge batches over the same items")
        cols = np.concatenate([old.col_ids, new.col_ids])
        cal = None
        if old.calibration is not None:
            cal = np.hstack([old.calibration, new.calibration])
        entries = np.hstack([old.entries, new.entries])
        return Batch(
            entries,
            old.item_ids,
            cols,
            self.v_norm(cols, cal, old.calibration_u),
            cal,
            old.calibration_u,
        )


def _calibration_norm(calibration, calibration_u) -> Optional[float]:
    if calibration is None or len(calibration) == 0:
        return None
    est = (np.asarray(calibration) / np.asarray(calibration_u)[:, None]).mean(axis=0)
    return float(np.linalg.norm(est))


class InstanceSampler(Sampler):
    """Draws fresh workers from a :class:`RankOneInstance`.

    Each call to :meth:`draw` consumes the next block of worker ids (wrapping
    around a finite pool) and uses a per-draw seed derived from ``seed``.
    """

    def __init__(
        self,
        instance: RankOneInstance,
        seed: int,
        *,
        budget: Optional[int] = None,
        v_norm_source: VNormSource = VNormSource.ORACLE,
        n_calibration: int = 0,
        calibration_p: Optional[float] = None,
    ):
        super().__init__(budget)
        self.instance = instance
        self.n_items = instance.n_items
        self.seed = int(seed)
        self.v_norm_source = v_norm_source
        self._cursor = 0
        self._draws = 0
        self._cal_instance = None
        self.calibration_u = None
        if v_norm_source is VNormSource.CALIBRATION and n_calibration < 1:
            raise ValueError("calibration-backed v_norm needs calibration rows")
        if n_calibration:
            ch = instance.channel
            if calibration_p is None:
                # OR-Z: no true overlap (u = 1); XOR: known "yes" item (u = 1/2); raw: u = 1
                calibration_p = 1.0 if ch is not Channel.OR_Z else 0.0
            self._cal_instance = RankOneInstance(
                np.full(n_calibration, float(calibration_p)),
                instance.worker_params,
                ch,
                0.0,
                1.0,
                instance.worker_law,
                instance.worker_seed,
            )
            self.calibration_u = self._cal_instance.u

    def _next_cols(self, n_cols: int) -> np.ndarray:
        cols = self._cursor + np.arange(n_cols, dtype=np.int64)
        self._cursor += n_cols
        pool = self.instance.n_workers
        return cols if pool is None else cols % pool

    def draw(self, item_ids, n_cols: int) -> Batch:
        items = np.asarray(item_ids, dtype=np.int64)
        if n_cols < 1:
            raise ValueError("n_cols must be >= 1")
        self.ledger.charge(items.size * n_cols)
        cols = self._next_cols(n_cols)
        draw_seed = derive_seed(self.seed, self._draws)
        self._draws += 1
        x = sample_observations(self.instance, items, n_cols, draw_seed, cols)
        cal = None
        if self._cal_instance is not None:
            g = self._cal_instance.n_items
            cal = sample_observations(
                self._cal_instance, np.arange(g), n_cols, derive_seed(draw_seed, _CAL_TAG), cols
            ).entries
            self.ledger.calibration += g * n_cols
        return Batch(x.entries, items, cols, self.v_norm(cols, cal, self.calibration_u), cal, self.calibration_u)

    def v_norm(self, col_ids, calibration=None, calibration_u=None) -> Optional[float]:
        if self.v_norm_source is VNormSource.ORACLE:
            return float(np.linalg.norm(self.instance.worker_values(col_ids)))
        if self.v_norm_source is VNormSource.CALIBRATION:
            return _calibration_norm(calibration, calibration_u)
        return None


class MatrixSampler(Sampler):
    """Serves columns of a precomputed processed response pool.

    The column order is a permutation drawn from ``seed``, so different seeds
    see the hash functions (workers) in different orders. Calibration rows of
    the pool, if any, are returned with every draw.
    """

    def __init__(
        self,
        pool: np.ndarray,
        seed: int,
        *,
        budget: Optional[int] = None,
        calibration_rows: Optional[np.ndarray] = None,
        calibration_u: float = 1.0,
        v_pool: Optional[np.ndarray] = None,
        v_norm_source: VNormSource = VNormSource.NONE,
        orientation: int = 1,
        shuffle: bool = True,
    ):
        super().__init__(budget)
        self.pool = np.asarray(pool, dtype=float)
        self.n_items = self.pool.shape[0]
        self.orientation = orientation
        self.v_pool = None if v_pool is None else np.asarray(v_pool, dtype=float)
        self.v_norm_source = v_norm_source
        self.cal_pool = None
        self.calibration_u = None
        if calibration_rows is not None and len(calibration_rows):
            self.cal_pool = np.asarray(calibration_rows, dtype=float)
            self.calibration_u = np.full(self.cal_pool.shape[0], float(calibration_u))
        if v_norm_source is VNormSource.ORACLE and self.v_pool is None:
            raise ValueError("oracle v_norm needs v_pool")
        if v_norm_source is VNormSource.CALIBRATION and self.cal_pool is None:
            raise ValueError("calibration v_norm needs calibration rows")
        n_cols = self.pool.shape[1]
        self._order = rng_for(seed, 0x4D53).permutation(n_cols) if shuffle else np.arange(n_cols)
        self._cursor = 0

    @property
    def remaining_columns(self) -> int:
        return self._order.size - self._cursor

    def draw(self, item_ids, n_cols: int) -> Batch:
        items = np.asarray(item_ids, dtype=np.int64)
        if n_cols < 1:
            raise ValueError("n_cols must be >= 1")
        if n_cols > self.remaining_columns:
            raise PoolExhaustedError(f"asked for {n_cols} columns, {self.remaining_columns} left")
        self.ledger.charge(items.size * n_cols)
        cols = self._order[self._cursor : self._cursor + n_cols]
        self._cursor += n_cols
        entries = self.pool[np.ix_(items, cols)]
        cal = None
        if self.cal_pool is not None:
            cal = self.cal_pool[:, cols]
            self.ledger.calibration += cal.size
        return Batch(entries, items, cols, self.v_norm(cols, cal, self.calibration_u), cal, self.calibration_u)

    def v_norm(self, col_ids, calibration=None, calibration_u=None) -> Optional[float]:
        if self.v_norm_source is VNormSource.ORACLE:
            return float(np.linalg.norm(self.v_pool[np.asarray(col_ids)]))
        if self.v_norm_source is VNormSource.CALIBRATION:
            return _calibration_norm(calibration, calibration_u)
        return None


Estimator = Callable[[Batch], np.ndarray]


def spectral_estimator(config: SpectralConfig = SpectralConfig()) -> Estimator:
    """Estimator running ``config.v_hat_method`` on a batch.

    Calibration rows help estimate the worker direction and fix its sign. A
    degenerate (all-zero) input falls back to row averages, which still rank
    correctly in expectation.
    """

    def run(batch: Batch) -> np.ndarray:
        try:
            est = spectral.estimate(
                batch.entries,
                batch.v_norm,
                config,
                reference=batch.reference(),
                support_rows=batch.calibration,
            )
        except DegenerateMatrixError:
            return spectral.row_average_scores(batch.entries)
        return est.u_hat

    return run


def exact_estimator(values) -> Estimator:
    """Returns the true values of the requested items; for testing the bandit logic."""
    values = np.asarray(values, dtype=float)
    return lambda batch: values[batch.item_ids]


class NullSampler(Sampler):
    """Cheap sampler whose draws are all-zero broadcasts (accounting tests)."""

    def __init__(self, n_items: int, budget: Optional[int] = None):
        super().__init__(budget)
        self.n_items = n_items
        self._cursor = 0

    def draw(self, item_ids, n_cols: int) -> Batch:
        items = np.asarray(item_ids, dtype=np.int64)
        if n_cols < 1:
            raise ValueError("n_cols must be >= 1")
        self.ledger.charge(items.size * n_cols)
        cols = self._cursor + np.arange(n_cols)
        self._cursor += n_cols
        return Batch(np.broadcast_to(np.zeros(1), (items.size, n_cols)), items, cols, 1.0)

    def v_norm(self, col_ids, calibration=None, calibration_u=None):
        return 1.0

    def merge(self, old: Batch, new: Batch) -> Batch:
        cols = np.concatenate([old.col_ids, new.col_ids])
        return Batch(np.broadcast_to(np.zeros(1), (old.item_ids.size, cols.size)), old.item_ids, cols, 1.0)
