"""Rank-one response models and the binary channels that produce them.

Three channels are supported:

* ``RAW``: ``X[i, j] ~ Ber(u_i v_j)`` directly.
* ``OR_Z``: ``Y[i, j] ~ Ber(p_i) OR Ber(q_j)`` (one-sided errors). The
  processed matrix is ``X = 1 - Y`` so that ``E X = (1 - p)(1 - q)^T`` is an
  ordinary {0, 1} rank-one matrix with ``u = 1 - p`` and ``v = 1 - q``.
* ``XOR_SYMMETRIC``: ``Y[i, j] ~ Ber(p_i) XOR Ber(q_j)`` (binary symmetric
  channel). ``X = Y - 1/2`` has ``E X = (p - 1/2)(1 - 2q)^T``.

For the two noisy channels the instance stores the raw ``p`` and ``q``; the
rank-one factors are exposed through :attr:`RankOneInstance.u` and
:meth:`RankOneInstance.worker_values`.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ._seeding import rng_for, row_stream

_WORKER_BLOCK = 4096
_WORKER_TAG = 0x574B  # key-path tag for lazily drawn worker parameters


class Channel(enum.Enum):
    RAW = "raw"
    OR_Z = "or_z"
    XOR_SYMMETRIC = "xor_symmetric"

    @property
    def levels(self) -> tuple[float, float]:
        """``(lo, hi)`` of the processed observation matrix."""
        if self is Channel.XOR_SYMMETRIC:
            return (-0.5, 0.5)
        return (0.0, 1.0)


WorkerLaw = Callable[[np.random.Generator, int], np.ndarray]


def uniform_workers(rng: np.random.Generator, size: int) -> np.ndarray:
    return rng.uniform(0.0, 1.0, size)


@functools.lru_cache(maxsize=4096)
def _worker_block(law: WorkerLaw, seed: int, block: int) -> np.ndarray:
    values = np.asarray(law(rng_for(seed, _WORKER_TAG, block), _WORKER_BLOCK), dtype=float)
    values.setflags(write=False)
    return values


@dataclass(frozen=True, eq=False)
class RankOneInstance:
    """Ground truth for a rank-one response model.

    ``item_params`` holds ``u`` for the raw channel and ``p`` otherwise;
    ``worker_params`` likewise holds ``v`` or ``q``. When ``worker_params`` is
    None the worker pool is unbounded and column ``j`` is drawn lazily from
    ``worker_law`` with a stream keyed on ``(worker_seed, j // 4096)``.
    """

    item_params: np.ndarray
    worker_params: Optional[np.ndarray] = None
    channel: Channel = Channel.RAW
    c_lower: float = 0.0
    c_upper: float = 1.0
    worker_law: Optional[WorkerLaw] = field(default=None, repr=False)
    worker_seed: int = 0

    def __post_init__(self):
        items = np.asarray(self.item_params, dtype=float).ravel()
        object.__setattr__(self, "item_params", items)
        if items.size < 1:
            raise ValueError("instance needs at least one item")
        workers = self.worker_params
        if workers is not None:
            workers = np.asarray(workers, dtype=float).ravel()
            if workers.size < 1:
                raise ValueError("instance needs at least one worker")
            object.__setattr__(self, "worker_params", workers)
        elif self.worker_law is None:
            raise ValueError("either worker_params or worker_law is required")

        if self.channel is Channel.RAW:
            lo, hi = self.c_lower, self.c_upper
            if not 0.0 <= lo <= hi <= 1.0:
                raise ValueError(f"bad bounds [{lo}, {hi}]")
            arrays = [items] if workers is None else [items, workers]
            for arr in arrays:
                if arr.min() < lo or arr.max() > hi:
                    raise ValueError(f"raw parameters must lie in [{lo}, {hi}]")
        else:
            arrays = [items] if workers is None else [items, workers]
            for arr in arrays:
                if arr.min() < 0.0 or arr.max() > 1.0:
                    raise ValueError("channel parameters p, q must lie in [0, 1]")

    @classmethod
    def raw(cls, u, v, c_lower=0.0, c_upper=1.0) -> "RankOneInstance":
        return cls(u, v, Channel.RAW, c_lower, c_upper)

    @classmethod
    def or_z(cls, p, q) -> "RankOneInstance":
        return cls(p, q, Channel.OR_Z)

    @classmethod
    def xor_symmetric(cls, p, q) -> "RankOneInstance":
        return cls(p, q, Channel.XOR_SYMMETRIC)

    @property
    def n_items(self) -> int:
        return self.item_params.size

    @property
    def n_workers(self) -> Optional[int]:
        """Size of the fixed worker pool, or None for a lazy pool."""
        return None if self.worker_params is None else self.worker_params.size

    @property
    def u(self) -> np.ndarray:
        return _item_factor(self.channel, self.item_params)

    @property
    def v(self) -> np.ndarray:
        if self.worker_params is None:
            raise ValueError("lazy worker pool has no finite v; use worker_values(cols)")
        return _worker_factor(self.channel, self.worker_params)

    def worker_raw(self, cols) -> np.ndarray:
        """Raw worker parameters (``v`` for RAW, ``q`` otherwise) for ``cols``."""
        cols = np.asarray(cols, dtype=np.int64)
        if self.worker_params is not None:
            if cols.size and (cols.min() < 0 or cols.max() >= self.worker_params.size):
                raise IndexError("column id outside the worker pool")
            return self.worker_params[cols]
        if cols.size and cols.min() < 0:
            raise IndexError("negative column id")
        out = np.empty(cols.shape, dtype=float)
        blocks = cols // _WORKER_BLOCK
        for b in np.unique(blocks):
            sel = blocks == b
            out[sel] = _worker_block(self.worker_law, int(self.worker_seed), int(b))[
                cols[sel] % _WORKER_BLOCK
            ]
        return out

    def worker_values(self, cols) -> np.ndarray:
        """Rank-one worker factor ``v`` restricted to ``cols``."""
        return _worker_factor(self.channel, self.worker_raw(cols))

    def hi_probability(self, rows, cols) -> np.ndarray:
        """P(raw response = 1) for every (row, col) pair, before processing."""
        p = self.item_params[np.asarray(rows, dtype=np.int64)][:, None]
        q = self.worker_raw(cols)[None, :]
        return _raw_one_probability(self.channel, p, q)


def _item_factor(channel: Channel, p: np.ndarray) -> np.ndarray:
    if channel is Channel.OR_Z:
        return 1.0 - p
    if channel is Channel.XOR_SYMMETRIC:
        return p - 0.5
    return p.copy()


def _worker_factor(channel: Channel, q: np.ndarray) -> np.ndarray:
    if channel is Channel.OR_Z:
        return 1.0 - q
    if channel is Channel.XOR_SYMMETRIC:
        return 1.0 - 2.0 * q
    return q.copy()


def _raw_one_probability(channel: Channel, p, q):
    if channel is Channel.OR_Z:
        return 1.0 - (1.0 - p) * (1.0 - q)
    if channel is Channel.XOR_SYMMETRIC:
        return p + q - 2.0 * p * q
    return p * q


@dataclass(frozen=True, eq=False)
class ObservationMatrix:
    entries: np.ndarray
    lo: float
    hi: float
    seed: Optional[int] = None
    row_ids: Optional[np.ndarray] = None
    col_ids: Optional[np.ndarray] = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape


def transform_channel(raw: ObservationMatrix, channel: Channel) -> ObservationMatrix:
    """Map raw {0, 1} responses to the processed rank-one matrix of ``channel``."""
    y = np.asarray(raw.entries)
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("raw responses must be in {0, 1}")
    lo, hi = channel.levels
    if channel is Channel.OR_Z:
        x = 1.0 - y
    elif channel is Channel.XOR_SYMMETRIC:
        x = y - 0.5
    else:
        x = y.astype(float, copy=True)
    return ObservationMatrix(x.astype(float, copy=False), lo, hi, raw.seed, raw.row_ids, raw.col_ids)


def sample_observations(
    instance: RankOneInstance,
    row_ids: Sequence[int],
    n_cols: int,
    seed: int,
    col_ids: Optional[Sequence[int]] = None,
) -> ObservationMatrix:
    """Draw a processed observation matrix for ``row_ids`` x ``n_cols`` workers.

    Row ``i`` uses its own Philox stream keyed by ``seed``, so the block of a
    given row does not depend on which other rows are requested. Workers are
    ``col_ids`` when given, else ``0..n_cols-1``.

    For the noisy channels the raw response is drawn as a single Bernoulli with
    the channel's output probability (``1-(1-p)(1-q)`` for OR, ``p+q-2pq`` for
    XOR), which has the same law as combining two independent draws.
    """
    rows = np.asarray(row_ids, dtype=np.int64).ravel()
    if rows.size == 0:
        raise ValueError("row_ids must be nonempty")
    if n_cols < 1:
        raise ValueError("n_cols must be >= 1")
    if rows.min() < 0 or rows.max() >= instance.n_items:
        raise IndexError("unknown row id")
    cols = np.arange(n_cols) if col_ids is None else np.asarray(col_ids, dtype=np.int64)
    if cols.size != n_cols:
        raise ValueError("col_ids length must equal n_cols")

    q = instance.worker_raw(cols)
    lo, hi = instance.channel.levels
    out = np.empty((rows.size, n_cols), dtype=float)
    for r, i in enumerate(rows):
        prob = _raw_one_probability(instance.channel, instance.item_params[i], q)
        ones = row_stream(seed, i).random(n_cols) < prob
        if instance.channel is Channel.OR_Z:
            np.copyto(out[r], np.where(ones, lo, hi))
        else:
            np.copyto(out[r], np.where(ones, hi, lo))
    return ObservationMatrix(out, lo, hi, seed, rows, cols)


def sample_raw(instance: RankOneInstance, row_ids, n_cols: int, seed: int, col_ids=None) -> ObservationMatrix:
    """Unprocessed {0, 1} responses ``Y`` from the same streams as :func:`sample_observations`."""
    x = sample_observations(instance, row_ids, n_cols, seed, col_ids)
    if instance.channel is Channel.OR_Z:
        y = 1.0 - x.entries
    elif instance.channel is Channel.XOR_SYMMETRIC:
        y = x.entries + 0.5
    else:
        y = x.entries
    return ObservationMatrix(y, 0.0, 1.0, seed, x.row_ids, x.col_ids)


def expected_matrix(instance: RankOneInstance, cols=None) -> np.ndarray:
    """Exact ``E X = u v^T`` for the processed matrix."""
    if cols is None:
        v = instance.v
    else:
        v = instance.worker_values(cols)
    return np.outer(instance.u, v)
