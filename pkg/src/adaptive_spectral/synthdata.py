"""Synthetic crowdsourcing instances and genomes with planted read overlaps."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from ._seeding import derive_seed, rng_for
from .minhash import Read
from .model import Channel, RankOneInstance, uniform_workers

_BASES = np.frombuffer(b"ACGT", dtype=np.uint8)


def gen_crowd_instance(n: int, seed: int, a: float = 1.0, b: float = 5.0) -> RankOneInstance:
    """``p_i ~ Beta(a, b)`` items over a lazy pool of ``q_j ~ U(0, 1)`` workers (symmetric channel)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    p = rng_for(seed, 0x4352).beta(a, b, size=n)
    return RankOneInstance(
        p,
        None,
        Channel.XOR_SYMMETRIC,
        worker_law=uniform_workers,
        worker_seed=derive_seed(seed, 0x5157),
    )


def _random_bases(rng: np.random.Generator, n: int) -> np.ndarray:
    return _BASES[rng.integers(0, 4, size=n)]


def gen_genome(
    G: int,
    seed: int,
    *,
    repeat_length: int = 0,
    repeat_copies: int = 0,
    repeat_divergence: Union[float, Tuple[float, float]] = 0.0,
    repeat_anchor: Optional[int] = None,
) -> str:
    """Uniform i.i.d. genome of length ``G``.

    Optionally overwrites ``repeat_copies`` random positions with copies of
    one random element of length ``repeat_length``. Each copy gets its own
    substitutions at a rate drawn uniformly from ``repeat_divergence`` (a
    ``(lo, hi)`` range or a single rate). ``repeat_anchor`` places one exact
    copy at a fixed position. Repeats are what make reads that do not overlap
    still share k-mers, with a similarity graded by each copy's divergence.
    """
    if G < 1:
        raise ValueError("G must be >= 1")
    rng = rng_for(seed, 0x474E)
    genome = _random_bases(rng, G)
    if repeat_copies:
        if not 1 <= repeat_length <= G:
            raise ValueError("repeat_length must lie in 1..G")
        lo, hi = (repeat_divergence, repeat_divergence) if np.isscalar(repeat_divergence) else repeat_divergence
        element = _random_bases(rng, repeat_length)
        starts = rng.integers(0, G - repeat_length + 1, size=repeat_copies)
        rates = rng.uniform(lo, hi, size=repeat_copies)
        for start, rate in zip(starts, rates):
            genome[start : start + repeat_length] = _substitute(rng, element, rate)
    if repeat_anchor is not None:
        if not 0 <= repeat_anchor <= G - repeat_length or not repeat_copies:
            raise ValueError("repeat_anchor needs a repeat family that fits at that position")
        genome[repeat_anchor : repeat_anchor + repeat_length] = element
    return genome.tobytes().decode("ascii")


def _substitute(rng: np.random.Generator, seq: np.ndarray, rate: float) -> np.ndarray:
    """Each base replaced with probability ``rate`` by a uniformly chosen *different* base."""
    out = seq.copy()
    if rate <= 0:
        return out
    hit = rng.random(seq.size) < rate
    if np.any(hit):
        codes = np.searchsorted(_BASES, seq[hit])
        shift = rng.integers(1, 4, size=codes.size)
        out[hit] = _BASES[(codes + shift) % 4]
    return out


@dataclass(frozen=True, eq=False)
class PlantedReadSet:
    reference: Read
    reads: List[Read]
    true_overlap: np.ndarray
    offsets: np.ndarray
    G: int
    L: int
    noise_rate: float

    @property
    def calibration(self) -> List[Read]:
        return [r for r in self.reads if r.is_calibration]

    @property
    def data_reads(self) -> List[Read]:
        return [r for r in self.reads if not r.is_calibration]

    def top_k(self, k: int) -> np.ndarray:
        """Indices (into the non-calibration reads) of the ``k`` largest planted overlaps."""
        p = self.true_overlap[: len(self.data_reads)]
        order = np.lexsort((np.arange(p.size), -p))
        if k < p.size and p[order[k - 1]] == p[order[k]]:
            raise ValueError("planted overlaps tie at the k boundary")
        return np.sort(order[:k])


def gen_reads_with_overlaps(
    genome: str,
    L: int,
    layout: Sequence[int],
    noise_rate: float,
    n_calibration: int,
    seed: int,
) -> PlantedReadSet:
    """Reference ``genome[0:L]`` plus one read per offset and random calibration reads.

    Read ``i`` is ``genome[o_i : o_i + L]`` so it shares a prefix of length
    ``L - o_i`` with the reference's suffix: ``p_i = max(0, 1 - o_i / L)``.
    Every read (reference included) gets independent substitutions at
    ``noise_rate``. Calibration reads are uniform random strings, ``p = 0``.
    """
    G = len(genome)
    if not 1 <= L <= G:
        raise ValueError(f"read length {L} must lie in 1..{G}")
    if not 0.0 <= noise_rate < 1.0:
        raise ValueError("noise_rate must lie in [0, 1)")
    offsets = np.asarray(layout, dtype=np.int64)
    if offsets.size and (offsets.min() < 0 or offsets.max() + L > G):
        raise ValueError("offsets must place every read inside the genome")
    if n_calibration < 0:
        raise ValueError("n_calibration must be >= 0")

    rng = rng_for(seed, 0x5244)
    g = np.frombuffer(genome.encode("ascii"), dtype=np.uint8)

    def noisy(start):
        return _substitute(rng, g[start : start + L], noise_rate).tobytes().decode("ascii")

    reference = Read("ref", noisy(0))
    reads = [Read(f"read{i}", noisy(int(o))) for i, o in enumerate(offsets)]
    reads += [
        Read(f"cal{j}", _random_bases(rng, L).tobytes().decode("ascii"), is_calibration=True)
        for j in range(n_calibration)
    ]
    overlap = np.maximum(0.0, 1.0 - offsets / L)
    overlap = np.concatenate([overlap, np.zeros(n_calibration)])
    return PlantedReadSet(reference, reads, overlap, offsets, G, L, noise_rate)


def default_layout(
    n_reads: int,
    G: int,
    L: int,
    k_top: int,
    seed: int,
    *,
    top_overlap: tuple = (0.75, 0.9),
    moderate_overlap: tuple = (0.35, 0.55),
    n_moderate: Optional[int] = None,
) -> np.ndarray:
    """Offsets for ``k_top`` strong overlaps, ``n_moderate`` (default ``k_top``) weaker ones and the rest none.

    Overlapping reads get distinct offsets; the others start anywhere at or
    beyond ``L`` so they share no sequence with the reference.
    """
    n_moderate = k_top if n_moderate is None else n_moderate
    if k_top + n_moderate > n_reads:
        raise ValueError("more planted overlaps than reads")
    if G < 2 * L:
        raise ValueError("genome too short for non-overlapping reads")
    rng = rng_for(seed, 0x4C59)

    def distinct(lo_frac, hi_frac, size):
        lo = max(1, math.ceil(L * (1.0 - hi_frac)))
        hi = math.floor(L * (1.0 - lo_frac))
        if hi - lo + 1 < size:
            raise ValueError("overlap band too narrow for distinct offsets")
        return rng.choice(np.arange(lo, hi + 1), size=size, replace=False)

    top = distinct(*top_overlap, k_top)
    mid = distinct(*moderate_overlap, n_moderate)
    rest = rng.integers(L, G - L + 1, size=n_reads - k_top - n_moderate)
    return np.concatenate([top, mid, rest]).astype(np.int64)
