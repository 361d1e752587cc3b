"""Seed derivation shared by every randomized component.

All randomness hangs off a single 64-bit root seed. Child seeds are derived by
hashing ``(root, *keys)`` through :class:`numpy.random.SeedSequence`, so a child
depends only on its key path and never on how many siblings were drawn.
Per-row sampling streams use Philox with the derived seed as key and the row
id in the high counter word, which makes every row an independent stream that
can be regenerated in isolation.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_seed(root: int, *keys: int) -> int:
    """Return a 64-bit child seed for the key path ``keys`` under ``root``."""
    entropy = [int(root) & _MASK64] + [int(k) & _MASK64 for k in keys]
    state = np.random.SeedSequence(entropy).generate_state(2, np.uint32)
    return int(state[0]) | (int(state[1]) << 32)


def rng_for(root: int, *keys: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=derive_seed(root, *keys)))


def row_stream(seed: int, row: int) -> np.random.Generator:
    """Independent stream for ``row`` under ``seed`` (counter-based split)."""
    counter = [0, 0, 0, int(row) & _MASK64]
    return np.random.Generator(np.random.Philox(key=int(seed) & _MASK64, counter=counter))
