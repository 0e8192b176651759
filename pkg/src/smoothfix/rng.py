"""Deterministic random-stream construction.

All randomness in the package flows through numpy's Philox counter-based
generator, keyed by a user seed plus a fixed domain tag per consumer.  The
counter structure makes streams chunkable: a block of rows of a uniform
table can be regenerated in isolation, so results never depend on how work
is partitioned across chunks or threads.
"""

from __future__ import annotations

import numpy as np

# Domain tags keep independently-consumed streams disjoint under one seed.
DOMAIN_ANALYSIS = 1
DOMAIN_BRANCHING = 2
DOMAIN_POPDYN = 3
DOMAIN_FOURIER = 4

# Philox advances its counter in blocks of four 64-bit outputs, so row
# widths that are multiples of 4 start every row on a block boundary.
BLOCK = 4


def philox(seed: int, *key: int) -> np.random.Generator:
    """Fresh generator on the Philox stream keyed by (seed, *key)."""
    ss = np.random.SeedSequence(seed, spawn_key=tuple(key))
    return np.random.Generator(np.random.Philox(ss))


def padded_width(width: int) -> int:
    """Round a per-row uniform budget up to a counter-block multiple."""
    return -(-width // BLOCK) * BLOCK


def uniform_rows(
    seed: int, key: tuple[int, ...], start: int, stop: int, width: int
) -> np.ndarray:
    """Rows [start, stop) of the conceptual (., width) uniform table.

    width must be a multiple of BLOCK so each row occupies whole counter
    blocks; then any partition of [start, stop) reproduces the same values.
    """
    if width % BLOCK:
        raise ValueError(f"width must be a multiple of {BLOCK}, got {width}")
    if not 0 <= start <= stop:
        raise ValueError(f"bad row range [{start}, {stop})")
    bits = np.random.Philox(np.random.SeedSequence(seed, spawn_key=tuple(key)))
    bits.advance(start * (width // BLOCK))
    return np.random.Generator(bits).random((stop - start, width))
