"""Deterministic random streams.

Every consumer of randomness asks for a stream keyed by ``(seed, purpose,
index)``. Streams are counter-based (Philox) and derived through
``SeedSequence`` spawn keys, so the numbers a neuron sees do not depend on the
order in which other neurons were processed.
"""

from __future__ import annotations

import numpy as np

# purpose identifiers; keep stable, they are part of the reproducibility contract
SYNAPSE = 1
MISMATCH = 2
STIMULUS = 3
AXON = 4
DEVICE = 5
CONFIG = 6
TRIAL = 7


def stream(seed: int, purpose: int, index: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(purpose, index))
    return np.random.Generator(np.random.Philox(ss))


def trial_seed(seed: int, trial: int) -> int:
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(TRIAL, trial))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


class UniformBuffer:
    """Per-stream block buffer of U[0,1) draws for hot loops."""

    __slots__ = ("_gen", "_buf", "_pos", "_block")

    def __init__(self, gen: np.random.Generator, block: int = 256):
        self._gen = gen
        self._block = block
        self._buf = gen.random(block).tolist()
        self._pos = 0

    def next(self) -> float:
        if self._pos == self._block:
            self._buf = self._gen.random(self._block).tolist()
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return u
