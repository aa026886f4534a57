"""Reproducible random streams for trial execution.

Every source of randomness in the package flows through an :class:`RngStream`,
a named (seed, stream) pair backed by the counter-based Philox generator.
Identical (seed, stream) pairs always produce identical sample sequences, so
trials are bit-reproducible across runs and across worker processes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1
# splitmix64 increment, used to derive child stream ids without collisions
_GOLDEN = 0x9E3779B97F4A7C15


def _mix(value: int) -> int:
    """splitmix64 finalizer; decorrelates derived stream ids."""
    value = value & _MASK64
    value = ((value ^ (value >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    value = ((value ^ (value >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (value ^ (value >> 31)) & _MASK64


@dataclass(frozen=True)
class RngStream:
    """A named, replayable source of randomness.

    ``generator()`` returns a fresh Philox-backed generator positioned at the
    start of the stream, so calling it twice replays the same samples.  Use
    ``child(...)`` to derive statistically independent streams for sub-tasks
    (one per trial, per data vector, per worker).
    """

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        key = np.array([self.seed & _MASK64, self.stream & _MASK64], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, *ids: int) -> "RngStream":
        stream = self.stream
        for i in ids:
            stream = _mix(stream ^ _GOLDEN ^ _mix(i))
        return RngStream(self.seed, stream)


def as_generator(rng: "RngStream | np.random.Generator") -> np.random.Generator:
    """Accept either a replayable stream or an already-advanced generator."""
    if isinstance(rng, RngStream):
        return rng.generator()
    return rng
