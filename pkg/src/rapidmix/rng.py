"""Seeded random streams with derivable independent substreams.

All sampling entry points take a RandomSource (or a bare numpy Generator);
nothing in the package touches global random state, so identical seeds give
identical trajectories and parallel trials can use derived streams.
"""
from __future__ import annotations

import numpy as np


class RandomSource:
    """Deterministic random stream identified by a 64-bit seed.

    ``derive(stream_id)`` yields a stream that is statistically independent
    of the parent and of siblings with different ids, while remaining a pure
    function of (seed, stream_id).
    """

    def __init__(self, seed: int, _spawn_key: tuple[int, ...] = ()):
        self.seed = int(seed)
        self._spawn_key = _spawn_key
        self._sequence = np.random.SeedSequence(self.seed, spawn_key=_spawn_key)
        self.generator = np.random.default_rng(self._sequence)

    def derive(self, stream_id: int) -> "RandomSource":
        """Independent substream; same (seed, path) always gives the same stream."""
        return RandomSource(self.seed, self._spawn_key + (int(stream_id),))

    def __repr__(self) -> str:
        return f"RandomSource(seed={self.seed}, path={self._spawn_key})"


def as_generator(rng: "RandomSource | np.random.Generator | int") -> np.random.Generator:
    """Accept a RandomSource, a numpy Generator, or a plain seed."""
    if isinstance(rng, RandomSource):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(int(rng))
