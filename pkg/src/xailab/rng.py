"""Seeded random streams.

All stochastic code in the package draws from an RngStream (or a numpy
Generator derived from one) so that a single 64-bit seed fully determines
every run. Child streams are derived from string tags, which keeps parallel
experiment arms independent without coordinating counters.
"""

from __future__ import annotations

import zlib

import numpy as np


class RngStream:
    """A named, seeded source of numpy Generators.

    Same (seed, tags) always yields the identical sample sequence, on any
    platform (PCG64 is fully specified).
    """

    def __init__(self, seed: int, _entropy: tuple[int, ...] = ()):
        self.seed = int(seed)
        self._entropy = _entropy
        self._gen: np.random.Generator | None = None

    def derive(self, *tags: str | int) -> "RngStream":
        """Child stream independent of this one and of siblings."""
        hashed = tuple(
            zlib.crc32(str(t).encode("utf-8")) if isinstance(t, str) else int(t)
            for t in tags
        )
        return RngStream(self.seed, self._entropy + hashed)

    @property
    def generator(self) -> np.random.Generator:
        """The stream's Generator; created lazily, then stateful."""
        if self._gen is None:
            self._gen = np.random.default_rng(
                np.random.SeedSequence([self.seed, *self._entropy])
            )
        return self._gen


def as_generator(rng: RngStream | np.random.Generator | int | None) -> np.random.Generator:
    """Coerce the accepted rng argument forms into a numpy Generator."""
    if rng is None:
        return np.random.default_rng()
    if isinstance(rng, RngStream):
        return rng.generator
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng)).generator
    return rng
