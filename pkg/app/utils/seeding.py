"""
Seeding utilities.

Provides ``UniformStream``, the single source of randomness owned by every
chain, and the counter-indexed split that turns one 64-bit experiment seed
into independent per-replica seeds.

Design notes
------------
- Every discrete draw in the package is ``floor(u * m)`` for exactly one
  uniform ``u`` taken from the stream, so a trajectory is a pure function of
  the seed on every platform numpy supports.
- Uniforms are pulled from the generator in blocks; the block size never
  changes the sequence of values handed out.
"""

from __future__ import annotations

import numpy as np

_BLOCK_SIZE = 4096


class UniformStream:
    """Buffered stream of uniforms on [0, 1) backed by a PCG64 generator.

    Args:
        seed: Integer seed or a ``numpy.random.SeedSequence``.
    """

    def __init__(self, seed: int | np.random.SeedSequence) -> None:
        self.generator = np.random.Generator(np.random.PCG64(seed))
        self._buffer: list[float] = []
        self._pos = 0
        self.draws = 0

    def uniform(self) -> float:
        """Return the next uniform in [0, 1)."""
        if self._pos >= len(self._buffer):
            self._buffer = self.generator.random(_BLOCK_SIZE).tolist()
            self._pos = 0
        u = self._buffer[self._pos]
        self._pos += 1
        self.draws += 1
        return u

    def below(self, m: int) -> int:
        """Return a uniform index in ``range(m)`` using one uniform draw."""
        idx = int(self.uniform() * m)
        # u < 1 always, but float rounding of u*m can land on m
        return idx if idx < m else m - 1

    def choice(self, items: list[int] | tuple[int, ...]) -> int:
        """Return a uniformly chosen element of a non-empty sequence."""
        return items[self.below(len(items))]


def replica_seed_sequence(seed: int, replica: int) -> np.random.SeedSequence:
    """Return the seed sequence of replica ``replica`` under experiment seed ``seed``.

    Replicas are addressed by index (``spawn_key``) rather than spawned in
    order, so any replica can be recomputed on its own.
    """
    return np.random.SeedSequence(entropy=seed, spawn_key=(replica,))


def replica_seed(seed: int, replica: int) -> int:
    """Return a 64-bit integer seed for replica ``replica``, for reports and re-runs."""
    state = replica_seed_sequence(seed, replica).generate_state(1, dtype=np.uint64)
    return int(state[0])


def replica_stream(seed: int, replica: int) -> UniformStream:
    """Return the ``UniformStream`` of replica ``replica``."""
    return UniformStream(replica_seed_sequence(seed, replica))
