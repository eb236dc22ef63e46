"""Reproducible Wiener increments from counter-based random streams.

Each trajectory owns one stream, keyed by (base seed, stream id) through a
Philox counter-based generator.  Uniform variates are taken as midpoints of
the 2^53 lattice, (k + 1/2) / 2^53 with k a 53-bit integer, and mapped to
normals through the inverse normal CDF, so replay is exact and platform
independent and no draw can hit 0 or 1.
"""

from __future__ import annotations

import numpy as np
from numpy.random import Generator, Philox
from scipy.special import ndtri

from .errors import ValidationError

_LATTICE = 1 << 53


class NoiseSource:
    """Deterministic stream of Wiener increments for one trajectory.

    The same (base_seed, stream_id) always reproduces the same increment
    sequence, independent of how draws are grouped into blocks.
    """

    def __init__(self, base_seed: int, stream_id: int, dim: int):
        base_seed = int(base_seed)
        stream_id = int(stream_id)
        if not (0 <= base_seed < (1 << 64)):
            raise ValidationError("base_seed must fit in an unsigned 64-bit integer")
        if not (0 <= stream_id < (1 << 64)):
            raise ValidationError("stream_id must fit in an unsigned 64-bit integer")
        if dim < 1:
            raise ValidationError("dim must be at least 1")
        self.base_seed = base_seed
        self.stream_id = stream_id
        self.dim = int(dim)
        self.step = 0
        self._gen = Generator(Philox(key=base_seed + (stream_id << 64)))

    def draw_block(self, n_steps: int, dt: float) -> np.ndarray:
        """Increments for the next ``n_steps`` steps, shape (n_steps, dim)."""
        if dt <= 0.0:
            raise ValidationError("dt must be positive")
        k = self._gen.integers(0, _LATTICE, size=n_steps * self.dim, dtype=np.uint64)
        u = (k.astype(np.float64) + 0.5) / _LATTICE
        z = ndtri(u).reshape(n_steps, self.dim)
        self.step += n_steps
        return z * np.sqrt(dt)

    def draw_wiener(self, dt: float) -> np.ndarray:
        """Increments for a single step, shape (dim,)."""
        return self.draw_block(1, dt)[0]

    def skip(self, n_steps: int) -> None:
        """Advance past ``n_steps`` steps without returning their increments."""
        self._gen.integers(0, _LATTICE, size=n_steps * self.dim, dtype=np.uint64)
        self.step += n_steps


def draw_wiener(source: NoiseSource, dt: float) -> np.ndarray:
    """Module-level convenience alias for ``source.draw_wiener(dt)``."""
    return source.draw_wiener(dt)
