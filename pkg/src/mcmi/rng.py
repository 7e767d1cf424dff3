"""Seeded random streams.

Every random draw in the package comes from Philox4x64-10 (numpy's
``Philox`` bit generator).  A stream is keyed by the 128-bit value
``seed | stream_id << 64``; the top 64-bit word of the 256-bit counter
selects a *lane* so that independent consumers of the same stream
(sampling, model generation, features) never overlap.  Philox output is
fully specified, so a given ``(seed, stream_id, lane)`` reproduces the
same draws on every platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SAMPLING = 0
MODEL = 1
FEATURES = 2
SUBSET = 3

_U64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or not 0 <= value <= _U64:
                raise ValueError(f"{name} must be an unsigned 64-bit integer, got {value!r}")

    def generator(self, lane: int = SAMPLING) -> np.random.Generator:
        key = int(self.seed) | (int(self.stream_id) << 64)
        return np.random.Generator(np.random.Philox(key=key, counter=int(lane) << 192))

    def uniforms(self, lane: int = SAMPLING) -> "UniformSource":
        return UniformSource(self.generator(lane))

    def spawn(self, stream_id: int) -> "RngStream":
        return RngStream(self.seed, stream_id)


def as_stream(random_state) -> RngStream:
    """Coerce ``None``, an int or an ``RngStream`` into an ``RngStream``."""
    if random_state is None:
        return RngStream(0)
    if isinstance(random_state, RngStream):
        return random_state
    if isinstance(random_state, (int, np.integer)):
        return RngStream(int(random_state))
    raise TypeError(f"random_state must be None, int or RngStream, got {type(random_state).__name__}")


class UniformSource:
    """Scalar draws for the sequential samplers, served from a block buffer.

    All draws (including integers and Gaussians) are derived from the
    uniform doubles, so the consumed sequence depends only on the call
    order.
    """

    def __init__(self, generator: np.random.Generator, block: int = 4096):
        self._gen = generator
        self._block = block
        self._buf = []
        self._pos = 0

    def random(self) -> float:
        if self._pos == len(self._buf):
            self._buf = self._gen.random(self._block).tolist()
            self._pos = 0
        x = self._buf[self._pos]
        self._pos += 1
        return x

    def below(self, n: int) -> int:
        return min(int(self.random() * n), n - 1)

    def normal(self) -> float:
        # Box-Muller; 1 - u keeps the log argument in (0, 1].
        u1 = 1.0 - self.random()
        u2 = self.random()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
