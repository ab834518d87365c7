"""Counter-based random streams keyed on (master seed, trajectory, lane).

Every uniform is a pure function of ``(seed, index, lane, counter)`` built from
the SplitMix64 finalizer, so a trajectory draws the same numbers no matter
which worker, block or engine runs it.  Both ensemble engines consume the
waiting-time lane identically, which makes their interval sequences coincide
for a shared seed.
"""

from __future__ import annotations

import secrets

import numpy as np

from . import _kernels

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
LANE_MULT = 0xD1B54A32D192ED03

LANE_WAIT = 1
LANE_COLLAPSE = 2


def mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def stream_key(seed: int, index: int, lane: int) -> int:
    k = mix64((seed + GOLDEN) & MASK64)
    k = mix64(k ^ (((index + 1) * GOLDEN) & MASK64))
    return mix64((k + lane * LANE_MULT) & MASK64)


def uniform_at(key: int, counter: int) -> float:
    z = mix64((key + (counter + 1) * GOLDEN) & MASK64)
    return (z >> 11) * 2.0**-53


def check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed <= MASK64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def entropy_seed() -> int:
    return secrets.randbits(64)


class CounterStream:
    """Sequential view of one lane of one trajectory.

    Quacks like the subset of ``numpy.random.Generator`` the walk and the
    samplers use (``random()``).
    """

    def __init__(self, seed: int, index: int, lane: int):
        self.seed = check_seed(seed)
        self.index = int(index)
        self.lane = int(lane)
        self.key = stream_key(self.seed, self.index, self.lane)
        self.counter = 0

    def random(self, size: int | None = None):
        if size is None:
            u = uniform_at(self.key, self.counter)
            self.counter += 1
            return u
        out = uniforms(self.seed, self.index, self.lane, self.counter, size)
        self.counter += size
        return out


def uniforms(seed: int, index: int, lane: int, start: int, size: int) -> np.ndarray:
    """Block of ``size`` uniforms from counter ``start`` onward (compiled path)."""
    key = np.uint64(stream_key(check_seed(seed), int(index), int(lane)))
    out = np.empty(int(size), dtype=np.float64)
    _kernels.fill_uniforms(key, np.int64(start), out)
    return out
