"""Counter-based random streams keyed by (global seed, level, destination node).

Every random decision in the samplers is drawn from a stream whose key is a
pure function of ``(global_seed, level, dst_global_id)`` and whose draws are a
pure function of ``(key, counter)``.  Call order, thread count, and process
placement therefore cannot change any sampled edge: the fused and two-step
kernels consume identical draws, and a remote machine sampling on behalf of a
peer reproduces exactly what a single-process run would have produced.

The mixer is the splitmix64 finalizer (a bijection on 64-bit words), applied
to an additive counter walk.  A scalar Python implementation and a vectorized
numpy implementation coexist and are tested for bit equality.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

# Domain salts keep sampling streams and epoch-shuffle streams disjoint.
_DOMAIN_SAMPLE = 0x53414D50
_DOMAIN_SHUFFLE = 0x53485546


def mix64(x: int) -> int:
    """Splitmix64 finalizer on a Python int, mod 2**64."""
    z = x & _MASK
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


def mix64_array(x: np.ndarray) -> np.ndarray:
    """Vectorized splitmix64 finalizer; ``x`` must be uint64."""
    z = x.astype(np.uint64, copy=True)
    z ^= z >> np.uint64(30)
    z *= np.uint64(_MIX1)
    z ^= z >> np.uint64(27)
    z *= np.uint64(_MIX2)
    z ^= z >> np.uint64(31)
    return z


def bounded(x: int, m: int) -> int:
    """Map a 64-bit draw onto [0, m) using the top 32 bits; m must fit 32 bits."""
    return ((x >> 32) * m) >> 32


def bounded_array(x: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Vectorized :func:`bounded`; both arguments uint64."""
    return ((x >> np.uint64(32)) * m) >> np.uint64(32)


class Stream:
    """A scalar draw stream: the i-th draw is mix64(key + (i+1)*GOLDEN)."""

    __slots__ = ("key", "counter")

    def __init__(self, key: int):
        self.key = key & _MASK
        self.counter = 0

    def next_u64(self) -> int:
        self.counter += 1
        return mix64((self.key + self.counter * _GOLDEN) & _MASK)

    def next_below(self, m: int) -> int:
        """Next draw mapped to [0, m)."""
        return bounded(self.next_u64(), m)


@dataclass(frozen=True)
class SamplerRng:
    """Root of all sampling randomness.

    ``choose`` selects the neighbor-selection policy: "uniform" draws without
    replacement, "first_k" deterministically takes the first stored neighbors
    (a test mode that makes minibatches hand-traceable).
    """

    global_seed: int
    choose: str = "uniform"

    def __post_init__(self):
        if self.choose not in ("uniform", "first_k"):
            raise ParameterError(f"unknown choose policy: {self.choose!r}")

    def _base(self, domain: int) -> int:
        return mix64((mix64(self.global_seed) + domain * _GOLDEN) & _MASK)

    def stream_key(self, level: int, node: int) -> int:
        """Key of the draw stream for destination ``node`` at ``level``."""
        k1 = (self._base(_DOMAIN_SAMPLE) + (level + 1) * _GOLDEN) & _MASK
        return mix64((mix64(k1) + (node + 1) * _GOLDEN) & _MASK)

    def stream_keys(self, level: int, nodes: np.ndarray) -> np.ndarray:
        """Vectorized :meth:`stream_key` for an int64 node array."""
        k1 = (self._base(_DOMAIN_SAMPLE) + (level + 1) * _GOLDEN) & _MASK
        base = np.uint64(mix64(k1))
        keys = nodes.astype(np.uint64) + np.uint64(1)
        keys *= np.uint64(_GOLDEN)
        keys += base
        return mix64_array(keys)

    def stream(self, level: int, node: int) -> Stream:
        return Stream(self.stream_key(level, node))

    def draws(self, level: int, nodes: np.ndarray, counter: int) -> np.ndarray:
        """The ``counter``-th draw (0-based) of every node's stream, uint64."""
        keys = self.stream_keys(level, nodes)
        return mix64_array(keys + np.uint64((counter + 1) * _GOLDEN & _MASK))

    def permutation(self, n: int, epoch: int) -> np.ndarray:
        """A deterministic permutation of arange(n), fresh per (seed, epoch).

        Implemented as an argsort of per-position keyed draws; collisions
        among 64-bit keys are negligible and broken stably by position.
        """
        k1 = (self._base(_DOMAIN_SHUFFLE) + (epoch + 1) * _GOLDEN) & _MASK
        key = np.uint64(mix64(k1))
        idx = np.arange(1, n + 1, dtype=np.uint64)
        idx *= np.uint64(_GOLDEN)
        idx += key
        return np.argsort(mix64_array(idx), kind="stable")
