"""Counter-based random streams.

Every draw is a pure function of ``(seed, stream id, counter)``, so a
component's draws can be regenerated in any order by any worker without
sharing generator state.  The mixing function is the SplitMix64 finalizer.
"""

from __future__ import annotations

import hashlib
import math

import numpy as np

MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_INV53 = 1.0 / (1 << 53)


def mix64(z: int) -> int:
    z = (z + _GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def stream_key(seed: int, stream_id) -> int:
    """Derive the 64-bit key of a stream from a seed and an id.

    Integer ids are used directly; anything else (strings, tuples) is
    hashed through its ``repr`` so the mapping is stable across runs.
    """
    if isinstance(stream_id, int) and not isinstance(stream_id, bool):
        ident = stream_id & MASK64
    else:
        digest = hashlib.blake2b(repr(stream_id).encode(), digest_size=8).digest()
        ident = int.from_bytes(digest, "little")
    return mix64(mix64(seed & MASK64) ^ ident)


class RandomStream:
    """Reproducible uniform/exponential draws keyed by ``(seed, id, counter)``.

    >>> a = RandomStream(7, "x"); b = RandomStream(7, "x")
    >>> a.uniform() == b.uniform()
    True
    """

    __slots__ = ("seed", "stream_id", "key", "counter")

    def __init__(self, seed: int, stream_id=0, counter: int = 0):
        self.seed = seed
        self.stream_id = stream_id
        self.key = stream_key(seed, stream_id)
        self.counter = counter

    def bits_at(self, counter: int) -> int:
        return mix64((self.key + counter * _GAMMA) & MASK64)

    def uniform_at(self, counter: int) -> float:
        """Raw draw in [0, 1) at an absolute counter position (no state change)."""
        return (self.bits_at(counter) >> 11) * _INV53

    def uniform(self) -> float:
        """Next draw strictly inside (0, 1); zero is re-drawn."""
        # inlined uniform_at: this is the hot path of every model
        while True:
            z = (self.key + (self.counter + 1) * _GAMMA) & MASK64
            self.counter += 1
            z = ((z ^ (z >> 30)) * _M1) & MASK64
            z = ((z ^ (z >> 27)) * _M2) & MASK64
            q = ((z ^ (z >> 31)) >> 11) * _INV53
            if q > 0.0:
                return q

    def exponential(self, rate: float) -> float:
        return exp_sample(self, rate)

    def randbelow(self, n: int) -> int:
        if n <= 0:
            raise ValueError("n must be positive")
        return min(int(self.uniform() * n), n - 1)

    def uniform_array(self, n: int) -> np.ndarray:
        """Vectorised equivalent of ``n`` raw draws starting at the counter.

        Unlike :meth:`uniform`, zeros are not re-drawn (probability 2**-53
        per draw); callers that need the open interval must guard.
        """
        c = np.arange(self.counter, self.counter + n, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            z = np.uint64(self.key) + c * np.uint64(_GAMMA)
            z = z + np.uint64(_GAMMA)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
            z = z ^ (z >> np.uint64(31))
        return (z >> np.uint64(11)).astype(np.float64) * _INV53

    def spawn(self, sub_id) -> "RandomStream":
        return RandomStream(self.seed, (self.stream_id, sub_id))

    def __repr__(self):
        return f"RandomStream(seed={self.seed}, id={self.stream_id!r}, counter={self.counter})"


def exp_from_uniform(q: float, rate: float) -> float:
    """Invert a uniform draw into an exponential interarrival: ``-ln(q)/rate``."""
    if not rate > 0:
        raise ValueError(f"rate must be positive, got {rate}")
    if not 0.0 < q < 1.0:
        raise ValueError(f"uniform draw must lie in (0, 1), got {q}")
    return -math.log(q) / rate


def exp_sample(stream: RandomStream, rate: float) -> float:
    if not rate > 0:
        raise ValueError(f"rate must be positive, got {rate}")
    while True:
        q = stream.uniform()
        if q < 1.0:
            return -math.log(q) / rate


class PoissonClock:
    """Arrival times of a rate-``rate`` Poisson process for one component.

    Interarrivals come from the stream ``(seed, ("clock", component))`` and
    are accumulated from ``start``.  Any engine that builds the same clock
    sees bit-identical arrival times, whatever order it consumes them in.
    """

    __slots__ = ("stream", "rate", "time", "index")

    def __init__(self, seed: int, component, rate: float, start: float = 0.0):
        self.stream = RandomStream(seed, ("clock", component))
        self.rate = float(rate)
        self.index = 0
        self.time = start + exp_sample(self.stream, rate) if rate > 0 else math.inf

    def advance(self) -> float:
        """Move to the next arrival and return it."""
        self.index += 1
        if self.rate > 0:
            self.time = self.time + exp_sample(self.stream, self.rate)
        return self.time


def event_stream(seed: int, component, index: int) -> RandomStream:
    """Draws private to event number ``index`` of ``component``."""
    return RandomStream(seed, ("event", component, index))
