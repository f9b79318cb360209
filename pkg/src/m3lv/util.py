"""Shared helpers: seeded PRNG, hex formatting, logging setup.

The PRNG is splitmix64 so that any other implementation of this framework
can reproduce the exact stimulus streams from a seed.  Algorithm, applied
to a 64-bit state s:

    s     = (s + 0x9E3779B97F4A7C15) mod 2^64
    z     = s
    z     = (z XOR (z >> 30)) * 0xBF58476D1CE4E5B9   mod 2^64
    z     = (z XOR (z >> 27)) * 0x94D049BB133111EB   mod 2^64
    out   = z XOR (z >> 31)

Derived streams: fork(k) seeds a child generator with one splitmix step
of (seed XOR k * 0x9E3779B97F4A7C15), so substreams are stable no matter
how much the parent has been consumed.

Bounded draws use plain modulo (documented bias is irrelevant at our
range sizes); probability draws compare against an integer threshold so
no floating point enters the stimulus stream.
"""

from __future__ import annotations

import logging
import os

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


class Rng:
    """Deterministic splitmix64 stream with small convenience draws."""

    __slots__ = ("seed", "_state")

    def __init__(self, seed: int):
        self.seed = seed & _MASK64
        self._state = seed & _MASK64

    def u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        return _mix(self._state)

    def below(self, n: int) -> int:
        """Uniform-ish integer in [0, n)."""
        if n <= 0:
            raise ValueError("below() needs n >= 1")
        return self.u64() % n

    def between(self, lo: int, hi: int) -> int:
        """Integer in [lo, hi] inclusive."""
        return lo + self.below(hi - lo + 1)

    def chance(self, p: float) -> bool:
        """True with probability p (threshold fixed at fork time)."""
        return self.u64() < int(p * 2.0**64)

    def choice(self, seq):
        return seq[self.below(len(seq))]

    def weighted(self, names, weights) -> int:
        """Index into names drawn proportionally to weights (floats ok)."""
        total = 0.0
        for w in weights:
            total += w
        r = (self.u64() / 2.0**64) * total
        acc = 0.0
        for i, w in enumerate(weights):
            acc += w
            if r < acc:
                return i
        return len(weights) - 1

    def fork(self, k: int) -> "Rng":
        return Rng(_mix((self.seed ^ ((k * _GOLDEN) & _MASK64)) & _MASK64))


def hex32(v: int) -> str:
    return f"{v & 0xFFFFFFFF:08x}"


def hex16(v: int) -> str:
    return f"{v & 0xFFFF:04x}"


_LEVELS = {"quiet": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


def configure_logging() -> None:
    """Apply the M3LV_LOG environment variable to the package logger."""
    name = os.environ.get("M3LV_LOG", "quiet").strip().lower()
    level = _LEVELS.get(name, logging.WARNING)
    log = logging.getLogger("m3lv")
    if not log.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
        log.addHandler(handler)
    log.setLevel(level)


def get_logger(suffix: str) -> logging.Logger:
    return logging.getLogger(f"m3lv.{suffix}")
