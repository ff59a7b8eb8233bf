"""Fixed-point positions on the circle S^1 = [0, 1).

A CirclePoint stores a 128-bit binary window (the leading fractional bits of
the position) together with an immutable *tail*, a pure source for the bits
below the window. The point represented is

    x = (frac + t) / 2**128,   t in [0, 1) the tail's value.

The tail is what makes long doubling-map orbits honest: the doubling map
shifts the window left and pulls the next tail bit, so the orbit of a
random point is the exact orbit of the point whose binary expansion
continues with the tail stream. A plain 128-bit register would collapse to
0 after 128 doublings; floats collapse after ~50.

Three tail kinds cover every construction path:

  ZeroTail      dyadic rationals, exact.
  RationalTail  exact binary expansion of a rational remainder, so
                CirclePoint.from_fraction(1, 3) doubles to exactly 2/3.
  HashTail      keyed pseudo-random bits (BLAKE2b counter mode), pure
                function of (key, offset); this is the seed-controlled
                randomization of trailing bits for Lebesgue-random points.

All objects here are immutable; every operation returns fresh values, so
points are safely shareable across concurrent orbit tasks.
"""

from __future__ import annotations

import hashlib
from fractions import Fraction
from typing import NamedTuple

FRAC_BITS = 128
ONE = 1 << FRAC_BITS
HALF = ONE >> 1
_MASK = ONE - 1

_WORD_BITS = 64


class ZeroTail:
    """All bits zero. Shared singleton."""

    __slots__ = ()

    def take(self, k: int) -> tuple[int, "ZeroTail"]:
        return 0, self

    def take_bytes(self, nbytes: int):
        return bytes(nbytes), self

    def drop(self, k: int):
        return self

    def fingerprint(self) -> bytes:
        return b"z"


ZERO_TAIL = ZeroTail()


class RationalTail:
    """Binary expansion of num/den, 0 <= num < den."""

    __slots__ = ("num", "den")

    def __init__(self, num: int, den: int):
        self.num = num
        self.den = den

    def take(self, k: int) -> tuple[int, "ZeroTail | RationalTail"]:
        bits, rem = divmod(self.num << k, self.den)
        if rem == 0:
            return bits, ZERO_TAIL
        return bits, RationalTail(rem, self.den)

    def take_bytes(self, nbytes: int):
        bits, tail = self.take(nbytes * 8)
        return bits.to_bytes(nbytes, "big"), tail

    def drop(self, k: int):
        rem = (self.num << k) % self.den
        return ZERO_TAIL if rem == 0 else RationalTail(rem, self.den)

    def fingerprint(self) -> bytes:
        return b"r" + self.num.to_bytes(32, "little", signed=False)[:32] + self.den.to_bytes(32, "little")[:32]


class HashTail:
    """Pure keyed bit stream: word i is BLAKE2b(key, i), bits served MSB-first."""

    __slots__ = ("key", "offset")

    def __init__(self, key: bytes, offset: int = 0):
        self.key = key
        self.offset = offset

    def _word(self, i: int) -> int:
        h = hashlib.blake2b(self.key + i.to_bytes(8, "little"), digest_size=8)
        return int.from_bytes(h.digest(), "big")

    def take(self, k: int) -> tuple[int, "HashTail"]:
        w0, b0 = divmod(self.offset, _WORD_BITS)
        nwords = (b0 + k + _WORD_BITS - 1) // _WORD_BITS
        ba = bytearray()
        for i in range(w0, w0 + nwords):
            ba += self._word(i).to_bytes(8, "big")
        total = int.from_bytes(ba, "big")
        excess = nwords * _WORD_BITS - b0 - k
        return (total >> excess) & ((1 << k) - 1), HashTail(self.key, self.offset + k)

    def take_bytes(self, nbytes: int):
        bits, tail = self.take(nbytes * 8)
        return bits.to_bytes(nbytes, "big"), tail

    def drop(self, k: int):
        return HashTail(self.key, self.offset + k)

    def fingerprint(self) -> bytes:
        return b"h" + self.key + self.offset.to_bytes(8, "little")


class BitsTail:
    """A finite bit buffer in front of another tail (used by exact pullbacks)."""

    __slots__ = ("bits", "width", "rest")

    def __init__(self, bits: int, width: int, rest):
        self.bits = bits
        self.width = width
        self.rest = rest

    def take(self, k: int):
        if k <= self.width:
            hi = self.bits >> (self.width - k)
            w = self.width - k
            if w == 0:
                return hi, self.rest
            return hi, BitsTail(self.bits & ((1 << w) - 1), w, self.rest)
        extra, rest2 = self.rest.take(k - self.width)
        return (self.bits << (k - self.width)) | extra, rest2

    def take_bytes(self, nbytes: int):
        bits, tail = self.take(nbytes * 8)
        return bits.to_bytes(nbytes, "big"), tail

    def drop(self, k: int):
        return self.take(k)[1]

    def fingerprint(self) -> bytes:
        return b"b" + self.width.to_bytes(2, "little") + self.bits.to_bytes(16, "little") + self.rest.fingerprint()


class CirclePoint:
    """Immutable position on S^1 with >= 128 fractional bits."""

    __slots__ = ("frac", "tail")

    def __init__(self, frac: int, tail=ZERO_TAIL):
        self.frac = frac & _MASK
        self.tail = tail

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls) -> "CirclePoint":
        return cls(0, ZERO_TAIL)

    @classmethod
    def from_fraction(cls, num: int, den: int) -> "CirclePoint":
        """Exact rational point num/den mod 1."""
        if den <= 0:
            raise ValueError("denominator must be positive")
        num %= den
        frac, rem = divmod(num << FRAC_BITS, den)
        tail = ZERO_TAIL if rem == 0 else RationalTail(rem, den)
        return cls(frac, tail)

    @classmethod
    def from_float(cls, x: float) -> "CirclePoint":
        """Exact dyadic point at the float's value mod 1."""
        f = Fraction(float(x)) % 1
        return cls.from_fraction(f.numerator, f.denominator)

    @classmethod
    def random(cls, rng) -> "CirclePoint":
        """Lebesgue-random point: 128 random window bits + keyed random tail."""
        raw = rng.bytes(32)
        frac = int.from_bytes(raw[:16], "big")
        return cls(frac, HashTail(raw[16:]))

    @classmethod
    def dithered(cls, x: float, rng) -> "CirclePoint":
        """Float value with the trailing 64 bits (and tail) randomized.

        Perturbs x by less than 2^-64; this is the seeded construction the
        orbit generator uses for float starting points.
        """
        base = cls.from_float(x).frac
        raw = rng.bytes(24)
        low = int.from_bytes(raw[:8], "big")
        frac = (base & ~((1 << 64) - 1)) | low
        return cls(frac, HashTail(raw[8:]))

    # -- views -------------------------------------------------------------

    def to_float(self) -> float:
        return float(self.frac) * 2.0**-FRAC_BITS

    def frac_ext(self, extra: int = 64) -> int:
        """Window extended by `extra` tail bits (read-only, pure)."""
        bits, _ = self.tail.take(extra)
        return (self.frac << extra) | bits

    def fingerprint(self) -> bytes:
        return self.frac.to_bytes(16, "big") + self.tail.fingerprint()

    # -- arithmetic on the circle -------------------------------------------

    def double(self) -> "CirclePoint":
        """2x mod 1, exact: shifts the window and pulls one tail bit."""
        b, t2 = self.tail.take(1)
        return CirclePoint(((self.frac << 1) | b) & _MASK, t2)

    def halve(self, branch: int) -> "CirclePoint":
        """(x + branch)/2, exact: the dropped low bit is pushed onto the tail."""
        v = self.frac + (branch & 1) * ONE
        return CirclePoint(v >> 1, BitsTail(v & 1, 1, self.tail))

    def dist(self, other: "CirclePoint") -> float:
        """Circle distance, window precision."""
        d = (self.frac - other.frac) & _MASK
        d = min(d, ONE - d)
        return float(d) * 2.0**-FRAC_BITS

    def __eq__(self, other) -> bool:
        return isinstance(other, CirclePoint) and self.frac == other.frac

    def __hash__(self) -> int:
        return hash(self.frac)

    def __repr__(self) -> str:
        return f"CirclePoint({self.to_float():.17g})"


class TorusPoint(NamedTuple):
    """Point on T^2 as a coordinate pair; product maps act componentwise."""

    x: CirclePoint
    y: CirclePoint

    def to_floats(self) -> tuple[float, float]:
        return self.x.to_float(), self.y.to_float()


def circle_dist_float(a: float, b: float) -> float:
    """Circle distance for float representatives in [0, 1)."""
    d = abs(a - b) % 1.0
    return min(d, 1.0 - d)
