"""Bit-vector primitives, channel parameters, and deterministic seeding.

Codewords are stored packed, one byte per 8 positions, with position 1 in
the most significant bit of byte 0 (the same layout ``np.packbits`` uses).
Weights and distances go through the hardware popcount ufunc, since exact
TV enumeration and million-trial Monte Carlo dominate runtime.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from fractions import Fraction

import numpy as np


class InfeasibleError(ValueError):
    """A precondition of an operation cannot be met with the given inputs."""


class ConfigError(ValueError):
    """An experiment configuration failed validation."""


# ---------------------------------------------------------------------------
# packed bit helpers (shared by all modules)
# ---------------------------------------------------------------------------

def packed_nbytes(n):
    return (n + 7) // 8


def pack_bits(bits):
    """Pack a 0/1 array (or iterable) into a uint8 row, MSB first."""
    arr = np.asarray(bits, dtype=np.uint8)
    if arr.ndim != 1:
        raise ValueError("pack_bits expects a 1-D bit array")
    if arr.size and arr.max() > 1:
        raise ValueError("bits must be 0/1")
    return np.packbits(arr)


def unpack_bits(packed, n):
    """Inverse of pack_bits; works on 1-D rows and 2-D row matrices."""
    return np.unpackbits(np.asarray(packed, dtype=np.uint8), axis=-1, count=n)


def pad_mask(n):
    """Byte mask that zeroes the unused trailing bits of the last byte."""
    mask = np.full(packed_nbytes(n), 0xFF, dtype=np.uint8)
    rem = n % 8
    if rem:
        mask[-1] = (0xFF << (8 - rem)) & 0xFF
    return mask


def popcount(packed):
    """Total set bits per row of a packed array (scalar for 1-D input)."""
    counts = np.bitwise_count(np.asarray(packed, dtype=np.uint8))
    return counts.sum(axis=-1, dtype=np.int64)


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Codeword:
    """A fixed-length binary vector (Alice's channel input)."""

    n: int
    packed: np.ndarray

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("block length must be positive")
        packed = np.ascontiguousarray(self.packed, dtype=np.uint8)
        if packed.shape != (packed_nbytes(self.n),):
            raise ValueError("packed storage has the wrong size for n=%d" % self.n)
        packed = packed & pad_mask(self.n)
        packed.setflags(write=False)
        object.__setattr__(self, "packed", packed)

    @classmethod
    def from_bits(cls, bits):
        bits = np.asarray(bits, dtype=np.uint8)
        return cls(bits.size, pack_bits(bits))

    @classmethod
    def zero(cls, n):
        return cls(n, np.zeros(packed_nbytes(n), dtype=np.uint8))

    @classmethod
    def ones(cls, n):
        return cls(n, np.full(packed_nbytes(n), 0xFF, dtype=np.uint8))

    def bits(self):
        return unpack_bits(self.packed, self.n)

    def weight(self):
        return int(popcount(self.packed))

    def __xor__(self, other):
        if self.n != other.n:
            raise ValueError("length mismatch: %d vs %d" % (self.n, other.n))
        return Codeword(self.n, self.packed ^ other.packed)

    def __eq__(self, other):
        return isinstance(other, Codeword) and self.n == other.n and \
            np.array_equal(self.packed, other.packed)

    def __hash__(self):
        return hash((self.n, self.packed.tobytes()))

    def to_hex(self):
        return self.packed.tobytes().hex()

    @classmethod
    def from_hex(cls, text, n):
        raw = bytes.fromhex(text)
        if len(raw) != packed_nbytes(n):
            raise ValueError("hex codeword has %d bytes, expected %d" %
                             (len(raw), packed_nbytes(n)))
        return cls(n, np.frombuffer(raw, dtype=np.uint8).copy())


def hamming_weight(x: Codeword) -> int:
    """Number of non-zero entries of x."""
    return x.weight()


def hamming_distance(x: Codeword, y: Codeword) -> int:
    """Number of positions in which x and y differ."""
    if x.n != y.n:
        raise ValueError("length mismatch: %d vs %d" % (x.n, y.n))
    return int(popcount(x.packed ^ y.packed))


def binary_convolution(a, b):
    """a*b = a(1-b) + b(1-a): crossover of two cascaded symmetric channels."""
    if not (0.0 <= a <= 1.0 and 0.0 <= b <= 1.0):
        raise ValueError("binary convolution needs probabilities in [0,1]")
    return a * (1.0 - b) + b * (1.0 - a)


@dataclass(frozen=True)
class ChannelParams:
    """Crossover probabilities of the two broadcast legs (p_b to the
    receiver, p_w to the observer)."""

    p_b: float
    p_w: float

    def __post_init__(self):
        for name in ("p_b", "p_w"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError("%s=%r outside [0,1]" % (name, v))

    def require_observer_noisier(self):
        """Achievability experiments assume p_b < p_w; converse-case studies
        may skip this check."""
        if not self.p_b < self.p_w:
            raise InfeasibleError(
                "requires p_b < p_w, got p_b=%r p_w=%r" % (self.p_b, self.p_w))


# ---------------------------------------------------------------------------
# deterministic randomness
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Seed:
    """Master seed plus labeled sub-streams.

    A stream is addressed by (master, purpose, index).  The triple is hashed
    into a PCG64 state, so draws are bit-identical no matter in which order
    streams are opened: parallel schedules cannot change results.
    """

    master: int

    def __post_init__(self):
        if not (0 <= self.master < 2**64):
            raise ValueError("master seed must be an unsigned 64-bit integer")

    def child(self, purpose: str, index: int = 0) -> int:
        digest = hashlib.blake2b(
            b"%d\x1f%s\x1f%d" % (self.master, purpose.encode("utf-8"), index),
            digest_size=16).digest()
        return int.from_bytes(digest, "big")

    def stream(self, purpose: str, index: int = 0) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.child(purpose, index)))

    def spawn(self, purpose: str, index: int = 0) -> "Seed":
        return Seed(self.child(purpose, index) % 2**64)


def as_seed(seed) -> Seed:
    if isinstance(seed, Seed):
        return seed
    return Seed(int(seed))


def rho_to_fraction(rho) -> Fraction:
    """Exact rational form of a generation parameter, for file round-trips."""
    return Fraction(rho) if isinstance(rho, Fraction) else Fraction(*float(rho).as_integer_ratio())
