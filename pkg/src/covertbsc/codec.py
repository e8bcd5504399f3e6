"""Codebook generation, encoding, minimum-distance decoding, reliability.

The message set is {0, 1, ..., N}: message 0 is always the implicit all-zero
codeword (silence), messages 1..N index the stored codewords.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .core import (Codeword, InfeasibleError, Seed, packed_nbytes, pad_mask,
                   popcount, rho_to_fraction)
from .channel import TRIAL_BLOCK, bernoulli_rows

MAX_CODEBOOK_SIZE = 1 << 24

# decode working-set cap (bytes) for the trials x codewords x nbytes xor cube
_DECODE_BUDGET = 1 << 26


@dataclass
class Codebook:
    """Ordered list of N nonzero-indexed codewords of common length n.

    `rows` is the packed N x ceil(n/8) bit matrix; row m-1 is message m.
    Duplicate rows are allowed (random generation may collide) and decoding
    errors between duplicates still count: errors are message-level.
    """

    n: int
    rows: np.ndarray
    rho: float | None = None
    seed_master: int | None = None
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        rows = np.ascontiguousarray(self.rows, dtype=np.uint8)
        if rows.ndim != 2 or rows.shape[1] != packed_nbytes(self.n):
            raise ValueError("codeword matrix shape %r does not match n=%d"
                             % (rows.shape, self.n))
        self.rows = rows & pad_mask(self.n)
        self.weights = popcount(self.rows).astype(np.int64)

    @property
    def num_codewords(self):
        return self.rows.shape[0]

    @property
    def throughput(self):
        """tau = log2(N)."""
        return math.log2(self.num_codewords)

    @property
    def relative_throughput(self):
        """r = tau / sqrt(n)."""
        return self.throughput / math.sqrt(self.n)

    def codeword(self, m: int) -> Codeword:
        return encode(self, m)

    def mean_weight_fraction(self):
        return float(self.weights.mean()) / self.n if self.num_codewords else 0.0

    # -- text format: header line then one big-endian hex row per codeword --

    def save(self, path):
        with open(path, "w") as fh:
            rho_s = "-" if self.rho is None else "%d/%d" % (
                rho_to_fraction(self.rho).numerator, rho_to_fraction(self.rho).denominator)
            seed_s = "-" if self.seed_master is None else str(self.seed_master)
            fh.write("%d %d %s %s\n" % (self.n, self.num_codewords, rho_s, seed_s))
            for row in self.rows:
                fh.write(row.tobytes().hex() + "\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            header = fh.readline().split()
            if len(header) != 4:
                raise ValueError("malformed codebook header: %r" % header)
            n, num = int(header[0]), int(header[1])
            rho = None if header[2] == "-" else float(Fraction(header[2]))
            seed_master = None if header[3] == "-" else int(header[3])
            nbytes = packed_nbytes(n)
            rows = np.empty((num, nbytes), dtype=np.uint8)
            for i in range(num):
                line = fh.readline().strip()
                raw = bytes.fromhex(line)
                if len(raw) != nbytes:
                    raise ValueError("codeword %d has %d bytes, expected %d"
                                     % (i + 1, len(raw), nbytes))
                rows[i] = np.frombuffer(raw, dtype=np.uint8)
        return cls(n=n, rows=rows, rho=rho, seed_master=seed_master)


def num_codewords_for(n: int, r: float) -> int:
    """N = round(2^(r sqrt(n))); the target count is treated as an integer."""
    return int(round(2.0 ** (r * math.sqrt(n))))


def generate_random_public(n, rho, seed, *, r=None, num_codewords=None,
                           max_codebook_size=MAX_CODEBOOK_SIZE) -> Codebook:
    """Codebook of i.i.d. Bernoulli(rho) bits, fully known to the observer.

    Exactly one of `r` (relative throughput, N = round(2^(r sqrt(n)))) and
    `num_codewords` must be given.
    """
    if n < 1:
        raise ValueError("block length must be positive")
    if not (0.0 <= rho <= 1.0):
        raise ValueError("rho must be in [0,1]")
    if (r is None) == (num_codewords is None):
        raise ValueError("give exactly one of r and num_codewords")
    N = num_codewords_for(n, r) if num_codewords is None else int(num_codewords)
    if N < 1:
        raise ValueError("need at least one codeword")
    if N > max_codebook_size:
        raise InfeasibleError("N=%d exceeds the configured maximum codebook "
                              "size %d" % (N, max_codebook_size))
    if rho in (0.0, 1.0):
        warnings.warn("rho=%g generates a degenerate constant codebook" % rho)
    seed = Seed(int(seed)) if not isinstance(seed, Seed) else seed
    rows = np.empty((N, packed_nbytes(n)), dtype=np.uint8)
    for block, start in enumerate(range(0, N, TRIAL_BLOCK)):
        stop = min(start + TRIAL_BLOCK, N)
        rows[start:stop] = bernoulli_rows(seed.stream("codebook", block),
                                          stop - start, n, rho)
    return Codebook(n=n, rows=rows, rho=float(rho), seed_master=seed.master)


def generate_constant_composition(n, k, num_codewords, seed) -> Codebook:
    """Codebook drawn uniformly (with replacement) from the weight-k shell."""
    if not (0 <= k <= n):
        raise InfeasibleError("weight k=%d outside 0..%d" % (k, n))
    if num_codewords < 1:
        raise ValueError("need at least one codeword")
    seed = Seed(int(seed)) if not isinstance(seed, Seed) else seed
    N = int(num_codewords)
    rows = np.empty((N, packed_nbytes(n)), dtype=np.uint8)
    for block, start in enumerate(range(0, N, TRIAL_BLOCK)):
        stop = min(start + TRIAL_BLOCK, N)
        rng = seed.stream("codebook-cc", block)
        # uniform weight-k rows: take the k smallest of n i.i.d. uniforms
        order = rng.random((stop - start, n)).argsort(axis=1)
        bits = np.zeros((stop - start, n), dtype=np.uint8)
        np.put_along_axis(bits, order[:, :k], 1, axis=1)
        rows[start:stop] = np.packbits(bits, axis=1)
    return Codebook(n=n, rows=rows, rho=None, seed_master=seed.master)


def encode(codebook: Codebook, m: int) -> Codeword:
    """Message 0 is silence (the zero vector); m in 1..N selects row m-1."""
    if not (0 <= m <= codebook.num_codewords):
        raise ValueError("message %d outside 0..%d" % (m, codebook.num_codewords))
    if m == 0:
        return Codeword.zero(codebook.n)
    return Codeword(codebook.n, codebook.rows[m - 1].copy())


def _tie_keys(codebook: Codebook):
    """Candidate order for min-distance ties: weight, then index; the zero
    codeword (index 0, weight 0) therefore wins every tie it is part of."""
    n, N = codebook.n, codebook.num_codewords
    weights = np.concatenate(([0], codebook.weights))
    idx = np.arange(N + 1, dtype=np.int64)
    return (weights * (N + 1) + idx), np.int64(n + 1) * (N + 1)


def _decode_block(y_rows, codebook, tie, dist_scale):
    T, nbytes = y_rows.shape
    # key = d * dist_scale + (weight * (N+1) + index): lexicographic argmin
    best = popcount(y_rows).astype(np.int64) * dist_scale + tie[0]
    N = codebook.num_codewords
    chunk = max(1, min(N, _DECODE_BUDGET // max(2 * T * nbytes, 1)))
    decoded = np.zeros(T, dtype=np.int64)
    for start in range(0, N, chunk):
        stop = min(start + chunk, N)
        diff = y_rows[:, None, :] ^ codebook.rows[None, start:stop, :]
        d = np.bitwise_count(diff).sum(axis=2, dtype=np.int64)
        keys = d * dist_scale + tie[None, start + 1:stop + 1]
        cand = keys.argmin(axis=1)
        cand_key = np.take_along_axis(keys, cand[:, None], axis=1)[:, 0]
        take = cand_key < best
        decoded[take] = start + 1 + cand[take]
        best = np.minimum(best, cand_key)
    return decoded


def decode_batch(y_rows: np.ndarray, codebook: Codebook) -> np.ndarray:
    """Minimum-distance decode of packed rows; returns messages in 0..N."""
    y_rows = np.atleast_2d(np.asarray(y_rows, dtype=np.uint8))
    if y_rows.shape[1] != packed_nbytes(codebook.n):
        raise ValueError("received rows do not match block length %d" % codebook.n)
    tie, dist_scale = _tie_keys(codebook)
    out = np.empty(y_rows.shape[0], dtype=np.int64)
    for start in range(0, y_rows.shape[0], TRIAL_BLOCK):
        stop = min(start + TRIAL_BLOCK, y_rows.shape[0])
        out[start:stop] = _decode_block(y_rows[start:stop], codebook, tie,
                                        dist_scale)
    return out


def decode_min_distance(y: Codeword, codebook: Codebook) -> int:
    """argmin over messages {0..N} of d_H(encode(m), y)."""
    if y.n != codebook.n:
        raise ValueError("length mismatch: %d vs %d" % (y.n, codebook.n))
    return int(decode_batch(y.packed[None, :], codebook)[0])


@dataclass(frozen=True)
class ReliabilityReport:
    """Monte-Carlo decoding-error estimates.

    p_e_overall follows the 2*P_e(0) + P_e(1) accounting, which folds the
    missed-message event into the silence error by a symmetry argument that
    holds for weight-then-index tie-breaking.  p_missed (the raw rate of
    decoding to 0 under T=1) and p_e_inclusive (= p_e0 + p_missed + p_e1,
    the event-complete accounting) are reported alongside so both readings
    are available.
    """

    p_e0: float
    p_e1: float
    p_missed: float
    p_e_overall: float
    p_e_inclusive: float
    trials: int
    half_width: dict

    def half_width_overall(self):
        return self.half_width["p_e_overall"]


def _hw(p, trials):
    return 1.96 * math.sqrt(max(p * (1.0 - p), 0.0) / trials)


def estimate_reliability(codebook: Codebook, p_b: float, trials: int,
                         seed) -> ReliabilityReport:
    """Simulate `trials` silent (T=0) and `trials` transmitting (T=1) uses.

    P_e(0) is the rate of nonzero decodes under silence; P_e(1) is the rate
    of wrong-nonzero decodes under a uniform message; the missed-message
    rate Pr(decode=0 | T=1) is reported separately.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    seed = Seed(int(seed)) if not isinstance(seed, Seed) else seed
    n, N = codebook.n, codebook.num_codewords
    mask = pad_mask(n)

    # stream block by block so memory stays bounded at large n * trials
    e0 = missed = wrong = 0
    for block, start in enumerate(range(0, trials, TRIAL_BLOCK)):
        count = min(start + TRIAL_BLOCK, trials) - start
        y0 = bernoulli_rows(seed.stream("relia-quiet", block), count, n, p_b) & mask
        e0 += int(np.count_nonzero(decode_batch(y0, codebook)))

        msgs = seed.stream("relia-msg", block).integers(1, N + 1, size=count)
        noise = bernoulli_rows(seed.stream("relia-send", block), count, n, p_b)
        y1 = (codebook.rows[msgs - 1] ^ noise) & mask
        dec = decode_batch(y1, codebook)
        missed += int(np.count_nonzero(dec == 0))
        wrong += int(np.count_nonzero((dec != 0) & (dec != msgs)))

    p_e0 = e0 / trials
    p_e1 = wrong / trials
    p_missed = missed / trials
    overall = 2.0 * p_e0 + p_e1
    inclusive = p_e0 + p_missed + p_e1
    hw = {
        "p_e0": _hw(p_e0, trials),
        "p_e1": _hw(p_e1, trials),
        "p_missed": _hw(p_missed, trials),
        "p_e_overall": 2.0 * _hw(p_e0, trials) + _hw(p_e1, trials),
        "p_e_inclusive": _hw(p_e0, trials) + _hw(p_missed + p_e1, trials),
    }
    return ReliabilityReport(p_e0=p_e0, p_e1=p_e1, p_missed=p_missed,
                             p_e_overall=overall, p_e_inclusive=inclusive,
                             trials=trials, half_width=hw)


@dataclass(frozen=True)
class WeightHistogram:
    """Counts of stored codewords by exact Hamming weight."""

    counts: dict

    def total(self):
        return sum(self.counts.values())

    def as_array(self, n):
        arr = np.zeros(n + 1, dtype=np.int64)
        for w, c in self.counts.items():
            arr[w] = c
        return arr


def weight_histogram(codebook: Codebook) -> WeightHistogram:
    values, counts = np.unique(codebook.weights, return_counts=True)
    return WeightHistogram({int(v): int(c) for v, c in zip(values, counts)})
