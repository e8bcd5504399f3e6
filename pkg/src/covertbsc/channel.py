"""Binary symmetric channel simulation and the exact output-weight law."""

from __future__ import annotations

import numpy as np
from scipy.stats import binom

from .core import Codeword, Seed, pack_bits, packed_nbytes, pad_mask

# Trials are drawn in fixed-size blocks, one labeled stream per block, so the
# noise consumed by trial i never depends on how many trials run before it.
TRIAL_BLOCK = 4096


def _resolve_rng(seed, purpose, index=0):
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, Seed):
        return seed.stream(purpose, index)
    return Seed(int(seed)).stream(purpose, index)


def bernoulli_rows(rng, trials, n, p):
    """trials x ceil(n/8) packed matrix of i.i.d. Bernoulli(p) rows."""
    bits = rng.random((trials, n)) < p
    return np.packbits(bits.astype(np.uint8), axis=1)


def transmit(x: Codeword, p: float, seed, *, purpose: str = "channel",
             index: int = 0) -> Codeword:
    """Send x through a BSC(p): returns x xor z with z i.i.d. Bernoulli(p)."""
    if not (0.0 <= p <= 1.0):
        raise ValueError("crossover probability must be in [0,1]")
    rng = _resolve_rng(seed, purpose, index)
    noise = pack_bits((rng.random(x.n) < p).astype(np.uint8))
    return Codeword(x.n, x.packed ^ noise)


def transmit_batch(x_packed, n, p, seed, trials, *, purpose="channel"):
    """Stack of `trials` independent channel outputs for one packed input row.

    Noise is drawn block by block from (seed, purpose, block_index) streams;
    the result is a trials x ceil(n/8) uint8 matrix.
    """
    seed = seed if isinstance(seed, Seed) else Seed(int(seed))
    nbytes = packed_nbytes(n)
    out = np.empty((trials, nbytes), dtype=np.uint8)
    mask = pad_mask(n)
    for block, start in enumerate(range(0, trials, TRIAL_BLOCK)):
        stop = min(start + TRIAL_BLOCK, trials)
        rng = seed.stream(purpose, block)
        noise = bernoulli_rows(rng, stop - start, n, p)
        out[start:stop] = (noise ^ x_packed) & mask
    return out


def output_weight_pmf(n: int, w: int, p: float) -> np.ndarray:
    """Exact pmf of the output Hamming weight for any weight-w input.

    The output weight decomposes as (w - B1) + B0 with B1 ~ Binomial(w, p)
    on the support of the input and B0 ~ Binomial(n-w, p) off it.  Both
    binomial pmfs are evaluated in log space (so nothing underflows at
    n ~ 1e4) and convolved exactly; the result sums to 1 within 1e-12.
    """
    if not (0 <= w <= n):
        raise ValueError("weight w=%d outside 0..%d" % (w, n))
    if not (0.0 <= p <= 1.0):
        raise ValueError("crossover probability must be in [0,1]")
    # survivors: pmf of w - B1 over {0..w}; off-support flips: B0 over {0..n-w}
    on = np.exp(binom.logpmf(np.arange(w, -1, -1), w, p))
    off = np.exp(binom.logpmf(np.arange(0, n - w + 1), n - w, p))
    pmf = np.convolve(on, off)
    return pmf / pmf.sum()
