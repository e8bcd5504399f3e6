"""The observer's estimators and their evaluation.

Three estimator families are provided: a weight-threshold rule with a
closed-form optimal threshold, the likelihood-ratio test against the known
codebook, and a per-codeword weight-anchored rule.  `evaluate_detector`
measures (false alarm, missed detection) for any of them by Monte Carlo.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .core import Codeword, InfeasibleError, Seed, binary_convolution, \
    packed_nbytes, popcount
from .channel import TRIAL_BLOCK, bernoulli_rows
from .codec import Codebook

_LRT_BUDGET = 1 << 24  # float64 cells in the trials x codewords distance block

DETECTOR_NAMES = ("threshold", "lrt", "weight-anchored")


# ---------------------------------------------------------------------------
# threshold estimator
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ThresholdPlan:
    """Closed-form design of the weight-threshold rule for inputs of weight
    fraction rho0: alarm when the observed 1-fraction S >= p_w + t.

    A = p_w(1-p_w), B = (p_w*rho0)(1 - p_w*rho0), C = rho0(1-2 p_w); the
    bound on alpha + beta as a function of the offset t is
    f(t) = (A t^-2 + B (C-t)^-2) / n, minimized at t_hat.
    """

    p_w: float
    rho0: float
    A: float
    B: float
    C: float
    t_hat: float

    def f(self, t, n):
        t = np.asarray(t, dtype=float)
        return (self.A / t**2 + self.B / (self.C - t) ** 2) / n

    def f_of_t_hat(self, n):
        return float(self.f(self.t_hat, n))


def optimal_threshold(p_w: float, rho0: float) -> ThresholdPlan:
    """Interior minimizer t_hat = C / ((B/A)^(1/3) + 1) of the two-sided
    Chebyshev bound f(t)."""
    if not (0.0 < p_w < 0.5):
        raise InfeasibleError(
            "no finite interior optimum: need 0 < p_w < 1/2, got %r" % (p_w,))
    if not (0.0 < rho0 <= 1.0):
        raise ValueError("rho0 must be in (0,1], got %r" % (rho0,))
    A = p_w * (1.0 - p_w)
    s = binary_convolution(p_w, rho0)
    B = s - s * s
    C = rho0 * (1.0 - 2.0 * p_w)
    t_hat = C / ((B / A) ** (1.0 / 3.0) + 1.0)
    return ThresholdPlan(p_w=p_w, rho0=rho0, A=A, B=B, C=C, t_hat=t_hat)


def threshold_estimate(y: Codeword, p_w: float, t: float) -> int:
    """1 iff the observed 1-fraction S = wt(y)/n is at least p_w + t."""
    if t < 0:
        raise ValueError("threshold offset must be nonnegative")
    return int(y.weight() / y.n >= p_w + t)


def chebyshev_bounds(p_w: float, rho0: float, t: float, n: int):
    """Two-sided variance bounds on (false alarm, missed detection) of the
    threshold rule at offset t, for inputs of weight fraction rho0."""
    C = rho0 * (1.0 - 2.0 * p_w)
    if not (0.0 < t < C):
        raise InfeasibleError("need 0 < t < C = rho0(1-2p_w) = %r, got t=%r"
                              % (C, t))
    alpha_bound = p_w * (1.0 - p_w) / (n * t * t)
    s = binary_convolution(p_w, rho0)
    beta_bound = (s - s * s) / (n * (rho0 - 2.0 * p_w * rho0 - t) ** 2)
    return alpha_bound, beta_bound


# ---------------------------------------------------------------------------
# likelihood-ratio estimator
# ---------------------------------------------------------------------------

def _log_ratio_rows(y_rows, codebook, p_w):
    """log Pr_s(y) - log Pr_w(y) per packed row, computed in log space.

    Pr_w is the product Bernoulli(p_w) law; Pr_s is the uniform codebook
    mixture, with per-codeword terms p_w^d (1-p_w)^(n-d).
    """
    n, N = codebook.n, codebook.num_codewords
    lp, lq = math.log(p_w), math.log1p(-p_w)
    slope = lp - lq  # log-likelihood per disagreeing position
    y_rows = np.atleast_2d(y_rows)
    T = y_rows.shape[0]
    out = np.empty(T, dtype=float)
    rows_per = max(1, _LRT_BUDGET // max(N, 1))
    for start in range(0, T, rows_per):
        stop = min(start + rows_per, T)
        diff = y_rows[start:stop, None, :] ^ codebook.rows[None, :, :]
        d = np.bitwise_count(diff).sum(axis=2, dtype=np.int64)
        # both hypotheses share the n*log(1-p) baseline, so it cancels here
        out[start:stop] = logsumexp(d * slope, axis=1) - math.log(N) \
            - popcount(y_rows[start:stop]) * slope
    return out


def lrt_estimate(y: Codeword, codebook: Codebook, p_w: float) -> int:
    """1 iff Pr_s(y) > Pr_w(y); ties resolve to 0 (favoring deniability)."""
    if y.n != codebook.n:
        raise ValueError("length mismatch: %d vs %d" % (y.n, codebook.n))
    if not (0.0 < p_w < 1.0):
        raise ValueError("p_w must be in (0,1) for a likelihood ratio")
    return int(_log_ratio_rows(y.packed[None, :], codebook, p_w)[0] > 0.0)


# ---------------------------------------------------------------------------
# weight-anchored estimator
# ---------------------------------------------------------------------------

def make_delta_fn(spec):
    """Normalize a delta specification (constant or weight -> value table)."""
    if callable(spec):
        return spec
    if isinstance(spec, dict):
        table = {int(k): float(v) for k, v in spec.items()}
        return lambda w: table[w]
    const = float(spec)
    return lambda w: const


def _support_zero_counts(y_rows, codebook):
    """Per (row, codeword) count of support positions where y reads 0,
    i.e. wt(x) - |supp(x) and supp(y)|."""
    diff = y_rows[:, None, :] & codebook.rows[None, :, :]
    overlap = np.bitwise_count(diff).sum(axis=2, dtype=np.int64)
    return codebook.weights[None, :] - overlap


def weight_anchored_estimate(y: Codeword, codebook: Codebook, p_w: float,
                             delta_fn) -> int:
    """1 iff some codeword x shows fewer than (1+delta(wt(x))) p_w wt(x)
    flipped positions on its support.

    The flip count on supp(x) is the number of zeros of y there (a
    transmitted 1 that arrives flipped reads 0), which under transmission
    of x is Binomial(wt(x), p_w).
    """
    if y.n != codebook.n:
        raise ValueError("length mismatch: %d vs %d" % (y.n, codebook.n))
    delta_fn = make_delta_fn(delta_fn)
    zeros = _support_zero_counts(y.packed[None, :], codebook)[0]
    for w, z in zip(codebook.weights, zeros):
        if z < (1.0 + delta_fn(int(w))) * p_w * w:
            return 1
    return 0


def _weight_anchored_rows(y_rows, codebook, p_w, delta_fn):
    delta_fn = make_delta_fn(delta_fn)
    thresholds = np.array([(1.0 + delta_fn(int(w))) * p_w * w
                           for w in codebook.weights])
    zeros = _support_zero_counts(y_rows, codebook)
    return (zeros < thresholds[None, :]).any(axis=1).astype(np.int64)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DetectorReport:
    """(false alarm, missed detection) estimates with 95% half-widths."""

    alpha: float
    beta: float
    trials: int
    half_widths: dict
    per_weight_beta: dict | None = None

    @property
    def alpha_plus_beta(self):
        return self.alpha + self.beta

    def sum_half_width(self):
        return self.half_widths["alpha"] + self.half_widths["beta"]


def _resolve_batch_detector(detector, codebook, p_w, t=None, delta_fn=None):
    """Map a detector handle to a vectorized rows -> {0,1} decisions fn."""
    if callable(detector):
        n = codebook.n
        def rows_fn(y_rows):
            return np.array([detector(Codeword(n, row.copy())) for row in y_rows])
        return rows_fn
    if detector == "threshold":
        if t is None:
            raise ValueError("threshold detector needs an offset t")
        cut = p_w + t
        return lambda y_rows: (popcount(y_rows) / codebook.n >= cut).astype(np.int64)
    if detector == "lrt":
        return lambda y_rows: (_log_ratio_rows(y_rows, codebook, p_w) > 0.0).astype(np.int64)
    if detector == "weight-anchored":
        if delta_fn is None:
            raise ValueError("weight-anchored detector needs a delta function")
        return lambda y_rows: _weight_anchored_rows(y_rows, codebook, p_w, delta_fn)
    raise ValueError("unknown detector %r (expected one of %s or a callable)"
                     % (detector, ", ".join(DETECTOR_NAMES)))


def evaluate_detector(detector, codebook: Codebook, p_w: float, trials: int,
                      seed, *, t=None, delta_fn=None,
                      per_weight=False) -> DetectorReport:
    """Monte-Carlo (alpha, beta) of a detector against a codebook.

    alpha is the alarm rate on pure-noise observations; beta is the silence
    rate when a uniformly chosen codeword is transmitted through BSC(p_w).
    With per_weight=True, beta is additionally split by codeword weight.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    seed = Seed(int(seed)) if not isinstance(seed, Seed) else seed
    n, N = codebook.n, codebook.num_codewords
    decide = _resolve_batch_detector(detector, codebook, p_w, t=t,
                                     delta_fn=delta_fn)

    alarms = 0
    silences = 0
    hits_by_w = {}
    sent_by_w = {}
    for block, start in enumerate(range(0, trials, TRIAL_BLOCK)):
        count = min(start + TRIAL_BLOCK, trials) - start
        noise0 = bernoulli_rows(seed.stream("det-quiet", block), count, n, p_w)
        alarms += int(decide(noise0).sum())

        msgs = seed.stream("det-msg", block).integers(1, N + 1, size=count)
        noise1 = bernoulli_rows(seed.stream("det-send", block), count, n, p_w)
        y1 = codebook.rows[msgs - 1] ^ noise1
        quiet = decide(y1) == 0
        silences += int(quiet.sum())
        if per_weight:
            for w, q in zip(codebook.weights[msgs - 1], quiet):
                w = int(w)
                sent_by_w[w] = sent_by_w.get(w, 0) + 1
                hits_by_w[w] = hits_by_w.get(w, 0) + int(q)

    alpha = alarms / trials
    beta = silences / trials
    hw = {
        "alpha": 1.96 * math.sqrt(max(alpha * (1 - alpha), 0.0) / trials),
        "beta": 1.96 * math.sqrt(max(beta * (1 - beta), 0.0) / trials),
    }
    per_w = None
    if per_weight:
        per_w = {w: hits_by_w[w] / sent_by_w[w] for w in sorted(sent_by_w)}
    return DetectorReport(alpha=alpha, beta=beta, trials=trials,
                          half_widths=hw, per_weight_beta=per_w)
