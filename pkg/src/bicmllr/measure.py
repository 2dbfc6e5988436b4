"""Monte-Carlo bit-channel capacity measure and its exact discrete oracle.

The accuracy measure of an approximate LLR function is the BICM capacity
functional evaluated with the approximate-LLR sample distributions; it is
maximized exactly by the true LLRs.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .constellation import bit_subset
from .fading import sample_use

__all__ = [
    "Estimate",
    "LlrSampleSet",
    "DiscreteChannel",
    "sample_llrs",
    "bit_capacity",
    "bicm_capacity",
    "discrete_capacity",
]

_LN2 = math.log(2.0)
_BLOCK = 1 << 18


class Estimate(NamedTuple):
    value: float
    stderr: float


def _softplus2(u):
    """log2(1 + e^u), stable for large |u|."""
    return np.logaddexp(0.0, u) / _LN2


@dataclass
class LlrSampleSet:
    """LLR samples conditioned on the transmitted bit value."""

    bit_index: int
    samples_b0: np.ndarray
    samples_b1: np.ndarray
    meta: dict

    def __post_init__(self):
        if len(self.samples_b0) == 0 or len(self.samples_b1) == 0:
            raise ValueError("sample lists must be non-empty")
        if len(self.samples_b0) != len(self.samples_b1):
            raise ValueError("conditioned sample lists must have equal length")
        if not (np.all(np.isfinite(self.samples_b0)) and np.all(np.isfinite(self.samples_b1))):
            raise ValueError("LLR samples must be finite (clipping missing?)")


def _conditioned_outputs(const, spec, i, b, n, rng):
    """n channel outputs with the transmitted point uniform over the bit subset."""
    sub = bit_subset(const, i, b)
    if const.is_real:
        sub = sub.real
    x = rng.choice(sub, n)
    return sample_use(spec, x, rng)


def draw_conditioned(const, spec, i, n, seed):
    """Per-bit-value demapper inputs ((u0, r0), (u1, r1)), n//2 draws each.

    Outputs are on the level-unit axis u = y/scale that LLR functions take.
    Deterministic in ``seed`` and independent of how callers consume the
    result; block partitioning keeps it reproducible under parallel use.
    """
    half = n // 2
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    seqs = seed.spawn(2)
    out = []
    for b, sq in zip((0, 1), seqs):
        rng = np.random.default_rng(sq)
        ys, rs = [], []
        for lo in range(0, half, _BLOCK):
            cnt = min(_BLOCK, half - lo)
            y, r = _conditioned_outputs(const, spec, i, b, cnt, rng)
            ys.append(y / const.scale)
            rs.append(r)
        out.append((np.concatenate(ys), np.concatenate(rs)))
    return tuple(out)


def sample_llrs(f, i, const, spec, n, seed):
    """Draw an LlrSampleSet for LLR function ``f`` on bit-channel i.

    n//2 trials per conditioned bit value; the fading gain is passed to f
    only in CSI mode.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    (y0, r0), (y1, r1) = draw_conditioned(const, spec, i, max(n, 2), seed)
    if getattr(f, "needs_csi", False):
        l0, l1 = f(y0, r0), f(y1, r1)
    else:
        l0, l1 = f(y0), f(y1)
    meta = {"snr_db": spec.snr_db, "k_factor": spec.fading.k_factor, "n": n, "seed": seed}
    return LlrSampleSet(i, np.asarray(l0, float), np.asarray(l1, float), meta)


def bit_capacity(s):
    """Bit-channel capacity estimate from conditioned LLR samples.

    C_i = 1 - (1/2) E0[log2(1+e^-l)] - (1/2) E1[log2(1+e^l)], with the
    standard error of the Monte-Carlo mean attached.
    """
    t0 = _softplus2(-s.samples_b0)
    t1 = _softplus2(s.samples_b1)
    value = 1.0 - 0.5 * t0.mean() - 0.5 * t1.mean()
    var = 0.25 * t0.var() / t0.size + 0.25 * t1.var() / t1.size
    return Estimate(float(value), float(np.sqrt(var)))


def bicm_capacity(fs, const, spec, n, seed):
    """Sum of per-bit capacities for one LLR function per bit channel.

    Returns (total Estimate, list of per-bit Estimates).  Per-bit sample
    seeds are spawned from ``seed`` so bit channels use independent draws.
    """
    if len(fs) != const.m:
        raise ValueError(f"need {const.m} LLR functions, got {len(fs)}")
    seeds = np.random.SeedSequence(seed).spawn(const.m)
    per_bit = []
    for i, (f, sq) in enumerate(zip(fs, seeds), start=1):
        s = sample_llrs(f, i, const, spec, n, sq)
        per_bit.append(bit_capacity(s))
    total = math.fsum(e.value for e in per_bit)
    stderr = math.sqrt(math.fsum(e.stderr**2 for e in per_bit))
    return Estimate(total, stderr), per_bit


@dataclass(frozen=True)
class DiscreteChannel:
    """Binary-input channel with M outputs: p_j = P(y_j|0), q_j = P(y_j|1)."""

    p: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        q = np.asarray(self.q, dtype=float)
        if p.shape != q.shape or p.ndim != 1:
            raise ValueError("p and q must be equal-length vectors")
        if np.any(p < 0) or np.any(q < 0):
            raise ValueError("probabilities must be nonnegative")
        if abs(p.sum() - 1.0) > 1e-12 or abs(q.sum() - 1.0) > 1e-12:
            raise ValueError("p and q must each sum to 1")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @property
    def M(self):
        return self.p.size

    def true_llrs(self):
        with np.errstate(divide="ignore"):
            return np.log(self.p) - np.log(self.q)

    def mutual_information(self):
        """Exact I(X;Y) with equiprobable inputs (direct sum, no LLRs)."""
        total = 0.0
        for w, cond in ((0.5, self.p), (0.5, self.q)):
            marg = 0.5 * (self.p + self.q)
            nz = cond > 0
            total += w * np.sum(cond[nz] * np.log2(cond[nz] / marg[nz]))
        return float(total)


def discrete_capacity(ch, a):
    """Exact capacity functional of assignment a_j on a discrete channel."""
    a = np.asarray(a, dtype=float)
    if a.shape != (ch.M,):
        raise ValueError(f"assignment must have length {ch.M}")
    return float(1.0 - 0.5 * np.sum(ch.p * _softplus2(-a) + ch.q * _softplus2(a)))
