"""Sampled (particle) density evolution with i.i.d. channel adapters.

Message densities are represented by particle populations instead of
quantized pdfs; piecewise linear LLR maps produce atoms and kinks that a
fixed binning would have to be designed around, while particles handle
them for free at the cost of O(1/sqrt(P)) noise.
"""

from dataclasses import dataclass

import numpy as np

from .fading import ChannelSpec, FadingModel
from .measure import _conditioned_outputs

__all__ = [
    "DePopulation",
    "de_channel_population",
    "de_iterate",
    "de_run",
    "find_threshold",
]

_MSG_CLIP = 50.0


@dataclass
class DePopulation:
    """Fixed-size particle population of (adapter-symmetrized) LLR messages."""

    samples: np.ndarray
    iteration: int = 0

    @property
    def size(self):
        return self.samples.size

    @property
    def error_rate(self):
        """Fraction of samples signalling a bit error; ties count as half."""
        s = self.samples
        return float(np.mean(s < 0) + 0.5 * np.mean(s == 0))


def de_channel_population(llr_fns, const, spec, population, seed):
    """Draw a symmetrized channel-LLR population of the given size.

    Bit positions are mixed uniformly (ideal interleaving), the transmitted
    bit is uniform, and each sample's sign is flipped when bit 1 was sent so
    the population is expressed for an adapter-equivalent zero bit.
    """
    if population < 10_000:
        raise ValueError("population must be at least 1e4")
    if len(llr_fns) != const.m:
        raise ValueError(f"need {const.m} LLR functions, got {len(llr_fns)}")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    i_pos = rng.integers(1, const.m + 1, population)
    b_val = rng.integers(0, 2, population)
    out = np.empty(population)
    for i in range(1, const.m + 1):
        for b in (0, 1):
            sel = np.flatnonzero((i_pos == i) & (b_val == b))
            if sel.size == 0:
                continue
            y, r = _conditioned_outputs(const, spec, i, b, sel.size, rng)
            u = y / const.scale
            f = llr_fns[i - 1]
            l = f(u, r) if getattr(f, "needs_csi", False) else f(u)
            out[sel] = l if b == 0 else -l
    return DePopulation(np.clip(out, -_MSG_CLIP, _MSG_CLIP))


def _check_combine(draws):
    """Tanh-rule combination along the last axis, sign/magnitude form.

    An exactly-zero input (an erasure) makes the combined message exactly
    zero, matching tanh(0) = 0; the magnitude floor only guards the log.
    """
    sign = np.where((draws < 0).sum(axis=-1) % 2 == 1, -1.0, 1.0)
    logt = np.log(np.tanh(0.5 * np.maximum(np.abs(draws), 1e-12))).sum(axis=-1)
    out = sign * 2.0 * np.arctanh(np.minimum(np.exp(logt), 1.0 - 1e-16))
    out[np.any(draws == 0.0, axis=-1)] = 0.0
    return out


def _degree_draws(rng, coeffs, population):
    """Edge-perspective degree per new sample (index i -> degree i+1)."""
    coeffs = np.asarray(coeffs, dtype=float)
    degs = np.arange(1, coeffs.size + 1)
    return rng.choice(degs, population, p=coeffs / coeffs.sum())


def de_iterate(pop, channel_pop, dv=None, dc=None, lam=None, rho=None,
               iterations=1, seed=0, target=None):
    """Run density-evolution iterations; returns the error-rate trajectory.

    Regular codes pass (dv, dc); irregular ensembles pass edge-perspective
    (lam, rho).  Each half-iteration resamples the incoming population with
    replacement.  ``pop`` is advanced in place; with ``target`` set the loop
    exits early once the error rate drops below it.
    """
    if (dv is None) != (dc is None) or (lam is None) != (rho is None):
        raise ValueError("pass both of (dv, dc) or both of (lam, rho)")
    if (dv is None) == (lam is None):
        raise ValueError("pass exactly one of (dv, dc) and (lam, rho)")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    p = pop.size
    ch = channel_pop.samples
    traj = []
    for _ in range(iterations):
        v = pop.samples
        # check-node half: combine (degree-1) variable messages per new sample
        if dc is not None:
            draws = v[rng.integers(0, p, (p, dc - 1))]
            c = _check_combine(draws)
        else:
            degs = _degree_draws(rng, rho, p)
            c = np.empty(p)
            for dj in np.unique(degs):
                sel = degs == dj
                cnt = int(sel.sum())
                c[sel] = _check_combine(v[rng.integers(0, p, (cnt, dj - 1))])
        # variable-node half: fresh channel draw plus (degree-1) check messages
        chan = ch[rng.integers(0, p if ch.size >= p else ch.size, p)]
        if dv is not None:
            add = c[rng.integers(0, p, (p, dv - 1))].sum(axis=-1)
        else:
            degs = _degree_draws(rng, lam, p)
            add = np.zeros(p)
            for di in np.unique(degs):
                sel = degs == di
                cnt = int(sel.sum())
                if di > 1:
                    add[sel] = c[rng.integers(0, p, (cnt, di - 1))].sum(axis=-1)
        pop.samples = np.clip(chan + add, -_MSG_CLIP, _MSG_CLIP)
        pop.iteration += 1
        traj.append(pop.error_rate)
        if target is not None and traj[-1] < target:
            break
    return traj


def de_run(llr_fns, const, spec, population, seed, dv=3, dc=4, lam=None, rho=None,
           max_iter=2000, target=1e-4):
    """One DE run at a fixed operating point; returns (success, trajectory)."""
    chan = de_channel_population(llr_fns, const, spec, population, seed)
    pop = DePopulation(chan.samples.copy())
    if lam is not None:
        dv = dc = None
    traj = de_iterate(pop, chan, dv=dv, dc=dc, lam=lam, rho=rho,
                      iterations=max_iter, seed=seed + 1 if isinstance(seed, int) else seed,
                      target=target)
    return traj[-1] < target, traj


def find_threshold(llr_source, const, k_factor, dv, dc, window_db, tol_db=0.05,
                   population=1_000_000, seed=0, max_iter=2000, target=1e-4):
    """Bisection on SNR for the asymptotic decoding threshold.

    ``llr_source`` is either a fixed list of per-bit LLR functions (e.g. a
    bound piecewise approximation, kept fixed across SNR) or a callable
    spec -> list rebuilding SNR-dependent functions such as true LLRs.
    ``window_db = (lo, hi)`` must bracket the threshold: failure at lo,
    success at hi.  The same seed is reused at every SNR point so compared
    thresholds share their randomness.
    """
    lo, hi = window_db

    def fns(spec):
        return llr_source(spec) if callable(llr_source) else llr_source

    def run(snr):
        spec = ChannelSpec(FadingModel(k_factor), snr, real_signal=const.is_real)
        ok, traj = de_run(fns(spec), const, spec, population, seed,
                          dv=dv, dc=dc, max_iter=max_iter, target=target)
        return ok, traj

    ok_lo, _ = run(lo)
    ok_hi, traj = run(hi)
    if ok_lo or not ok_hi:
        raise ValueError(
            f"window ({lo}, {hi}) dB does not bracket the threshold "
            f"(success at {lo}: {ok_lo}, at {hi}: {ok_hi})"
        )
    evals = 2
    while hi - lo > tol_db:
        mid = 0.5 * (lo + hi)
        ok, t = run(mid)
        evals += 1
        if ok:
            hi = mid
            traj = t
        else:
            lo = mid
    return {
        "trajectory": traj,
        "threshold_db": 0.5 * (lo + hi),
        "window_db": (lo, hi),
        "population": population,
        "criterion": {"target": target, "max_iter": max_iter},
        "evaluations": evals,
    }
