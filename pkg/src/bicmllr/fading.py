"""Normalized Rician/Rayleigh fading model and channel likelihoods."""

import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, special

__all__ = [
    "FadingModel",
    "ChannelSpec",
    "rician_pdf",
    "sample_use",
    "likelihood_csi",
    "likelihood_nocsi",
    "QuadratureWarning",
]


class QuadratureWarning(UserWarning):
    """Raised when node doubling changes a quadrature result noticeably."""


def rician_pdf(r, k_factor):
    """Rician amplitude density with E[r^2] = 1.

    p(r) = 2r(K+1) exp(-(K+(K+1)r^2)) I0(2r sqrt(K(K+1))), evaluated with
    the exponentially scaled Bessel function so large arguments do not
    overflow.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("amplitude r must be nonnegative")
    if k_factor < 0:
        raise ValueError("Rician K-factor must be nonnegative")
    k = float(k_factor)
    z = 2.0 * r * np.sqrt(k * (k + 1.0))
    # I0(z) = ive(0, z) * exp(z); fold exp(z) into the main exponent
    out = 2.0 * r * (k + 1.0) * special.ive(0, z) * np.exp(z - k - (k + 1.0) * r * r)
    return out if out.shape else float(out)


@lru_cache(maxsize=32)
def _tail_rmax(k_factor):
    """Smallest grid value of r_max with Rician tail mass below 1e-12."""
    for rmax in np.arange(2.0, 30.0, 0.5):
        tail, _ = integrate.quad(lambda r: rician_pdf(r, k_factor), rmax, np.inf)
        if tail < 1e-12:
            return float(rmax)
    return 30.0


@dataclass(frozen=True)
class FadingModel:
    """Rician fading amplitude with K-factor ``k_factor`` (K=0 is Rayleigh)."""

    k_factor: float = 0.0

    def __post_init__(self):
        if self.k_factor < 0:
            raise ValueError("Rician K-factor must be nonnegative")

    def pdf(self, r):
        return rician_pdf(r, self.k_factor)

    def sample(self, n, rng):
        """Draw n amplitudes as |mu + scatter| with a complex Gaussian scatter.

        mu = sqrt(K/(K+1)) and per-dimension scatter variance 1/(2(K+1)),
        which reproduces the Rician density exactly with E[r^2] = 1.
        """
        k = self.k_factor
        mu = np.sqrt(k / (k + 1.0))
        s = np.sqrt(1.0 / (2.0 * (k + 1.0)))
        re = mu + s * rng.standard_normal(n)
        im = s * rng.standard_normal(n)
        return np.hypot(re, im)

    @property
    def r_max(self):
        """Upper integration limit keeping tail mass below 1e-12."""
        if self.k_factor == 0.0:
            return 8.0
        return _tail_rmax(round(float(self.k_factor), 12))


@dataclass(frozen=True)
class ChannelSpec:
    """Operating point: fading model, SNR, CSI flag and quadrature settings.

    SNR convention: snr_db = 10 log10(E[r^2] Es / N0) with unit-energy
    constellations, E[r^2] = 1 and N0 = 2 sigma^2, i.e.
    sigma2 = 10^(-snr_db/10) / 2 per real dimension.
    """

    fading: FadingModel
    snr_db: float
    csi: bool = False
    real_signal: bool = False
    quad_nodes: int = 200
    r_max: float = None

    def __post_init__(self):
        if self.r_max is None:
            object.__setattr__(self, "r_max", self.fading.r_max)

    @property
    def sigma2(self):
        return 10.0 ** (-self.snr_db / 10.0) / 2.0

    def quad_rule(self, nodes=None):
        """Gauss-Legendre nodes on [0, r_max] with weights folded with p(r)."""
        nodes = self.quad_nodes if nodes is None else nodes
        return _gl_rule(self.fading.k_factor, self.r_max, nodes)


@lru_cache(maxsize=64)
def _gl_rule(k_factor, r_max, nodes):
    x, w = np.polynomial.legendre.leggauss(nodes)
    r = 0.5 * r_max * (x + 1.0)
    wr = 0.5 * r_max * w * rician_pdf(r, k_factor)
    r.setflags(write=False)
    wr.setflags(write=False)
    return r, wr


def sample_use(spec, x, rng):
    """One (or a batch of) channel uses y = r*x + z.

    Returns (y, r).  ``x`` may be a scalar or an array; z is circular
    Gaussian with per-dimension variance sigma2, real-only when
    ``spec.real_signal``.
    """
    x = np.asarray(x)
    n = x.size
    r = spec.fading.sample(n, rng).reshape(x.shape)
    s = np.sqrt(spec.sigma2)
    if spec.real_signal:
        y = r * x.real + s * rng.standard_normal(x.shape)
    else:
        z = s * (rng.standard_normal(x.shape) + 1j * rng.standard_normal(x.shape))
        y = r * x + z
    if x.ndim == 0:
        return (complex(y) if not spec.real_signal else float(y)), float(r)
    return y, r


def likelihood_csi(y, x, r, sigma2, real_signal=False):
    """Gaussian channel likelihood p(y|x,r) with known fading gain."""
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    if real_signal:
        y = np.real(y)
        x = np.real(x)
        return np.exp(-((y - r * x) ** 2) / (2.0 * sigma2)) / np.sqrt(2.0 * np.pi * sigma2)
    d2 = np.abs(np.asarray(y) - r * np.asarray(x)) ** 2
    return np.exp(-d2 / (2.0 * sigma2)) / (2.0 * np.pi * sigma2)


def log_likelihood_nocsi(y, x, spec, nodes=None):
    """log p(y|x) = log ∫ p(y|x,r) p(r) dr by Gauss-Legendre on [0, r_max].

    Stable log-sum-exp over the quadrature nodes; vectorized over a flat
    ``y`` array for a single point ``x``.
    """
    r, wr = spec.quad_rule(nodes)
    s2 = spec.sigma2
    y = np.atleast_1d(np.asarray(y))
    if spec.real_signal:
        d2 = (np.real(y)[:, None] - r[None, :] * np.real(x)) ** 2
        log_norm = -0.5 * np.log(2.0 * np.pi * s2)
    else:
        d2 = np.abs(y[:, None] - r[None, :] * x) ** 2
        log_norm = -np.log(2.0 * np.pi * s2)
    expo = -d2 / (2.0 * s2) + np.log(wr)[None, :]
    mx = expo.max(axis=1)
    out = mx + np.log(np.exp(expo - mx[:, None]).sum(axis=1)) + log_norm
    return out


def likelihood_nocsi(y, x, spec, nodes=None, check_convergence=False):
    """p(y|x) without CSI, via fixed-node Gauss-Legendre quadrature.

    With ``check_convergence`` the node count is doubled and a
    QuadratureWarning is issued if the result moves by more than 1e-8
    relative.
    """
    scalar = np.isscalar(y) or np.asarray(y).ndim == 0
    val = np.exp(log_likelihood_nocsi(y, x, spec, nodes))
    if check_convergence:
        n = spec.quad_nodes if nodes is None else nodes
        val2 = np.exp(log_likelihood_nocsi(y, x, spec, 2 * n))
        rel = np.max(np.abs(val2 - val) / np.maximum(np.abs(val2), 1e-300))
        if rel > 1e-8:
            warnings.warn(
                f"quadrature not converged: node doubling moved result by {rel:.3g}",
                QuadratureWarning,
            )
    return float(val[0]) if scalar else val
