"""Bit-channel LLR functions: exact, log-sum approximate, and piecewise linear.

All callables map channel outputs to clipped LLR values and are vectorized
over numpy arrays.  CSI variants additionally take the realized fading gain.

Every LLR function takes its input on the integer-level axis u = y/d, where
d is the constellation grid spacing (so 8-AM points sit at +-1..+-7).  LLR
values are invariant under this common rescaling of output and noise, and it
is the axis on which the piecewise linear parameters are naturally quoted.
"""

import dataclasses
import json
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .fading import log_likelihood_nocsi

__all__ = [
    "LLR_CLIP",
    "TrueCsiLlr",
    "TrueNoCsiLlr",
    "LogSumCsiLlr",
    "LogSumNoCsiLlr",
    "Region",
    "PiecewiseLinearLLR",
    "make_template_8am",
    "make_template_16qam",
    "bind_templates",
    "params_to_json",
    "params_from_json",
    "TabulatedLlr",
    "tabulate_true_nocsi",
]

LLR_CLIP = 50.0

_CHUNK = 1 << 16


def _clip(l):
    return np.clip(l, -LLR_CLIP, LLR_CLIP)


class TrueCsiLlr:
    """Exact bit LLR with known fading gain (log-sum-exp over subsets)."""

    needs_csi = True

    def __init__(self, const, bit_index, sigma2):
        self.const = const
        self.bit_index = bit_index
        self.sigma2 = sigma2
        self._i0 = const.subset_indices(bit_index, 0)
        self._i1 = const.subset_indices(bit_index, 1)

    def __call__(self, y, r):
        y = np.atleast_1d(np.asarray(y)) * self.const.scale
        r = np.broadcast_to(np.asarray(r, dtype=float), y.shape)
        pts = self.const.points
        if self.const.is_real:
            d2 = (np.real(y)[..., None] - r[..., None] * pts.real[None, :]) ** 2
        else:
            d2 = np.abs(y[..., None] - r[..., None] * pts[None, :]) ** 2
        expo = -d2 / (2.0 * self.sigma2)
        l = logsumexp(expo[..., self._i0], axis=-1) - logsumexp(expo[..., self._i1], axis=-1)
        return _clip(l)


class TrueNoCsiLlr:
    """Exact bit LLR without CSI; reference for all no-CSI experiments.

    Each subset likelihood is a quadrature integral over the fading gain,
    accumulated in the log domain.
    """

    needs_csi = False

    def __init__(self, const, bit_index, spec):
        self.const = const
        self.bit_index = bit_index
        self.spec = spec
        self._i0 = const.subset_indices(bit_index, 0)
        self._i1 = const.subset_indices(bit_index, 1)

    def __call__(self, y, r=None):
        y = np.atleast_1d(np.asarray(y))
        flat = y.ravel() * self.const.scale
        out = np.empty(flat.shape, dtype=float)
        for lo in range(0, flat.size, _CHUNK):
            blk = flat[lo : lo + _CHUNK]
            lp = np.stack(
                [log_likelihood_nocsi(blk, xp, self.spec) for xp in self.const.points],
                axis=1,
            )
            out[lo : lo + blk.size] = logsumexp(lp[:, self._i0], axis=1) - logsumexp(
                lp[:, self._i1], axis=1
            )
        return _clip(out.reshape(y.shape))


class LogSumCsiLlr:
    """Log-sum (max) approximation of the CSI LLR; piecewise linear in y."""

    needs_csi = True

    def __init__(self, const, bit_index, sigma2):
        self.const = const
        self.bit_index = bit_index
        self.sigma2 = sigma2
        self._i0 = const.subset_indices(bit_index, 0)
        self._i1 = const.subset_indices(bit_index, 1)

    def __call__(self, y, r):
        y = np.atleast_1d(np.asarray(y)) * self.const.scale
        r = np.broadcast_to(np.asarray(r, dtype=float), y.shape)
        pts = self.const.points
        if self.const.is_real:
            d2 = (np.real(y)[..., None] - r[..., None] * pts.real[None, :]) ** 2
        else:
            d2 = np.abs(y[..., None] - r[..., None] * pts[None, :]) ** 2
        expo = -d2 / (2.0 * self.sigma2)
        return _clip(expo[..., self._i0].max(axis=-1) - expo[..., self._i1].max(axis=-1))


class LogSumNoCsiLlr:
    """Log-sum approximation of the no-CSI LLR (max over integrated likelihoods)."""

    needs_csi = False

    def __init__(self, const, bit_index, spec):
        self.const = const
        self.bit_index = bit_index
        self.spec = spec
        self._i0 = const.subset_indices(bit_index, 0)
        self._i1 = const.subset_indices(bit_index, 1)

    def __call__(self, y, r=None):
        y = np.atleast_1d(np.asarray(y))
        flat = y.ravel() * self.const.scale
        lp = np.stack(
            [log_likelihood_nocsi(flat, xp, self.spec) for xp in self.const.points],
            axis=1,
        )
        l = lp[:, self._i0].max(axis=1) - lp[:, self._i1].max(axis=1)
        return _clip(l.reshape(y.shape))


# --------------------------------------------------------------------------
# Piecewise linear family
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Region:
    """Axis-aligned region lo < coord <= hi in each dimension.

    Half-open on the left so boundary points belong to the left/lower region.
    """

    re_lo: float = -np.inf
    re_hi: float = np.inf
    im_lo: float = -np.inf
    im_hi: float = np.inf

    def mask(self, y):
        u = np.real(y)
        v = np.imag(y)
        return (
            (self.re_lo < u) & (u <= self.re_hi) & (self.im_lo < v) & (v <= self.im_hi)
        )


class UnboundParameterError(RuntimeError):
    pass


@dataclass(frozen=True)
class PiecewiseLinearLLR:
    """Piecewise linear LLR family with parameter tying and continuity built in.

    Region k carries an affine map <a_k, y> + b_k whose coefficients are an
    affine function of the free parameter vector theta:
        a_k = tie_a[k] @ theta + tie_a0[k]      (a_k is the 2-vector (re, im))
        b_k = tie_b[k] @ theta + tie_b0[k]
    Symmetry tying and linear continuity constraints are encoded in these
    matrices, so every theta yields a continuous function.  Region
    thresholds (e.g. the bit-3 breakpoint of 8-AM) are boundary parameters:
    changing one rebuilds the template via ``with_boundary``.
    """

    name: str
    bit_index: int
    regions: tuple
    param_names: tuple
    tie_a: np.ndarray   # (N, 2, P)
    tie_a0: np.ndarray  # (N, 2)
    tie_b: np.ndarray   # (N, P)
    tie_b0: np.ndarray  # (N,)
    boundary_names: tuple = ()
    boundaries: tuple = ()
    theta: np.ndarray = None

    needs_csi = False

    @property
    def n_regions(self):
        return len(self.regions)

    @property
    def n_params(self):
        return len(self.param_names)

    @property
    def is_bound(self):
        return self.theta is not None

    # -- binding ------------------------------------------------------------

    def with_boundary(self, **values):
        """Rebuild the template at new boundary-parameter values."""
        if not self.boundary_names:
            raise ValueError(f"template {self.name} has no boundary parameters")
        bmap = dict(zip(self.boundary_names, self.boundaries))
        for k, v in values.items():
            if k not in bmap:
                raise KeyError(f"unknown boundary parameter {k!r}")
            bmap[k] = float(v)
        rebuilt = self._rebuild(bmap)
        if self.theta is not None:
            rebuilt = dataclasses.replace(rebuilt, theta=self.theta)
        return rebuilt

    def _rebuild(self, bmap):
        # only the shipped 8-AM bit-3 template has a boundary parameter
        return _build_8am_bit3(bmap["c1_3"])

    def bind(self, params):
        """Bind free parameters from a flat {name: value} dict or a vector.

        Boundary parameters present in a dict are applied first.  Redundant
        tied values (e.g. b2_3) are accepted and checked for consistency.
        """
        if isinstance(params, dict):
            tmpl = self
            bvals = {k: params[k] for k in self.boundary_names if k in params}
            if bvals:
                tmpl = self.with_boundary(**bvals)
            theta = np.array([float(params[n]) for n in tmpl.param_names])
            bound = dataclasses.replace(tmpl, theta=theta)
            bound._check_redundant(params)
            return bound
        theta = np.asarray(params, dtype=float)
        if theta.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got {theta.shape}")
        return dataclasses.replace(self, theta=theta)

    def _check_redundant(self, params):
        if "b2_3" in params and self.name == "8am_bit3":
            a1, a2, b1 = self.theta
            c1 = self.boundaries[0]
            implied = b1 + c1 * (a1 - a2)
            if abs(params["b2_3"] - implied) > 0.01:
                raise ValueError(
                    f"b2_3={params['b2_3']} violates the continuity constraint "
                    f"(implied {implied:.4f})"
                )

    def param_dict(self):
        if not self.is_bound:
            raise UnboundParameterError(f"template {self.name} is unbound")
        out = dict(zip(self.param_names, (float(t) for t in self.theta)))
        out.update(zip(self.boundary_names, self.boundaries))
        return out

    # -- evaluation ---------------------------------------------------------

    def region_index(self, y):
        """Index of the unique region containing each y."""
        y = np.atleast_1d(np.asarray(y))
        idx = np.full(y.shape, -1, dtype=int)
        for k, reg in enumerate(self.regions):
            m = reg.mask(y)
            idx[m & (idx >= 0)] = -2  # overlapping regions would trip the check
            idx[m & (idx == -1)] = k
        if np.any(idx < 0):
            raise RuntimeError("region partition is not total/disjoint")
        return idx

    def coefficients(self, theta=None):
        """Per-region (a_k, b_k) at the given (or bound) parameter vector."""
        theta = self._theta(theta)
        a = self.tie_a @ theta + self.tie_a0
        b = self.tie_b @ theta + self.tie_b0
        return a, b

    def design(self, y):
        """Design matrix Phi and offset psi with value(y) = Phi @ theta + psi.

        The value is affine in theta for fixed regions, which is what makes
        the capacity objective concave.
        """
        y = np.atleast_1d(np.asarray(y))
        k = self.region_index(y)
        yv = np.stack([np.real(y), np.imag(y)], axis=-1)  # (..., 2)
        phi = np.einsum("...d,...dp->...p", yv, self.tie_a[k]) + self.tie_b[k]
        psi = np.einsum("...d,...d->...", yv, self.tie_a0[k]) + self.tie_b0[k]
        return phi, psi

    def evaluate(self, y, theta=None, clip=True):
        theta = self._theta(theta)
        phi, psi = self.design(y)
        val = phi @ theta + psi
        return _clip(val) if clip else val

    def __call__(self, y, r=None):
        return self.evaluate(y)

    def _theta(self, theta):
        if theta is not None:
            return np.asarray(theta, dtype=float)
        if self.theta is None:
            raise UnboundParameterError(f"template {self.name} is unbound")
        return self.theta

    # -- diagnostics --------------------------------------------------------

    def continuity_residual(self, theta=None, probes=(-1.0, 0.0, 1.0)):
        """Max value jump across interior region boundaries (should be ~0)."""
        theta = self._theta(theta)
        a, b = self.coefficients(theta)
        worst = 0.0

        def val(k, u, v):
            return a[k, 0] * u + a[k, 1] * v + b[k]

        for j, rj in enumerate(self.regions):
            for k, rk in enumerate(self.regions):
                if j == k:
                    continue
                if np.isfinite(rj.re_hi) and rj.re_hi == rk.re_lo:
                    lo = max(rj.im_lo, rk.im_lo)
                    hi = min(rj.im_hi, rk.im_hi)
                    if lo < hi:
                        for t in probes:
                            v = np.clip(t, lo + 1e-9 if np.isfinite(lo) else t,
                                        hi if np.isfinite(hi) else t)
                            worst = max(worst, abs(val(j, rj.re_hi, v) - val(k, rj.re_hi, v)))
                if np.isfinite(rj.im_hi) and rj.im_hi == rk.im_lo:
                    lo = max(rj.re_lo, rk.re_lo)
                    hi = min(rj.re_hi, rk.re_hi)
                    if lo < hi:
                        for t in probes:
                            u = np.clip(t, lo + 1e-9 if np.isfinite(lo) else t,
                                        hi if np.isfinite(hi) else t)
                            worst = max(worst, abs(val(j, u, rj.im_hi) - val(k, u, rj.im_hi)))
        return worst


def _template(name, bit, regions, names, tie_a, tie_b, tie_a0=None, tie_b0=None,
              boundary_names=(), boundaries=()):
    n = len(regions)
    p = len(names)
    tie_a = np.asarray(tie_a, dtype=float).reshape(n, 2, p)
    tie_b = np.asarray(tie_b, dtype=float).reshape(n, p)
    tie_a0 = np.zeros((n, 2)) if tie_a0 is None else np.asarray(tie_a0, float)
    tie_b0 = np.zeros(n) if tie_b0 is None else np.asarray(tie_b0, float)
    for arr in (tie_a, tie_b, tie_a0, tie_b0):
        arr.setflags(write=False)
    return PiecewiseLinearLLR(
        name, bit, tuple(regions), tuple(names), tie_a, tie_a0, tie_b, tie_b0,
        tuple(boundary_names), tuple(boundaries),
    )


def _build_8am_bit3(c1):
    if not c1 < 0:
        raise ValueError(f"bit-3 breakpoint must be negative, got {c1}")
    regions = [
        Region(re_hi=c1),
        Region(re_lo=c1, re_hi=0.0),
        Region(re_lo=0.0, re_hi=-c1),
        Region(re_lo=-c1),
    ]
    # theta = (a1_3, a2_3, b1_3); b2 = b1 + c1 (a1 - a2) by continuity
    tie_a = [
        [[1, 0, 0], [0, 0, 0]],
        [[0, 1, 0], [0, 0, 0]],
        [[0, -1, 0], [0, 0, 0]],
        [[-1, 0, 0], [0, 0, 0]],
    ]
    tie_b = [
        [0, 0, 1],
        [c1, -c1, 1],
        [c1, -c1, 1],
        [0, 0, 1],
    ]
    return _template("8am_bit3", 3, regions, ("a1_3", "a2_3", "b1_3"),
                     tie_a, tie_b, boundary_names=("c1_3",), boundaries=(float(c1),))


def make_template_8am(i, c1_3=-3.0):
    """Piecewise linear LLR template for 8-AM bit i (free parameters unbound).

    Bit 1: a1_1 * y.  Bit 2: -a1_2 |y| + b1_2.  Bit 3: the symmetric
    four-region form with breakpoint c1_3 < 0 and continuity eliminating b2_3.
    """
    if i == 1:
        return _template("8am_bit1", 1, [Region()], ("a1_1",),
                         [[[1], [0]]], [[0]])
    if i == 2:
        regions = [Region(re_hi=0.0), Region(re_lo=0.0)]
        tie_a = [[[1, 0], [0, 0]], [[-1, 0], [0, 0]]]
        tie_b = [[0, 1], [0, 1]]
        return _template("8am_bit2", 2, regions, ("a1_2", "b1_2"), tie_a, tie_b)
    if i == 3:
        return _build_8am_bit3(c1_3)
    raise IndexError(f"8-AM bit index must be 1..3, got {i}")


def make_template_16qam(i):
    """Piecewise linear LLR template for 16-QAM bit i.

    Bits 1/2 act on Re{y}; bits 3/4 are the same functions with real and
    imaginary parts swapped and share the same free parameters.
    """
    quads = [
        Region(re_hi=0.0, im_hi=0.0),
        Region(re_hi=0.0, im_lo=0.0),
        Region(re_lo=0.0, im_hi=0.0),
        Region(re_lo=0.0, im_lo=0.0),
    ]
    if i == 1:
        return _template("16qam_bit1", 1, [Region()], ("a1_1",),
                         [[[1], [0]]], [[0]])
    if i == 3:
        return _template("16qam_bit3", 3, [Region()], ("a1_1",),
                         [[[0], [1]]], [[0]])
    if i == 2:
        # value = re_a1_2 |Re y| + im_a1_2 |Im y| + b1_2 over the quadrants
        tie_a = [
            [[-1, 0, 0], [0, -1, 0]],
            [[-1, 0, 0], [0, 1, 0]],
            [[1, 0, 0], [0, -1, 0]],
            [[1, 0, 0], [0, 1, 0]],
        ]
        tie_b = [[0, 0, 1]] * 4
        return _template("16qam_bit2", 2, quads, ("re_a1_2", "im_a1_2", "b1_2"),
                         tie_a, tie_b)
    if i == 4:
        # swapped arguments: re_a1_2 |Im y| + im_a1_2 |Re y| + b1_2
        tie_a = [
            [[0, -1, 0], [-1, 0, 0]],
            [[0, -1, 0], [1, 0, 0]],
            [[0, 1, 0], [-1, 0, 0]],
            [[0, 1, 0], [1, 0, 0]],
        ]
        tie_b = [[0, 0, 1]] * 4
        return _template("16qam_bit4", 4, quads, ("re_a1_2", "im_a1_2", "b1_2"),
                         tie_a, tie_b)
    raise IndexError(f"16-QAM bit index must be 1..4, got {i}")


def make_template(const_name, i, **kwargs):
    if const_name == "8am":
        return make_template_8am(i, **kwargs)
    if const_name == "16qam":
        return make_template_16qam(i)
    raise ValueError(f"no templates for constellation {const_name!r}")


def bind_templates(const_name, params):
    """Bind one template per bit position from a flat parameter dict."""
    m = {"8am": 3, "16qam": 4}[const_name]
    return [make_template(const_name, i + 1).bind(params) for i in range(m)]


def params_to_json(params, path=None, **meta):
    """Serialize a flat parameter dict (plus optional metadata) to JSON."""
    doc = {k: float(v) for k, v in params.items()}
    if meta:
        doc["_meta"] = meta
    text = json.dumps(doc, indent=2, sort_keys=True)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    return text


def params_from_json(source):
    """Load a flat parameter dict from a JSON string or file path."""
    if isinstance(source, str) and source.lstrip().startswith("{"):
        doc = json.loads(source)
    else:
        with open(source) as fh:
            doc = json.load(fh)
    doc.pop("_meta", None)
    return {k: float(v) for k, v in doc.items()}


# --------------------------------------------------------------------------
# Tabulated fast path for the exact no-CSI LLR
# --------------------------------------------------------------------------


class TabulatedLlr:
    """Grid-sampled stand-in for an exact LLR function (linear interpolation).

    Used for Monte-Carlo mass evaluation where direct quadrature per sample
    would dominate the runtime; accuracy against the direct evaluator is
    checked in the test suite.  Queries outside the grid clamp to the edge.
    """

    needs_csi = False

    def __init__(self, bit_index, grid_re, values, grid_im=None):
        self.bit_index = bit_index
        self.grid_re = grid_re
        self.grid_im = grid_im
        self.values = values

    def __call__(self, y, r=None):
        y = np.atleast_1d(np.asarray(y))
        if self.grid_im is None:
            return np.interp(np.real(y), self.grid_re, self.values)
        u = np.clip(np.real(y), self.grid_re[0], self.grid_re[-1])
        v = np.clip(np.imag(y), self.grid_im[0], self.grid_im[-1])
        return _bilinear(self.grid_re, self.grid_im, self.values, u, v)


def _bilinear(gx, gy, table, u, v):
    hx = gx[1] - gx[0]
    hy = gy[1] - gy[0]
    fx = np.clip((u - gx[0]) / hx, 0, len(gx) - 1 - 1e-12)
    fy = np.clip((v - gy[0]) / hy, 0, len(gy) - 1 - 1e-12)
    ix = fx.astype(int)
    iy = fy.astype(int)
    tx = fx - ix
    ty = fy - iy
    return (
        table[ix, iy] * (1 - tx) * (1 - ty)
        + table[ix + 1, iy] * tx * (1 - ty)
        + table[ix, iy + 1] * (1 - tx) * ty
        + table[ix + 1, iy + 1] * tx * ty
    )


def tabulate_true_nocsi(const, spec, step=None, extent=None):
    """Tabulate the exact no-CSI LLR of every bit on a shared y grid.

    Returns a list of m TabulatedLlr objects.  The per-point likelihood
    tables are shared across bits, which is what makes this fast for QAM.
    """
    d = const.scale
    sigma = np.sqrt(spec.sigma2)
    max_lvl = float(np.max(np.abs(const.levels)))
    if extent is None:
        # level-unit extent covering r_max times the outermost point plus noise
        extent = spec.r_max * max_lvl + 8.0 * sigma / d
    if const.is_real:
        h = (min(0.005, sigma / 8.0) / d) if step is None else step
        grid = np.arange(-extent, extent + h, h)
        lp = np.stack(
            [log_likelihood_nocsi(grid * d, xp, spec) for xp in const.points], axis=1
        )
        out = []
        for i in range(1, const.m + 1):
            i0 = const.subset_indices(i, 0)
            i1 = const.subset_indices(i, 1)
            vals = _clip(logsumexp(lp[:, i0], axis=1) - logsumexp(lp[:, i1], axis=1))
            out.append(TabulatedLlr(i, grid, vals))
        return out

    h = (min(0.02, sigma / 8.0) / d) if step is None else step
    grid = np.arange(-extent, extent + h, h)
    ygrid = grid * d
    r, wr = spec.quad_rule()
    s2 = spec.sigma2
    num = [np.zeros((grid.size, grid.size)) for _ in range(const.m)]
    den = [np.zeros((grid.size, grid.size)) for _ in range(const.m)]
    bits = np.stack([const.bit_values(i + 1) for i in range(const.m)])
    for k, xp in enumerate(const.points):
        # separable Gaussian factors turn the quadrature into a rank-200 product
        a = wr[:, None] * np.exp(-((ygrid[None, :] - r[:, None] * xp.real) ** 2) / (2 * s2))
        b = np.exp(-((ygrid[None, :] - r[:, None] * xp.imag) ** 2) / (2 * s2))
        p = a.T @ b  # (re, im) likelihood of point k, up to the 1/(2 pi s2) norm
        for i in range(const.m):
            (num if bits[i, k] == 0 else den)[i] += p
    out = []
    for i in range(const.m):
        vals = _clip(
            np.log(np.maximum(num[i], 1e-300)) - np.log(np.maximum(den[i], 1e-300))
        )
        out.append(TabulatedLlr(i + 1, grid, vals, grid_im=grid))
    return out


def true_nocsi_functions(const, spec, tabulated=True):
    """One no-CSI true-LLR function per bit, tabulated for speed by default."""
    if tabulated:
        return tabulate_true_nocsi(const, spec)
    return [TrueNoCsiLlr(const, i, spec) for i in range(1, const.m + 1)]


# Functional wrappers used by the CLI and tests.

def true_llr_csi(y, r, i, const, sigma2):
    return TrueCsiLlr(const, i, sigma2)(y, r)


def true_llr_nocsi(y, i, const, spec):
    return TrueNoCsiLlr(const, i, spec)(y)


def logsum_llr(y, r, i, const, spec):
    """Log-sum LLR; CSI variant when r is given, no-CSI otherwise."""
    if r is None:
        return LogSumNoCsiLlr(const, i, spec)(y)
    return LogSumCsiLlr(const, i, spec.sigma2)(y, r)
