"""LDPC code construction, BICM transmit chain, and sum-product decoding.

Codes are stored as flat edge arrays (check index, variable index).  The
decoder is a flooding sum-product in sign/magnitude form, vectorized over
edges and optionally over a batch of frames.
"""

from dataclasses import dataclass, field

import numpy as np

from .fading import sample_use

__all__ = [
    "LdpcCode",
    "BicmFrame",
    "construct_regular",
    "rate_from_distributions",
    "read_alist",
    "write_alist",
    "transmit_frame",
    "demap_frame",
    "bp_decode",
    "bp_decode_batch",
    "encode_random",
    "count_4cycles",
    "ber_sim",
]

_MAG_FLOOR = 1e-12
_MSG_CLIP = 50.0


@dataclass
class LdpcCode:
    """Sparse parity-check structure as an edge list."""

    n: int
    n_checks: int
    check_idx: np.ndarray   # (E,) sorted by (check, var)
    var_idx: np.ndarray     # (E,)
    dv: int = None          # regular degrees when applicable
    dc: int = None
    four_cycles_remaining: int = 0
    _g: np.ndarray = field(default=None, repr=False)  # cached systematic encoder

    @property
    def n_edges(self):
        return self.check_idx.size

    @property
    def rate(self):
        return 1.0 - self.n_checks / self.n

    def h_matrix(self):
        h = np.zeros((self.n_checks, self.n), dtype=np.uint8)
        h[self.check_idx, self.var_idx] = 1
        return h

    def syndrome(self, bits):
        """H @ bits mod 2; works on (n,) or batched (..., n) arrays."""
        bits = np.asarray(bits)
        starts = np.searchsorted(self.check_idx, np.arange(self.n_checks))
        vals = bits[..., self.var_idx].astype(np.int64)
        return (np.add.reduceat(vals, starts, axis=-1) % 2).astype(np.uint8)


def _sort_edges(check_idx, var_idx):
    order = np.lexsort((var_idx, check_idx))
    return check_idx[order], var_idx[order]


def count_4cycles(code):
    """Number of check pairs sharing two variables (exhaustive scan)."""
    pairs = {}
    count = 0
    boundaries = np.searchsorted(code.check_idx, np.arange(code.n_checks + 1))
    for c in range(code.n_checks):
        vs = np.sort(code.var_idx[boundaries[c]:boundaries[c + 1]])
        for a in range(len(vs)):
            for b in range(a + 1, len(vs)):
                key = (int(vs[a]), int(vs[b]))
                if key in pairs:
                    count += 1
                else:
                    pairs[key] = c
    return count


def construct_regular(n, dv, dc, seed):
    """Random (dv,dc)-regular code via socket pairing.

    Parallel edges are removed by resampling swaps; 4-cycles are broken by
    greedy edge swaps (up to 100 passes).  Deterministic given the seed.
    """
    if (n * dv) % dc != 0:
        raise ValueError(f"n*dv = {n * dv} not divisible by dc = {dc}")
    n_checks = n * dv // dc
    rng = np.random.default_rng(seed)
    var_sock = np.repeat(np.arange(n), dv)
    chk_sock = np.repeat(np.arange(n_checks), dc)
    perm = rng.permutation(n * dv)
    check_idx, var_idx = chk_sock, var_sock[perm]

    def dup_mask(ci, vi):
        key = ci.astype(np.int64) * n + vi
        order = np.argsort(key)
        dup = np.zeros(key.size, dtype=bool)
        srt = key[order]
        dup[order[1:]] = srt[1:] == srt[:-1]
        return dup

    for _ in range(200):
        dup = dup_mask(check_idx, var_idx)
        if not dup.any():
            break
        bad = np.flatnonzero(dup)
        swap = rng.integers(0, check_idx.size, bad.size)
        for e, t in zip(bad, swap):  # scalar swaps keep the socket multiset intact
            var_idx[e], var_idx[t] = var_idx[t], var_idx[e]
    else:
        raise RuntimeError("could not remove parallel edges")

    check_idx, var_idx = _sort_edges(check_idx, var_idx)

    # greedy 4-cycle breaking: swap one edge of each offending pair
    remaining = 0
    for _ in range(100):
        pairs = {}
        offender = []
        boundaries = np.searchsorted(check_idx, np.arange(n_checks + 1))
        for c in range(n_checks):
            vs = var_idx[boundaries[c]:boundaries[c + 1]]
            svs = np.sort(vs)
            for a in range(len(svs)):
                for b in range(a + 1, len(svs)):
                    key = (int(svs[a]), int(svs[b]))
                    if key in pairs:
                        # swap the edge (c, svs[b]) with a random edge
                        eidx = boundaries[c] + int(np.flatnonzero(vs == svs[b])[0])
                        offender.append(eidx)
                    else:
                        pairs[key] = c
        if not offender:
            remaining = 0
            break
        swap = rng.integers(0, check_idx.size, len(offender))
        for e, t in zip(offender, swap):
            var_idx[e], var_idx[t] = var_idx[t], var_idx[e]
        # swaps may recreate parallel edges; clean them up again
        for _ in range(200):
            dup = dup_mask(check_idx, var_idx)
            if not dup.any():
                break
            bad = np.flatnonzero(dup)
            sw = rng.integers(0, check_idx.size, bad.size)
            for e, t in zip(bad, sw):
                var_idx[e], var_idx[t] = var_idx[t], var_idx[e]
        check_idx, var_idx = _sort_edges(check_idx, var_idx)
        remaining = len(offender)
    return LdpcCode(n, n_checks, check_idx, var_idx, dv=dv, dc=dc,
                    four_cycles_remaining=remaining)


def rate_from_distributions(lam, rho):
    """Design rate from edge-perspective degree distributions.

    ``lam[i]``/``rho[i]`` is the fraction of edges attached to degree-(i+1)
    variable/check nodes; R = 1 - (sum rho_j/j)/(sum lam_i/i).
    """
    lam = np.asarray(lam, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if np.any(lam < 0) or np.any(rho < 0):
        raise ValueError("degree distribution coefficients must be nonnegative")
    if abs(lam.sum() - 1.0) > 1e-9 or abs(rho.sum() - 1.0) > 1e-9:
        raise ValueError("degree distributions must each sum to 1")
    degs_l = np.arange(1, lam.size + 1)
    degs_r = np.arange(1, rho.size + 1)
    return 1.0 - (rho / degs_r).sum() / ((lam / degs_l).sum())


def write_alist(code, path):
    """Write the parity-check matrix in alist text format."""
    h = code.h_matrix()
    m, n = h.shape
    col_deg = h.sum(axis=0)
    row_deg = h.sum(axis=1)
    lines = [f"{n} {m}", f"{col_deg.max()} {row_deg.max()}"]
    lines.append(" ".join(str(int(d)) for d in col_deg))
    lines.append(" ".join(str(int(d)) for d in row_deg))
    for j in range(n):
        nz = np.flatnonzero(h[:, j]) + 1
        lines.append(" ".join(map(str, nz)))
    for i in range(m):
        nz = np.flatnonzero(h[i, :]) + 1
        lines.append(" ".join(map(str, nz)))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_alist(path):
    with open(path) as fh:
        tok = fh.read().split("\n")
    n, m = map(int, tok[0].split())
    check_idx, var_idx = [], []
    row_lines = tok[4 + n : 4 + n + m]
    for i, line in enumerate(row_lines):
        for v in line.split():
            v = int(v)
            if v > 0:  # alist pads irregular rows with zeros
                check_idx.append(i)
                var_idx.append(v - 1)
    ci, vi = _sort_edges(np.array(check_idx), np.array(var_idx))
    return LdpcCode(n, m, ci, vi)


# --------------------------------------------------------------------------
# Systematic encoding (dense GF(2) elimination, cached)
# --------------------------------------------------------------------------


def _systematic_form(code):
    """Column permutation + generator so codeword = [info | parity][inv perm]."""
    h = code.h_matrix().astype(np.uint8)
    m, n = h.shape
    perm = np.arange(n)
    row = 0
    for col in range(n):
        if row >= m:
            break
        piv = np.flatnonzero(h[row:, perm[col]])
        if piv.size == 0:
            # push dependent column to the back
            nz = None
            for c2 in range(col + 1, n):
                if np.any(h[row:, perm[c2]]):
                    nz = c2
                    break
            if nz is None:
                break
            perm[col], perm[nz] = perm[nz], perm[col]
            piv = np.flatnonzero(h[row:, perm[col]])
        p = row + piv[0]
        if p != row:
            h[[row, p]] = h[[p, row]]
        mask = h[:, perm[col]].astype(bool)
        mask[row] = False
        h[mask] ^= h[row]
        row += 1
    rank = row
    # parity columns first `rank` of perm; info columns the rest
    par_cols = perm[:rank]
    info_cols = perm[rank:]
    a = h[:rank][:, info_cols]  # parity = A @ info mod 2
    return rank, par_cols, info_cols, a


def encode_random(code, rng, batch=1):
    """Random codewords via cached systematic encoding; shape (batch, n)."""
    if code._g is None:
        code._g = _systematic_form(code)
    rank, par_cols, info_cols, a = code._g
    k = code.n - rank
    info = rng.integers(0, 2, (batch, k), dtype=np.uint8)
    parity = (info @ a.T) % 2
    out = np.zeros((batch, code.n), dtype=np.uint8)
    out[:, info_cols] = info
    out[:, par_cols] = parity.astype(np.uint8)
    return out


# --------------------------------------------------------------------------
# BICM transmit chain
# --------------------------------------------------------------------------


@dataclass
class BicmFrame:
    """One coded transmission: bits, adapters, interleaver, channel output."""

    codeword: np.ndarray        # (B, n) or (n,)
    adapter_signs: np.ndarray   # +-1 per coded bit
    interleaver: np.ndarray     # permutation applied before mapping
    symbols: np.ndarray         # mapped constellation points
    received: np.ndarray        # channel outputs (normalized units)
    gains: np.ndarray           # realized fading per symbol
    const: object
    spec: object


def transmit_frame(code, const, spec, seed, all_zero=True, batch=None):
    """Transmit codeword(s) through adapter -> interleaver -> Gray map -> channel.

    With ``all_zero`` the all-zero codeword is sent; the i.i.d. adapter signs
    symmetrize the asymmetric bit-channels so this is representative.  The
    block length must be divisible by the bits per symbol.
    """
    if code.n % const.m != 0:
        raise ValueError(f"block length {code.n} not divisible by m = {const.m}")
    rng = np.random.default_rng(seed)
    b = 1 if batch is None else batch
    if all_zero:
        cw = np.zeros((b, code.n), dtype=np.uint8)
    else:
        cw = encode_random(code, rng, b)
    signs = rng.choice(np.array([1, -1], dtype=np.int8), (b, code.n))
    interleaver = rng.permutation(code.n)
    tx = cw ^ (signs < 0)
    tx = tx[:, interleaver]
    symbols = const.map_bits(tx.reshape(-1)).reshape(b, code.n // const.m)
    if const.is_real:
        symbols = symbols.real
    y, r = sample_use(spec, symbols, rng)
    if batch is None:
        cw, signs, symbols, y, r = cw[0], signs[0], symbols[0], y[0], r[0]
    return BicmFrame(cw, signs, interleaver, symbols, y, r, const, spec)


def demap_frame(frame, llr_fns):
    """Per-coded-bit LLRs: evaluate, de-interleave, strip adapter signs."""
    const = frame.const
    y = np.atleast_2d(frame.received)
    r = np.atleast_2d(frame.gains)
    u = y / const.scale
    cols = []
    for f in llr_fns:
        cols.append(f(u, r) if getattr(f, "needs_csi", False) else f(u))
    llr = np.stack(cols, axis=-1).reshape(y.shape[0], -1)  # interleaved order
    inv = np.empty_like(frame.interleaver)
    inv[frame.interleaver] = np.arange(frame.interleaver.size)
    llr = llr[:, inv] * np.atleast_2d(frame.adapter_signs)
    return llr if frame.codeword.ndim == 2 else llr[0]


# --------------------------------------------------------------------------
# Sum-product decoding
# --------------------------------------------------------------------------


class _EdgeSchedule:
    """Precomputed gather/scatter structure for flooding updates."""

    def __init__(self, code):
        self.code = code
        e = code.n_edges
        self.by_var = np.argsort(code.var_idx, kind="stable")
        self.var_sorted = code.var_idx[self.by_var]
        self.chk_starts = np.searchsorted(code.check_idx, np.arange(code.n_checks))
        self.var_starts = np.searchsorted(self.var_sorted, np.arange(code.n))
        self.inv_by_var = np.empty(e, dtype=np.int64)
        self.inv_by_var[self.by_var] = np.arange(e)

    def check_sums(self, vals):
        """Per-check sums broadcast back to edges (vals in check order)."""
        s = np.add.reduceat(vals, self.chk_starts, axis=-1)
        return s[..., self.code.check_idx]

    def var_sums(self, vals):
        """Per-variable sums broadcast back to edges (vals in check order)."""
        v = vals[..., self.by_var]
        s = np.add.reduceat(v, self.var_starts, axis=-1)
        return s[..., self.var_sorted][..., self.inv_by_var]

    def var_totals(self, vals):
        v = vals[..., self.by_var]
        return np.add.reduceat(v, self.var_starts, axis=-1)


def bp_decode_batch(code, llrs, max_iter=100, schedule=None):
    """Flooding sum-product decoding of a batch of LLR vectors (B, n).

    Check updates use the tanh rule in sign/magnitude form with a magnitude
    floor; early exit once every frame in the batch has a zero syndrome.
    Returns (hard bits (B, n), iterations used (B,), syndrome-ok (B,)).
    """
    sch = _EdgeSchedule(code) if schedule is None else schedule
    llrs = np.atleast_2d(np.asarray(llrs, dtype=float))
    b = llrs.shape[0]
    if llrs.shape[1] != code.n:
        raise ValueError(f"expected {code.n} LLRs per frame")
    v2c = llrs[:, code.var_idx].copy()
    done = np.zeros(b, dtype=bool)
    iters = np.full(b, max_iter, dtype=int)
    hard = (llrs < 0).astype(np.uint8)
    for it in range(1, max_iter + 1):
        # check update, extrinsic via per-check totals minus own message
        sign = np.where(v2c < 0, -1.0, 1.0)
        mag = np.maximum(np.abs(v2c), _MAG_FLOOR)
        logt = np.log(np.tanh(0.5 * np.minimum(mag, _MSG_CLIP)))
        neg = sign < 0
        tot_neg = sch.check_sums(neg.astype(np.int64)) - neg
        tot_log = sch.check_sums(logt) - logt
        c2v = np.where(tot_neg % 2 == 1, -1.0, 1.0) * 2.0 * np.arctanh(
            np.minimum(np.exp(tot_log), 1.0 - 1e-16)
        )
        # variable update
        post = llrs + sch.var_totals(c2v)
        v2c = np.clip(post[:, code.var_idx] - c2v, -_MSG_CLIP, _MSG_CLIP)
        hard_new = (post < 0).astype(np.uint8)
        hard[~done] = hard_new[~done]
        ok = ~np.any(code.syndrome(hard_new), axis=-1)
        newly = ok & ~done
        iters[newly] = it
        done |= ok
        if done.all():
            break
    ok = ~np.any(code.syndrome(hard), axis=-1)
    return hard, iters, ok


def bp_decode(code, llrs, max_iter=100):
    """Single-frame sum-product decode: (hard bits, iterations, syndrome ok)."""
    hard, iters, ok = bp_decode_batch(code, np.asarray(llrs)[None, :], max_iter)
    return hard[0], int(iters[0]), bool(ok[0])


# --------------------------------------------------------------------------
# BER simulation
# --------------------------------------------------------------------------


def ber_sim(code, const, spec, llr_fns, seed=0, max_frames=3000, min_errors=100,
            max_iter=100, all_zero=True, batch=100):
    """Monte-Carlo BER/FER of a code under the given per-bit LLR functions.

    Runs until ``min_errors`` bit errors or ``max_frames`` frames.  Returns a
    dict with frames, bit_errors, frame_errors, ber, fer.
    """
    sch = _EdgeSchedule(code)
    seq = np.random.SeedSequence(seed)
    frames = bit_errors = frame_errors = 0
    while frames < max_frames and bit_errors < min_errors:
        b = min(batch, max_frames - frames)
        (fseed,) = seq.spawn(1)
        frame = transmit_frame(code, const, spec, fseed, all_zero=all_zero, batch=b)
        llr = demap_frame(frame, llr_fns)
        hard, _, _ = bp_decode_batch(code, llr, max_iter, schedule=sch)
        err = hard ^ frame.codeword
        bit_errors += int(err.sum())
        frame_errors += int(np.any(err, axis=1).sum())
        frames += b
    total_bits = frames * code.n
    return {
        "frames": frames,
        "bit_errors": bit_errors,
        "frame_errors": frame_errors,
        "ber": bit_errors / total_bits,
        "fer": frame_errors / frames,
    }
