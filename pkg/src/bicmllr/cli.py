"""Command-line front end: optimize parameters, estimate capacities, find
thresholds, run BER sweeps, and emit plot-ready data files.

Subcommands: optimize-llr, capacity, threshold, ber, llr-curve.  A config
file of ``key = value`` lines can preset any flag; explicit flags win.
Every output artifact embeds the resolved config, the seed, and the tool
version, so re-running the same config reproduces the numeric columns.
"""

import argparse
import functools
import json
import math
import re
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .constellation import from_name
from .density_evolution import de_run, find_threshold
from .fading import ChannelSpec, FadingModel, QuadratureWarning
from .ldpc import ber_sim, construct_regular, read_alist
from .llr import (
    LogSumNoCsiLlr,
    TrueCsiLlr,
    TrueNoCsiLlr,
    bind_templates,
    make_template,
    params_from_json,
    params_to_json,
    true_nocsi_functions,
)
from .measure import _softplus2, sample_llrs
from .optimizer import OptimizationProblem, optimize_boundaries, optimize_inner

__all__ = ["main", "run", "ConfigError"]

_CHUNK = 1 << 19


class ConfigError(Exception):
    """Invalid configuration (bad flag, config key, or value)."""


class _Parser(argparse.ArgumentParser):
    """argparse that raises ConfigError instead of exiting with status 2.

    Also accepts values like ``-3:3:0.01`` (grids/windows/SNR lists starting
    with a minus) without requiring the ``--flag=value`` spelling.
    """

    def __init__(self, *a, **kw):
        super().__init__(*a, **kw)
        self._negative_number_matcher = re.compile(r"^-\d+(\.\d+)?([:,].*)?$")

    def error(self, message):
        raise ConfigError(message)


# --------------------------------------------------------------------------
# configuration plumbing
# --------------------------------------------------------------------------


def _read_config_file(path):
    """Parse a line-oriented ``key = value`` config file ('#' comments)."""
    entries = {}
    try:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
                key, val = line.split("=", 1)
                entries[key.strip()] = val.strip()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}")
    return entries


def _apply_config(args, parser, argv_tail):
    """Fill args from the config file for flags not given on the command line."""
    if not getattr(args, "config", None):
        return
    entries = _read_config_file(args.config)
    actions = {a.dest: a for a in parser._actions if a.dest != "help"}
    explicit = set()
    for a in parser._actions:
        if any(opt in argv_tail for opt in a.option_strings):
            explicit.add(a.dest)
    for key, raw in entries.items():
        if key not in actions:
            raise ConfigError(f"unknown config key {key!r}")
        if key in explicit or key == "config":
            continue
        act = actions[key]
        try:
            if isinstance(act, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
                val = raw.lower() in ("1", "true", "yes", "on")
            else:
                val = (act.type or str)(raw)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"config key {key!r}: bad value {raw!r} ({e})")
        setattr(args, key, val)


def _echo(args, parser):
    """The fully resolved config as a flat JSON-serializable dict."""
    skip = {"help", "config", "output"}
    cfg = {}
    for a in parser._actions:
        if a.dest in skip:
            continue
        v = getattr(args, a.dest, None)
        cfg[a.dest] = v
    return cfg


def _write_json(doc, path):
    text = json.dumps(doc, indent=2, sort_keys=True)
    if path:
        with open(path, "w", newline="\n") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _write_csv(header_lines, columns, rows, path):
    lines = [f"# {h}" for h in header_lines]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    text = "\n".join(lines) + "\n"
    if path:
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _meta_lines(cfg, seed):
    return [
        f"version = {__version__}",
        f"seed = {seed}",
        "config = " + json.dumps(cfg, sort_keys=True),
    ]


# --------------------------------------------------------------------------
# shared argument helpers
# --------------------------------------------------------------------------


def _channel(args, const):
    return ChannelSpec(FadingModel(args.k), args.snr_db, real_signal=const.is_real)


def _parse_range(text):
    """'lo:hi' -> (lo, hi)."""
    try:
        lo, hi = (float(t) for t in text.split(":"))
    except ValueError:
        raise ConfigError(f"expected 'lo:hi', got {text!r}")
    return lo, hi


def _parse_grid(text):
    """'lo:hi:step' -> numpy grid including both endpoints (within step/2)."""
    try:
        lo, hi, step = (float(t) for t in text.split(":"))
    except ValueError:
        raise ConfigError(f"expected 'lo:hi:step', got {text!r}")
    if step <= 0 or hi <= lo:
        raise ConfigError(f"bad grid {text!r}")
    n = int(round((hi - lo) / step))
    return lo + step * np.arange(n + 1)


def _llr_functions(kind, const, spec, exact=False):
    """Build one LLR function per bit from a selector string.

    Selectors: 'true' (no-CSI reference, tabulated), 'true-exact' (direct
    quadrature), 'logsum', 'csi', 'piecewise:PARAMS.json'.
    """
    if kind == "true":
        return true_nocsi_functions(const, spec, tabulated=not exact)
    if kind == "true-exact":
        return true_nocsi_functions(const, spec, tabulated=False)
    if kind == "logsum":
        return [LogSumNoCsiLlr(const, i, spec) for i in range(1, const.m + 1)]
    if kind == "csi":
        return [TrueCsiLlr(const, i, spec.sigma2) for i in range(1, const.m + 1)]
    if kind.startswith("piecewise:"):
        params = params_from_json(kind.split(":", 1)[1])
        try:
            return bind_templates(const.name, params)
        except KeyError as e:
            raise ConfigError(f"parameter file is missing key {e}")
    raise ConfigError(f"unknown LLR selector {kind!r}")


def _curve_function(kind, const, spec, bit):
    """Single-bit LLR function; piecewise files may cover just this bit."""
    if kind.startswith("piecewise:"):
        params = params_from_json(kind.split(":", 1)[1])
        try:
            return make_template(const.name, bit).bind(params)
        except KeyError as e:
            raise ConfigError(f"parameter file is missing key {e}")
    return _llr_functions(kind, const, spec)[bit - 1]


# --------------------------------------------------------------------------
# capacity (worker-parallel over fixed chunks)
# --------------------------------------------------------------------------


@functools.lru_cache(maxsize=8)
def _cached_fns(const_name, k, snr_db, kind, params_json):
    const = from_name(const_name)
    spec = ChannelSpec(FadingModel(k), snr_db, real_signal=const.is_real)
    if params_json is not None:
        return const, spec, bind_templates(const_name, json.loads(params_json))
    return const, spec, _llr_functions(kind, const, spec)


def _capacity_chunk(task):
    """Partial sums for one (bit, chunk) unit; runs in a worker process."""
    const_name, k, snr_db, kind, params_json, bit, count, seed = task
    const, spec, fns = _cached_fns(const_name, k, snr_db, kind, params_json)
    s = sample_llrs(fns[bit - 1], bit, const, spec, count, seed)
    t0 = _softplus2(-s.samples_b0)
    t1 = _softplus2(s.samples_b1)
    return (bit, float(t0.sum()), float((t0 * t0).sum()), t0.size,
            float(t1.sum()), float((t1 * t1).sum()), t1.size)


def _capacity_parallel(args, const):
    """Per-bit capacity estimates from fixed-size chunks.

    The chunk layout and per-chunk seeds depend only on (n, seed), so the
    result is identical for any worker count.
    """
    kind = args.llr
    params_json = None
    if kind.startswith("piecewise:"):
        params_json = json.dumps(params_from_json(kind.split(":", 1)[1]))
        kind = "piecewise"
    sizes = []
    left = args.n
    while left > 0:
        sizes.append(min(_CHUNK, left))
        left -= sizes[-1]
    bit_seeds = np.random.SeedSequence(args.seed).spawn(const.m)
    tasks = []
    for i in range(1, const.m + 1):
        for sq, cnt in zip(bit_seeds[i - 1].spawn(len(sizes)), sizes):
            tasks.append((const.name, args.k, args.snr_db, kind, params_json,
                          i, cnt, sq))
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            parts = list(pool.map(_capacity_chunk, tasks))
    else:
        parts = [_capacity_chunk(t) for t in tasks]
    per_bit = []
    for i in range(1, const.m + 1):
        mine = [p for p in parts if p[0] == i]
        s0 = math.fsum(p[1] for p in mine); q0 = math.fsum(p[2] for p in mine)
        n0 = sum(p[3] for p in mine)
        s1 = math.fsum(p[4] for p in mine); q1 = math.fsum(p[5] for p in mine)
        n1 = sum(p[6] for p in mine)
        m0, m1 = s0 / n0, s1 / n1
        var = 0.25 * (q0 / n0 - m0 * m0) / n0 + 0.25 * (q1 / n1 - m1 * m1) / n1
        per_bit.append((1.0 - 0.5 * m0 - 0.5 * m1, math.sqrt(max(var, 0.0))))
    return per_bit


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def _cmd_optimize_llr(args, parser):
    const = from_name(args.constellation)
    spec = _channel(args, const)
    template = make_template(const.name, args.bit)
    prob = OptimizationProblem(template, const, spec,
                               n_samples=args.n_samples, seed=args.seed)
    if template.boundary_names:
        res = optimize_boundaries(prob, tol=args.boundary_tol)
    else:
        res = optimize_inner(prob)
    doc = {
        "params": {k: float(v) for k, v in res.params.items()},
        "c_hat": res.c_hat.value,
        "c_hat_stderr": res.c_hat.stderr,
        "converged": bool(res.converged),
        "iterations": res.iterations,
        "config": _echo(args, parser),
        "seed": args.seed,
        "version": __version__,
    }
    _write_json(doc, args.output)
    if args.params_out:
        params_to_json(res.params, args.params_out,
                       constellation=const.name, snr_db=args.snr_db,
                       k_factor=args.k, bit=args.bit, seed=args.seed,
                       version=__version__)
    return 0


def _cmd_capacity(args, parser):
    const = from_name(args.constellation)
    per_bit = _capacity_parallel(args, const)
    total = math.fsum(v for v, _ in per_bit)
    stderr = math.sqrt(math.fsum(s * s for _, s in per_bit))
    doc = {
        "per_bit": [{"bit": i + 1, "capacity": v, "stderr": s}
                    for i, (v, s) in enumerate(per_bit)],
        "total": total,
        "stderr": stderr,
        "config": _echo(args, parser),
        "seed": args.seed,
        "version": __version__,
    }
    _write_json(doc, args.output)
    return 0


def _cmd_threshold(args, parser):
    const = from_name(args.constellation)
    window = _parse_range(args.window)

    if args.llr.startswith("piecewise:"):
        source = _llr_functions(args.llr, const, None)
    else:
        kind = args.llr

        def source(spec, _kind=kind, _const=const):
            return _llr_functions(_kind, _const, spec)

    res = find_threshold(source, const, args.k, args.dv, args.dc, window,
                         tol_db=args.tol, population=args.population,
                         seed=args.seed, max_iter=args.max_iter)
    traj = res.pop("trajectory")
    cfg = _echo(args, parser)
    traj_path = args.trajectory_csv
    if traj_path is None and args.output:
        traj_path = args.output.rsplit(".", 1)[0] + "_trajectory.csv"
    if traj_path:
        _write_csv(_meta_lines(cfg, args.seed), ["iteration", "error_rate"],
                   list(enumerate(traj, start=1)), traj_path)
    doc = {
        "threshold_db": res["threshold_db"],
        "window": list(res["window_db"]),
        "criterion": res["criterion"],
        "population": res["population"],
        "trajectory_csv_path": traj_path,
        "config": cfg,
        "seed": args.seed,
        "version": __version__,
    }
    _write_json(doc, args.output)
    return 0


def _cmd_ber(args, parser):
    const = from_name(args.constellation)
    if args.alist:
        code = read_alist(args.alist)
    else:
        if args.code_n % const.m:
            raise ConfigError(
                f"code length {args.code_n} not divisible by m={const.m}")
        code = construct_regular(args.code_n, args.dv, args.dc, args.code_seed)
    try:
        snrs = [float(t) for t in args.snr_db.split(",")]
    except ValueError:
        raise ConfigError(f"bad SNR list {args.snr_db!r}")
    rows = []
    for snr in snrs:
        spec = ChannelSpec(FadingModel(args.k), snr, real_signal=const.is_real)
        fns = _llr_functions(args.llr, const, spec)
        r = ber_sim(code, const, spec, fns, seed=args.seed,
                    max_frames=args.max_frames, min_errors=args.min_errors,
                    max_iter=args.max_iter, all_zero=not args.encode)
        rows.append((snr, r["frames"], r["bit_errors"], r["frame_errors"],
                     r["ber"], r["fer"]))
    _write_csv(_meta_lines(_echo(args, parser), args.seed),
               ["snr_db", "frames", "bit_errors", "frame_errors", "ber", "fer"],
               rows, args.output)
    return 0


def _cmd_llr_curve(args, parser):
    const = from_name(args.constellation)
    spec = _channel(args, const)
    grid = _parse_grid(args.grid)
    u = grid if const.is_real else grid.astype(complex)
    kinds = [k.strip() for k in args.llr.split(",")]
    cols = ["y"]
    series = [grid]
    for kind in kinds:
        f = _curve_function(kind, const, spec, args.bit)
        vals = f(u, args.csi_gain) if getattr(f, "needs_csi", False) else f(u)
        name = "piecewise" if kind.startswith("piecewise:") else kind.replace("-", "_")
        cols.append(f"llr_{name}")
        series.append(np.asarray(vals, dtype=float))
    rows = list(zip(*(s.tolist() for s in series)))
    _write_csv(_meta_lines(_echo(args, parser), args.seed), cols, rows, args.output)
    return 0


# --------------------------------------------------------------------------
# parser construction and entry point
# --------------------------------------------------------------------------


def _add_common(p):
    p.add_argument("--config", help="key = value config file; flags override")
    p.add_argument("--constellation", default="8am", choices=["8am", "16qam"])
    p.add_argument("--k", type=float, default=0.0, help="Rician K-factor")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1,
                   help="Monte-Carlo parallelism; results independent of N")
    p.add_argument("--output", help="output file (stdout if omitted)")


def _build_parser():
    parser = _Parser(prog="bicmllr", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND")
    sub.required = True

    p = sub.add_parser("optimize-llr", parents=[], help="optimize piecewise LLR parameters")
    _add_common(p)
    p.add_argument("--snr-db", type=float)
    p.add_argument("--bit", type=int)
    p.add_argument("--n-samples", type=int, default=200_000)
    p.add_argument("--boundary-tol", type=float, default=1e-2)
    p.add_argument("--params-out", help="also write a bare parameter JSON file")
    p.set_defaults(func=_cmd_optimize_llr, _required=("snr_db", "bit"))

    p = sub.add_parser("capacity", help="Monte-Carlo BICM capacity estimate")
    _add_common(p)
    p.add_argument("--snr-db", type=float)
    p.add_argument("--llr", default="true",
                   help="true | true-exact | logsum | csi | piecewise:FILE")
    p.add_argument("--n", type=int, default=1_000_000)
    p.set_defaults(func=_cmd_capacity, _required=("snr_db",))

    p = sub.add_parser("threshold", help="density-evolution decoding threshold")
    _add_common(p)
    p.add_argument("--llr", default="true",
                   help="true | logsum | piecewise:FILE (fixed across SNR)")
    p.add_argument("--dv", type=int, default=3)
    p.add_argument("--dc", type=int, default=4)
    p.add_argument("--window", help="bracketing SNR window 'lo:hi' in dB")
    p.add_argument("--tol", type=float, default=0.05)
    p.add_argument("--population", type=int, default=1_000_000)
    p.add_argument("--max-iter", type=int, default=2000)
    p.add_argument("--trajectory-csv", help="where to write the error-rate trajectory")
    p.set_defaults(func=_cmd_threshold, _required=("window",))

    p = sub.add_parser("ber", help="LDPC bit-error-rate sweep")
    _add_common(p)
    p.add_argument("--snr-db", help="comma-separated SNR list in dB")
    p.add_argument("--llr", default="true")
    p.add_argument("--alist", help="load the code from an alist file")
    p.add_argument("--code-n", type=int, default=3000)
    p.add_argument("--dv", type=int, default=3)
    p.add_argument("--dc", type=int, default=4)
    p.add_argument("--code-seed", type=int, default=1)
    p.add_argument("--max-frames", type=int, default=3000)
    p.add_argument("--min-errors", type=int, default=100)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--encode", action="store_true",
                   help="encode random data instead of the all-zero/adapter method")
    p.set_defaults(func=_cmd_ber, _required=("snr_db",))

    p = sub.add_parser("llr-curve", help="tabulate LLR functions on a grid")
    _add_common(p)
    p.add_argument("--snr-db", type=float)
    p.add_argument("--bit", type=int)
    p.add_argument("--llr", default="true",
                   help="comma-separated selectors, e.g. 'true,piecewise:params.json'")
    p.add_argument("--grid", default="-8:8:0.01", help="'lo:hi:step' on the level axis")
    p.add_argument("--csi-gain", type=float, default=1.0,
                   help="fading gain handed to CSI LLR functions")
    p.set_defaults(func=_cmd_llr_curve, _required=("snr_db", "bit"))

    return parser


def run(argv):
    """Execute one CLI invocation; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        sub = next(a for a in parser._subparsers._group_actions[0].choices.values()
                   if a.get_default("func") is getattr(args, "func", None))
        _apply_config(args, sub, argv[1:])
        for dest in getattr(args, "_required", ()):
            if getattr(args, dest, None) is None:
                raise ConfigError(
                    f"missing required option --{dest.replace('_', '-')}")
        if getattr(args, "bit", None) is not None:
            const = from_name(args.constellation)
            if not 1 <= args.bit <= const.m:
                raise ConfigError(f"bit must be in 1..{const.m} for {const.name}")
        with warnings.catch_warnings():
            warnings.simplefilter("error", QuadratureWarning)
            try:
                return args.func(args, sub)
            except QuadratureWarning as w:
                print(f"numerical warning escalated: {w}", file=sys.stderr)
                return 2
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def main(argv=None):
    return run(sys.argv[1:] if argv is None else list(argv))


if __name__ == "__main__":
    sys.exit(main())
