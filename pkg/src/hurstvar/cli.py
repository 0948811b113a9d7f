"""Command-line interface: hurstvar {simulate,estimate,constants,mc,verify}.

Exit codes: 0 ok, 2 domain error, 3 input/parse/I-O error, 4 degenerate
path, 5 quadrature did not converge.

Every subcommand accepts --config FILE, a flat `key = value` file whose keys
are the long flag names (dashes or underscores); flags given on the command
line override it.
"""
import argparse
import json
import logging
import math
import sys

import numpy as np

from . import __version__, constants, kernels, montecarlo, simulate, statistics
from .errors import DegenerateInputError, DomainError, HurstVarError, InputError

log = logging.getLogger("hurstvar")


# ---------------------------------------------------------------------------
# file formats

def write_path_csv(path, fh):
    meta = {"H": path.H, "N": path.N, "kind": path.kind, "generator": path.generator,
            "seed": path.seed, "stream": path.stream, "inner_refine": path.inner_refine}
    for key, val in meta.items():
        fh.write(f"# {key}={'' if val is None else val}\n")
    for key, val in sorted(path.meta.items()):
        fh.write(f"# meta.{key}={val}\n")
    fh.write("index,t,value\n")
    for i, v in enumerate(path.values):
        fh.write(f"{i},{repr(i / path.N)},{repr(float(v))}\n")


def read_path_csv(fh):
    """Parse a path CSV; returns (values array, metadata dict of strings)."""
    meta, rows, header = {}, [], None
    for lineno, line in enumerate(fh, 1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, sep, val = line[1:].strip().partition("=")
            if sep:
                meta[key.strip()] = val.strip()
            continue
        if header is None:
            header = [c.strip() for c in line.split(",")]
            if header != ["index", "t", "value"]:
                raise InputError(f"line {lineno}: expected header 'index,t,value', got {line!r}")
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise InputError(f"line {lineno}: expected 3 fields, got {len(parts)}")
        try:
            idx, val = int(parts[0]), float(parts[2])
        except ValueError as exc:
            raise InputError(f"line {lineno}: {exc}") from None
        if idx != len(rows):
            raise InputError(f"line {lineno}: index {idx} out of sequence")
        if not math.isfinite(val):
            raise InputError(f"line {lineno}: non-finite value")
        rows.append(val)
    if header is None:
        raise InputError("no CSV header found")
    if len(rows) < 3:
        raise InputError("a path needs at least 3 rows (N >= 2)")
    return np.array(rows), meta


def read_config(filename):
    """Flat key = value file; '#' starts a comment."""
    out = {}
    try:
        with open(filename) as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                key, sep, val = line.partition("=")
                if not sep:
                    raise InputError(f"{filename}:{lineno}: expected key = value")
                out[key.strip().replace("-", "_")] = val.strip()
    except OSError as exc:
        raise InputError(f"cannot read config {filename}: {exc}") from None
    return out


def _dump(obj, out):
    text = json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        _write_text(out, text)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _write_text(filename, text):
    try:
        with open(filename, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise InputError(f"cannot write {filename}: {exc}") from None


def _fresh_seed():
    return int(np.random.SeedSequence().entropy % (2 ** 63))


def _ints(text):
    return [int(x) for x in str(text).replace(" ", "").split(",") if x]


# ---------------------------------------------------------------------------
# subcommands

def cmd_simulate(args):
    seed = args.seed if args.seed is not None else _fresh_seed()
    method = args.method
    gen = {"kernel": "kernel_grid"}.get(method, method)
    path = simulate.simulate(args.process, args.hurst, args.n,
                             simulate.SeedStream(seed, args.stream), gen,
                             inner_refine=args.refine, grid_cells=args.grid_cells,
                             inner=args.inner)
    if args.out in (None, "-"):
        write_path_csv(path, sys.stdout)
    else:
        try:
            with open(args.out, "w") as fh:
                write_path_csv(path, fh)
        except OSError as exc:
            raise InputError(f"cannot write {args.out}: {exc}") from None
    log.info("wrote %s path, H=%s N=%d seed=%d", args.process, args.hurst, args.n, seed)


def cmd_estimate(args):
    try:
        with open(args.input) as fh:
            values, meta = read_path_csv(fh)
    except OSError as exc:
        raise InputError(f"cannot read {args.input}: {exc}") from None
    if args.adjusted and args.hurst is None and not args.plug_in:
        raise DomainError("--adjusted needs --hurst or --plug-in")
    if args.adjusted and args.hurst is not None and not args.hurst < statistics.ADJUSTED_HMAX:
        raise DomainError(f"--adjusted needs H < 2/3 (Gaussian limit of the adjusted "
                          f"statistic), got H={args.hurst}")
    bundle = statistics.compute_bundle(values, H_ref=args.hurst, adjusted=args.adjusted,
                                       plug_in=args.plug_in, normalization=args.normalization)
    _dump({"input": args.input, "input_meta": meta, "stats": bundle.to_dict(),
           "config": _echo(args)}, args.out)


def cmd_constants(args):
    tab = constants.table(args.hurst, tol=args.tol, chaos=not args.no_chaos)
    data = tab.to_dict()
    if args.json:
        _dump({"constants": data, "config": _echo(args)}, args.out)
    else:
        lines = [f"{k} = {v}" for k, v in data.items() if k != "meta"]
        lines += [f"meta.{k} = {v}" for k, v in data["meta"].items()]
        text = "\n".join(lines) + "\n"
        if args.out in (None, "-"):
            sys.stdout.write(text)
        else:
            _write_text(args.out, text)


def cmd_mc(args):
    if args.experiment is None or args.hurst is None or args.n_grid is None:
        raise DomainError("mc needs --experiment, --hurst and --n-grid")
    seed = args.seed if args.seed is not None else _fresh_seed()
    cfg = montecarlo.ExperimentConfig(
        experiment=args.experiment, H=args.hurst, N_grid=_ints(args.n_grid),
        replications=args.replications, master_seed=seed, process=args.process,
        generator=args.generator, inner_refine=args.refine, inner=args.inner,
        grid_cells=args.grid_cells, normalization=args.normalization)
    report = montecarlo.run(cfg, keep_samples=bool(args.samples_csv))
    log.info("experiment %s finished in %.1f s", cfg.experiment, report.wall_time)
    _dump(report.to_dict(timing=args.timing), args.out)
    if args.hist_csv:
        rows = ["N,bin_left,count"]
        for res in report.results:
            h = res["histogram"]
            rows += [f"{res['N']},{b},{c}" for b, c in zip(h["bin_left"], h["count"])]
        _write_text(args.hist_csv, "\n".join(rows) + "\n")
    if args.samples_csv:
        keys = sorted(next(iter(report.samples.values())))
        rows = ["N,replication," + ",".join(keys)]
        for N, named in report.samples.items():
            for r in range(len(named["stat"])):
                rows.append(f"{N},{r}," + ",".join(repr(float(named[k][r])) for k in keys))
        _write_text(args.samples_csv, "\n".join(rows) + "\n")


def cmd_verify(args):
    lemma = args.lemma
    if lemma == "gg1":
        res = montecarlo.verify_lemma_gg1(args.hurst, args.n if args.n else 64, args.tol)
    elif lemma == "c2":
        res = montecarlo.verify_lemma_c2(args.hurst, args.n if args.n else 4096)
    elif lemma == "f-zero":
        h = 1e-2
        f0 = constants.F(0.0, args.hurst, args.tol)
        fp = constants.F(h, args.hurst, args.tol)
        fm = constants.F(-h, args.hurst, args.tol)
        res = {"H": args.hurst, "F0": f0, "abs_F0_below_tol": abs(f0) < args.tol,
               "central_difference_h": h, "F_prime_0_estimate": (fp - fm) / (2 * h),
               "tol": args.tol}
    elif lemma == "kernel-identity":
        err = kernels.kernel_identity_error(args.hurst)
        res = {"H": args.hurst, "max_rel_err": err, "grid": "linspace(0.1, 1, 10)^2 off-diagonal"}
    else:
        raise DomainError(f"unknown lemma {lemma!r}")
    _dump({"lemma": lemma, "result": res, "config": _echo(args)}, args.out)


def _echo(args):
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "config")}


# ---------------------------------------------------------------------------
# parser

def build_parser():
    p = argparse.ArgumentParser(prog="hurstvar", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value file; flags override it")
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--log-level", default="WARNING")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="write a sample path as CSV")
    s.add_argument("--process", choices=["fbm", "rosenblatt"], default="fbm")
    s.add_argument("--hurst", type=float, required=False)
    s.add_argument("--n", type=int, default=1024)
    s.add_argument("--seed", type=int)
    s.add_argument("--stream", type=int, default=0)
    s.add_argument("--method", choices=["circulant", "cholesky", "nclt", "kernel"])
    s.add_argument("--refine", type=int, default=64, help="NCLT inner refinement")
    s.add_argument("--inner", choices=["matched", "fgn"], default="matched")
    s.add_argument("--grid-cells", type=int, default=200, help="kernel generator cells M")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("estimate", parents=[common], help="statistics of a path CSV as JSON")
    e.add_argument("--in", dest="input")
    e.add_argument("--hurst", type=float)
    e.add_argument("--adjusted", action="store_true")
    e.add_argument("--plug-in", action="store_true")
    e.add_argument("--normalization", choices=["chaos", "finite", "printed"], default="chaos")
    e.set_defaults(func=cmd_estimate)

    c = sub.add_parser("constants", parents=[common], help="limit constants for one H")
    c.add_argument("--hurst", type=float)
    c.add_argument("--json", action="store_true")
    c.add_argument("--tol", type=float, default=1e-9)
    c.add_argument("--no-chaos", action="store_true", help="skip the chaos constants")
    c.set_defaults(func=cmd_constants)

    m = sub.add_parser("mc", parents=[common], help="run a Monte-Carlo experiment")
    m.add_argument("--experiment", choices=list(montecarlo.EXPERIMENTS))
    m.add_argument("--hurst", type=float)
    m.add_argument("--n-grid", help="comma separated, increasing")
    m.add_argument("--replications", type=int, default=1000)
    m.add_argument("--seed", type=int)
    m.add_argument("--process", choices=["fbm", "rosenblatt"])
    m.add_argument("--generator", choices=["circulant", "cholesky", "nclt", "kernel"])
    m.add_argument("--refine", type=int, default=64)
    m.add_argument("--inner", choices=["matched", "fgn"], default="matched")
    m.add_argument("--grid-cells", type=int, default=200)
    m.add_argument("--normalization", choices=["chaos", "finite", "printed"], default="chaos")
    m.add_argument("--hist-csv", help="write histograms as N,bin_left,count")
    m.add_argument("--samples-csv", help="write per-replication statistics")
    m.add_argument("--timing", action="store_true", help="include wall time in the report")
    m.set_defaults(func=cmd_mc)

    v = sub.add_parser("verify", parents=[common], help="numeric lemma checks")
    v.add_argument("--lemma", choices=["gg1", "c2", "f-zero", "kernel-identity"])
    v.add_argument("--hurst", type=float)
    v.add_argument("--n", type=int)
    v.add_argument("--tol", type=float, default=1e-9)
    v.set_defaults(func=cmd_verify)
    p.subcommands = {"simulate": s, "estimate": e, "constants": c, "mc": m, "verify": v}
    return p


def _apply_config(parser, argv):
    """Parse once for --config, load it as defaults, parse again so flags win."""
    args = parser.parse_args(argv)
    if not args.config:
        return args
    values = read_config(args.config)
    sub = parser.subcommands[args.command]
    known = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, raw in values.items():
        key = {"in": "input"}.get(key, key)
        if key not in known or key in ("help", "config"):
            raise InputError(f"{args.config}: unknown key {key!r} for {args.command}")
        act = known[key]
        if act.const is True or isinstance(act, argparse._StoreTrueAction):
            defaults[key] = raw.lower() in ("1", "true", "yes", "on")
        elif act.type is not None:
            try:
                defaults[key] = act.type(raw)
            except ValueError:
                raise InputError(f"{args.config}: bad value for {key}: {raw!r}") from None
        else:
            defaults[key] = raw
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def _require(args):
    if args.command in ("simulate", "constants", "verify") and args.hurst is None:
        raise DomainError(f"{args.command} needs --hurst H with H in (1/2, 1)")
    if args.command == "estimate" and not args.input:
        raise DomainError("estimate needs --in FILE")
    if args.command == "verify" and not args.lemma:
        raise DomainError("verify needs --lemma")


def main(argv=None):
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                            format="%(levelname)s %(name)s: %(message)s")
        _require(args)
        args.func(args)
    except DegenerateInputError as exc:
        print(f"hurstvar: degenerate input: {exc}", file=sys.stderr)
        return exc.exit_code
    except HurstVarError as exc:
        print(f"hurstvar: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"hurstvar: I/O error: {exc}", file=sys.stderr)
        return InputError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
