"""``vrsd`` command line: run | verify | optimum | info.

Config files (``--config FILE``) are TOML with keys named after the long
flags, underscores for dashes, e.g.::

    synth = "n=500,d=20,noise_sd=0.1"
    reg = "ridge:1e-4"
    solvers = ["svrg", "svrg-sd"]
    grid_j = [-1]
    seeds = [0, 1, 2]
    epochs = 40

Flags given on the command line override values from the file.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .bench import RunSpec, SpecError, cmd_run, load_config, load_problem, parse_reg, parse_synth
from .solvers import NONSC, SC


def _csv(conv):
    def parse(text):
        try:
            return tuple(conv(v) for v in text.split(",") if v.strip())
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected a comma-separated list, got {text!r}") from None

    return parse


def _synth(text):
    try:
        return parse_synth(text)
    except SpecError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _reg(text):
    try:
        parse_reg(text)
    except SpecError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return text


def default_seed():
    raw = os.environ.get("VRSD_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise SpecError(f"VRSD_SEED must be an integer, got {raw!r}") from None


def _add_data_flags(sp):
    S = argparse.SUPPRESS
    src = sp.add_mutually_exclusive_group()
    src.add_argument("--data", default=S, help="LIBSVM file (.gz accepted)")
    src.add_argument("--synth", type=_synth, default=S, metavar="n=..,d=..[,sparsity=..,noise_sd=..,seed=..,feature_mean=..]")
    sp.add_argument("--normalize", dest="normalize", action="store_true", default=S, help="scale rows to unit length (default)")
    sp.add_argument("--no-normalize", dest="normalize", action="store_false", default=S)
    sp.add_argument("--reg", type=_reg, default=S, help="none | ridge:L1 | lasso:L2 | elastic:L1:L2 (default ridge:1e-4)")


def build_parser():
    S = argparse.SUPPRESS
    ap = argparse.ArgumentParser(prog="vrsd", description="Variance-reduced solvers with sufficient decrease.")
    ap.add_argument("--version", action="version", version=f"vrsd {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a step-size grid and write traces plus summary.json")
    r.add_argument("--config", help="TOML file with run settings")
    _add_data_flags(r)
    r.add_argument("--solvers", type=_csv(str), default=S, help="comma list of svrg,prox-svrg,saga,svrg-sd,saga-sd or all")
    r.add_argument("--grid-j", dest="grid_j", type=_csv(int), default=S, help="exponents j of the step grid (default -2,-1,0)")
    r.add_argument("--etas", type=_csv(float), default=S, help="explicit step sizes instead of the grid")
    r.add_argument("--alpha", type=float, default=S, help="single step 1/(L alpha) instead of a grid")
    r.add_argument("--epochs", type=int, default=S)
    r.add_argument("--m", type=int, default=S, help="inner iterations per epoch")
    r.add_argument("--m1", type=int, default=S, help="scaling steps per epoch")
    r.add_argument("--sigma", type=float, default=S)
    r.add_argument("--delta", type=float, default=S)
    r.add_argument("--convexity", choices=[SC, NONSC], default=S, help="svrg-sd variant")
    r.add_argument("--fastnorm", choices=["auto", "exact", "lowrank", "lazy"], default=S)
    r.add_argument("--seeds", type=_csv(int), default=S, help="comma list (default $VRSD_SEED or 0)")
    r.add_argument("--target-gap", dest="target_gap", type=float, default=S)
    r.add_argument("--jobs", type=int, default=S)
    r.add_argument("--no-timing", dest="timing", action="store_false", default=S, help="write wall_ns=0 for byte-stable traces")
    r.add_argument("--json", dest="write_json", action="store_true", default=S, help="also write JSON traces")
    r.add_argument("--out", default=S, help="output directory (default ./vrsd-out)")

    v = sub.add_parser("verify", help="run the invariant battery")
    v.add_argument("--quick", action="store_true")

    o = sub.add_parser("optimum", help="compute the reference optimum of a problem")
    _add_data_flags(o)
    o.add_argument("--out", default=S, help="write x_star and F_star as JSON")

    i = sub.add_parser("info", help="versions and, given data, problem statistics")
    _add_data_flags(i)
    return ap


def spec_from_args(args):
    values = {}
    if getattr(args, "config", None):
        values.update(load_config(args.config))
    skip = {"command", "config", "quick"}
    values.update({k: v for k, v in vars(args).items() if k not in skip})
    # a data source on the command line replaces the one from the file
    if "data" in vars(args):
        values.pop("synth", None)
    elif "synth" in vars(args):
        values.pop("data", None)
    values.setdefault("out", "vrsd-out")
    values.setdefault("seeds", (default_seed(),))
    return RunSpec(**values)


def _problem_spec(args):
    vals = {k: v for k, v in vars(args).items() if k in ("data", "synth", "normalize", "reg")}
    return RunSpec(out="", **vals)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            code, _ = cmd_run(spec_from_args(args))
            return code
        if args.command == "verify":
            from .verify import run_battery

            results = run_battery(quick=args.quick)
            for res in results:
                print(res.line())
            failed = [r.name for r in results if not r.passed]
            if failed:
                print(f"failed: {', '.join(failed)}")
                return 1
            return 0
        if args.command == "optimum":
            from .trace import reference_optimum

            spec = _problem_spec(args)
            spec.validate()
            p = load_problem(spec)
            ref = reference_optimum(p)
            print(f"F* = {ref.F_star!r}  method={ref.method}  residual={ref.residual_check:.3e}")
            if getattr(args, "out", None):
                from .trace import _atomic_write

                blob = {"F_star": ref.F_star, "method": ref.method, "residual_check": ref.residual_check, "x_star": ref.x_star.tolist()}
                _atomic_write(args.out, json.dumps(blob, indent=1))
            return 0
        if args.command == "info":
            import numba
            import scipy

            print(f"vrsd {__version__}  numpy {np.__version__}  scipy {scipy.__version__}  numba {numba.__version__}")
            if "data" in vars(args) or "synth" in vars(args):
                from .precompute import make_fastnorm

                spec = _problem_spec(args)
                spec.validate()
                p = load_problem(spec)
                for key, val in p.describe().items():
                    print(f"{key:>10}: {val}")
                print(f"{'density':>10}: {p.data.density:.4g}")
                print(f"{'fastnorm':>10}: {make_fastnorm(p.data).mode}")
            return 0
    except (SpecError, OSError, ValueError) as exc:
        print(f"vrsd: error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
