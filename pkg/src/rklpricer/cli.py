"""Command line front end.

Exit status is 0 on success, 2 for config errors and 3 for solver failures.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import harness
from .config import ConfigError, load_config
from .lcp import ConvergenceError
from .ncchi2 import SeriesError
from .stability import WindowTooSmallError

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3


def _emit(text: str, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def _dump_json(obj) -> str:
    def default(o):
        if isinstance(o, np.generic):
            return o.item()
        if isinstance(o, np.ndarray):
            return o.tolist()
        raise TypeError(type(o).__name__)

    return json.dumps(obj, indent=2, default=default)


def cmd_price(args):
    problem = load_config(args.config, args.set)
    res = harness.price_problem(problem)
    if args.format == "csv":
        text = harness.columns_to_csv({"spot": res["spots"], "price": res["prices"]})
    else:
        text = _dump_json(res)
    _emit(text, args.out)


def cmd_converge(args):
    problem = load_config(args.config, args.set)
    rows = harness.convergence_rows(problem, args.levels, args.reference, args.spot_index)
    if args.format == "json":
        text = _dump_json([r.__dict__ for r in rows])
    else:
        text = harness.rows_to_csv(rows)
    _emit(text, args.out)


def cmd_stability(args):
    window = tuple(args.window) if args.window else None
    sc, stats = harness.stability_run(args.scheme, args.s, args.eps, window, (args.nx, args.ny))
    if args.raster:
        sc.write_csv(args.raster)
    if args.format == "csv" and not args.raster:
        # raster to the main output when no separate path is given
        if args.out:
            sc.write_csv(args.out)
        else:
            raise ConfigError("csv raster output needs --out or --raster", "out")
        sys.stdout.write(_dump_json(stats) + "\n")
    else:
        _emit(_dump_json(stats), args.out)


def cmd_gamma(args):
    problem = load_config(args.config, args.set)
    if problem.kind == "heston":
        raise ConfigError("gamma profiles are one-dimensional", "model.type")
    sol = harness.solve_problem(problem)
    cols = harness.gamma_profile(sol)
    text = _dump_json(cols) if args.format == "json" else harness.columns_to_csv(cols)
    _emit(text, args.out)


def cmd_cmp_digital(args):
    cols = harness.cmp_digital(stages=args.stages, k=args.k)
    if args.format == "json":
        text = _dump_json(cols)
    else:
        text = harness.columns_to_csv(cols)
    _emit(text, args.out)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rklpricer", description="RKL finite-difference option pricing")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True, fmt="json"):
        if config:
            sp.add_argument("--config", required=True, help="problem config (JSON)")
            sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config field")
        sp.add_argument("--out", help="output path (default stdout)")
        sp.add_argument("--format", choices=("csv", "json"), default=fmt)

    sp = sub.add_parser("price", help="price one problem")
    common(sp)
    sp.set_defaults(func=cmd_price)

    sp = sub.add_parser("converge", help="refinement ladder with change/ratio columns")
    common(sp, fmt="csv")
    sp.add_argument("--levels", type=int, default=5)
    sp.add_argument("--reference", type=float)
    sp.add_argument("--spot-index", type=int, default=0)
    sp.set_defaults(func=cmd_converge)

    sp = sub.add_parser("stability", help="stability region scan")
    common(sp, config=False)
    sp.add_argument("--scheme", choices=("RKL", "RKC"), default="RKL")
    sp.add_argument("--s", type=int, required=True)
    sp.add_argument("--eps", type=float, default=0.0)
    sp.add_argument("--window", type=float, nargs=4, metavar=("RE_MIN", "RE_MAX", "IM_MIN", "IM_MAX"))
    sp.add_argument("--nx", type=int, default=2000)
    sp.add_argument("--ny", type=int, default=1000)
    sp.add_argument("--raster", help="write the raster CSV here")
    sp.set_defaults(func=cmd_stability)

    sp = sub.add_parser("gamma", help="value, delta and gamma at the valuation time")
    common(sp, fmt="csv")
    sp.set_defaults(func=cmd_gamma)

    sp = sub.add_parser("cmp-digital", help="one-step digital values per scheme")
    common(sp, config=False, fmt="csv")
    sp.add_argument("--stages", type=int, default=111)
    sp.add_argument("--k", type=float, default=0.01)
    sp.set_defaults(func=cmd_cmp_digital)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, WindowTooSmallError, SeriesError, ValueError, ArithmeticError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
