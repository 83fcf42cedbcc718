"""Batch front-end: load inputs, run a named suite, emit a CSV report.

Exit codes: number of failing rows (capped at 125); 2 for input/parse
errors (message carries the offending line); 3 for numerical failures.
All randomness derives from ``--seed``; the written CSV is byte-identical
for identical configurations (per-row wall times go to the console only).
Configuration is by explicit flags; environment variables are ignored.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .chain import NumericalError, build_dual
from .harness import example_suite, iso_suite, mass_gap_suite, mgf_suite, q_suite, trace_suite
from .hilbert import circle_suite, det2_suite, levy_suite
from .modelio import SpecFileError, load_chain_spec, load_circle_model, load_levy_model
from .reporting import count_failures, print_reports, write_reports_csv

__all__ = ["main"]


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="twistlab",
        description="Verification suites for killed chains, twisted fields and truncated operators.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_input):
        if needs_input:
            p.add_argument("--input", required=True, help="input file (chain or model)")
        p.add_argument("--seed", type=int, default=1, help="master seed (positive)")
        p.add_argument("--samples", type=int, default=100_000, help="Monte Carlo sample count")
        p.add_argument("--out", default=None, help="CSV report path")
        p.add_argument("--tol", type=float, default=1e-10, help="exact-mode tolerance")

    for name, needs_input, extra in (
        ("verify-iso", True, None),
        ("verify-q", True, None),
        ("mass-gap", True, None),
        ("mgf-check", True, None),
        ("example-chain", False, "n"),
        ("trace-check", True, None),
        ("det2-check", False, "dim"),
        ("circle-check", True, "k"),
        ("levy-check", True, None),
    ):
        p = sub.add_parser(name)
        common(p, needs_input)
        if extra == "n":
            p.add_argument("--n", type=int, default=5, help="number of chain states")
        elif extra == "dim":
            p.add_argument("--dim", type=int, default=6, help="operator dimension")
        elif extra == "k":
            p.add_argument("--k-max", type=int, default=128, help="basis truncation")
    return parser


def _dispatch(args) -> list:
    if args.command == "example-chain":
        return example_suite(args.n, count=args.samples, seed=args.seed)
    if args.command == "det2-check":
        return det2_suite(args.dim, count=args.samples, seed=args.seed, tol=args.tol)
    if args.command == "circle-check":
        return circle_suite(load_circle_model(args.input), K=args.k_max, tol=args.tol)
    if args.command == "levy-check":
        return levy_suite(load_levy_model(args.input))

    dp = build_dual(load_chain_spec(args.input))
    if args.command == "verify-iso":
        return iso_suite(dp, count=args.samples, seed=args.seed, tol=args.tol)
    if args.command == "verify-q":
        return q_suite(dp, count=args.samples, seed=args.seed, tol=args.tol)
    if args.command == "mass-gap":
        rows, gap = mass_gap_suite(dp, seed=args.seed)
        print(float(gap))
        return rows
    if args.command == "mgf-check":
        return mgf_suite(dp, seed=args.seed, tol=args.tol)
    if args.command == "trace-check":
        return trace_suite(dp, seed=args.seed, tol=args.tol)
    raise AssertionError(f"unhandled command {args.command}")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.seed <= 0 or args.samples <= 0:
        print("seed and samples must be positive", file=sys.stderr)
        return 2
    try:
        reports = _dispatch(args)
    except SpecFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    print_reports(reports)
    if args.out:
        write_reports_csv(reports, args.out)
    return count_failures(reports)


if __name__ == "__main__":
    sys.exit(main())
