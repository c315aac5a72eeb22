"""Command-line entry point ``rsma-sgf``.

Exit codes: 0 success, 1 every row failed, 2 bad spec or arguments, 3 I/O error.
"""

from __future__ import annotations

import argparse
import os
import sys

from .runner import ANALYTIC_METHODS, FIGURES, MC_METHODS, SpecError, emit, figure_spec, parse_spec, run_experiment

EXIT_OK, EXIT_ALL_FAILED, EXIT_SPEC, EXIT_IO = 0, 1, 2, 3


def _methods_for(command: str, requested: list[str]) -> list[str]:
    if command == "analytic":
        return [m for m in requested if m in ANALYTIC_METHODS] or ["theorem1"]
    if command == "simulate":
        return [m for m in requested if m in MC_METHODS] or ["mc"]
    if command == "oracle":
        return ["quadrature"]
    return requested


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rsma-sgf", description="Outage and rate experiments for the RSMA semi-grant-free uplink."
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output file (default: the spec file's 'out', else stdout)")
    common.add_argument("--format", choices=("csv", "json"), help="override the spec file's output format")
    common.add_argument("--trials", type=int, help="override Monte Carlo trials per point")
    common.add_argument("--seed", type=int, help="override the master seed")
    common.add_argument("--threads", type=int, help="worker threads (sets RSMA_SGF_THREADS)")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "analytic": "closed-form and high-SNR outage values only",
        "simulate": "Monte Carlo methods only",
        "oracle": "nested-quadrature outage values only",
        "sweep": "every method listed in the spec file",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("spec", help="path to a key = value experiment spec")
    fig = sub.add_parser("figure", parents=[common], help="run a bundled figure-family spec")
    fig.add_argument("figure", choices=sorted(FIGURES))
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        os.environ["RSMA_SGF_THREADS"] = str(max(1, args.threads))
    try:
        spec = figure_spec(args.figure) if args.command == "figure" else parse_spec(args.spec)
        if args.trials is not None:
            spec.trials = args.trials
        if args.seed is not None:
            spec.seed = args.seed
        if args.format is not None:
            spec.format = args.format
        spec.validate()
    except SpecError as exc:
        print(f"spec error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except OSError as exc:
        print(f"cannot read spec: {exc}", file=sys.stderr)
        return EXIT_IO

    command = "sweep" if args.command == "figure" else args.command
    rows = run_experiment(spec, _methods_for(command, spec.methods))
    try:
        emit(rows, spec.format, args.out or spec.out)
    except OSError as exc:
        print(f"cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    failed = sum(1 for r in rows if r.error)
    if failed:
        print(f"{failed} of {len(rows)} rows carry errors", file=sys.stderr)
    if rows and failed == len(rows):
        return EXIT_ALL_FAILED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
