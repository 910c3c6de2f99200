"""Command line for figure rendering: ``plots render --kind ... --in ...``."""

from __future__ import annotations

import argparse
import sys

from .render import KINDS, FigureJob, SchemaError, render


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise SchemaError(message)


def _build_parser():
    parser = _Parser(prog="plots", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render")
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--in", dest="csv_path", required=True, help="input CSV")
    p.add_argument("--summary", default=None, help="summary.json with annotations")
    p.add_argument("--out", required=True, help="output image path")
    return parser


def run(argv) -> int:
    try:
        args = _build_parser().parse_args(argv)
        job = FigureJob(args.csv_path, args.kind, args.out, args.summary)
        result = render(job)
    except (SchemaError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {result.out_path}")
    return 0


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
