"""CLI: plots <kind> --in data.csv [--in more.csv] --out figure.png"""

from __future__ import annotations

import argparse
import sys

from .recipes import KINDS, PlotRecipe, SchemaMismatchError, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plots", description="Render toricloc result CSVs"
    )
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind)
        p.add_argument("--in", dest="inputs", action="append", required=True,
                       help="input CSV (repeatable for crossing families)")
        p.add_argument("--out", required=True, help="output image path")
        p.add_argument("--label", dest="labels", action="append", default=[],
                       help="legend label per input, in order")
        p.add_argument("--sidecar", default=None,
                       help="JSON sidecar with fits from the simulation")
        p.add_argument("--title", default=None)
    args = parser.parse_args(argv)
    recipe = PlotRecipe(
        kind=args.kind,
        inputs=args.inputs,
        output=args.out,
        labels=args.labels,
        sidecar=args.sidecar,
        title=args.title,
    )
    try:
        render(recipe)
    except SchemaMismatchError as exc:
        print(f"schema mismatch: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
