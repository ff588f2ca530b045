"""walab-fig: turn walab CSV outputs into SVG figures.

Exit codes: 0 ok, 2 usage, 3 schema/data mismatch.
"""

from __future__ import annotations

import argparse
import sys

from .render import KINDS, FigureSpec, render
from .schemas import SchemaError


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="walab-fig", description=__doc__)
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--in", dest="inputs", nargs="+", required=True,
                   help="input CSV file(s)")
    p.add_argument("--labels", required=True,
                   help='comma-separated curve labels, e.g. "SGD,PSWA"')
    p.add_argument("--out", required=True, help="output image (SVG)")
    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    labels = tuple(s.strip() for s in args.labels.split(","))
    try:
        spec = FigureSpec(
            kind=args.kind,
            inputs=tuple(args.inputs),
            labels=labels,
            output=args.out,
        )
        path = render(spec)
    except SchemaError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
