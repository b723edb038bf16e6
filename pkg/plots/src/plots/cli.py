"""Command-line entry point: render a metrics CSV to a grid figure.

Exit codes: 0 rendered (or warned on an empty CSV), 2 bad flags or a
CSV that violates the schema, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import sys

from .render import FigureSpec, SchemaError, UsageError, render


def _comma_list(text: str) -> tuple[str, ...]:
    items = tuple(part.strip() for part in text.split(",") if part.strip())
    if not items:
        raise argparse.ArgumentTypeError("expected a comma-separated list")
    return items


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="render",
        description="Render a metric-grid figure from a metrics CSV.")
    parser.add_argument("--csv", required=True, help="metrics CSV to read")
    parser.add_argument("--out", required=True,
                        help="output image path (.svg or .png)")
    parser.add_argument("--rows", type=_comma_list, default=None,
                        help="metric row order; must list every metric in "
                             "the CSV exactly once")
    parser.add_argument("--cols", type=_comma_list, default=None,
                        help="family column order; must list every family "
                             "in the CSV exactly once")
    return parser


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 0
    spec = FigureSpec(csv=args.csv, out=args.out, rows=args.rows,
                      cols=args.cols)
    try:
        wrote = render(spec)
    except (SchemaError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    if not wrote:
        print(f"warning: {args.csv} has no records, nothing rendered",
              file=sys.stderr)
        return 0
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
