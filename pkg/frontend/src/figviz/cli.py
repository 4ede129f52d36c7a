"""figviz command line: render figure specs to PNG."""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from .render import RenderError, render_spec_file


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="figviz",
        description="Render cdf-overlay and feasibility-heatmap figures from CSV exports.",
    )
    parser.add_argument(
        "--spec", action="append", required=True,
        help="figure spec JSON (repeatable); csv/output paths resolve beside it",
    )
    args = parser.parse_args(argv)
    try:
        for spec_path in args.spec:
            written = render_spec_file(spec_path)
            print(written)
    except RenderError as exc:
        print(f"figviz: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
