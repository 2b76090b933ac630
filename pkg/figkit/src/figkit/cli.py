"""figkit command line: render one figure per spec file."""

from __future__ import annotations

import argparse
import sys

from .render import MissingColumnError, render
from .spec import SpecError, load_spec


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="figkit", description="Render walker trace figures from CSV"
    )
    parser.add_argument("specs", nargs="+", help="figure spec files")
    args = parser.parse_args(argv)
    for path in args.specs:
        try:
            spec = load_spec(path)
            out = render(spec)
        except (SpecError, OSError) as exc:
            print(f"{path}: {exc}", file=sys.stderr)
            return 2
        except MissingColumnError as exc:
            print(f"{path}: {exc}", file=sys.stderr)
            return 3
        print(f"{path} -> {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
