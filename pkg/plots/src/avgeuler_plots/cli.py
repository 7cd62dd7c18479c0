"""Script entry: render one figure described by a JSON spec file."""

import argparse
import sys

from .figures import FigureSpec, SchemaError, render


def cli(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="avgeuler-plots",
        description="Render a figure from avgeuler CSV/JSONL artifacts.")
    parser.add_argument("--spec", required=True,
                        help="path to a JSON figure spec "
                             "(kind, inputs, output, style)")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code else 0
    try:
        with open(args.spec, "r", encoding="utf-8") as fh:
            spec = FigureSpec.from_json(fh.read())
        path = render(spec)
    except (OSError, ValueError) as exc:  # SchemaError is a ValueError
        print(f"avgeuler-plots: error: {exc}", file=sys.stderr)
        return 1
    print(path)
    return 0


def main() -> None:
    sys.exit(cli())


if __name__ == "__main__":
    main()
