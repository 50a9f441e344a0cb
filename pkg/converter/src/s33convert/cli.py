"""CLI: s33convert --raw DIR --out DIR --config PATH"""

import argparse
import sys

from .pipeline import convert
from .raw import AlignmentError, RawLayoutError


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="s33convert",
        description="Convert raw drive logs into the beambench dataset format.",
    )
    parser.add_argument("--raw", required=True, help="raw tree root (holds scenario33.csv)")
    parser.add_argument("--out", required=True, help="output dataset directory")
    parser.add_argument("--config", required=True, help="run config JSON shared with the trainer")
    args = parser.parse_args(argv)
    try:
        manifest = convert(args.raw, args.out, args.config)
    except AlignmentError as exc:
        print(f"alignment error: {exc}", file=sys.stderr)
        return 3
    except (RawLayoutError, ValueError) as exc:
        print(f"layout error: {exc}", file=sys.stderr)
        return 2
    print(
        f"converted {manifest['num_samples']} samples "
        f"({', '.join(sorted(manifest['modalities']))}) -> {args.out}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
