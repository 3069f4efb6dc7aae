"""valbench-export: spec file in, checkpoint tree out."""

from __future__ import annotations

import argparse
import sys

from .export import ExportError, export_tree, load_export_spec


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="valbench-export",
        description="Convert .npy/.npz feature and logit dumps into a checkpoint tree.",
    )
    parser.add_argument("--spec", required=True, help="JSON spec listing checkpoints and array paths")
    parser.add_argument("--out", required=True, help="benchmark tree root to write")
    args = parser.parse_args(argv)
    try:
        specs, base_dir = load_export_spec(args.spec)
        written = export_tree(specs, args.out, base_dir)
    except (ExportError, OSError) as exc:
        print(f"valbench-export: error: {exc}", file=sys.stderr)
        return 1
    print(f"exported {len(written)} checkpoints to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
