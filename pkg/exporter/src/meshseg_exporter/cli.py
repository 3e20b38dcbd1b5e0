"""Command line front end: meshseg-export --bundle DIR --out DIR."""

import argparse
import json
import sys

from .backends import ExportError, load_backend
from .export import export


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="meshseg-export",
        description="export a render bundle to a teacher dataset directory")
    p.add_argument("--bundle", required=True, help="render bundle directory")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--backend", default="stub", choices=("stub", "sam"))
    p.add_argument("--checkpoint", default=None, help="model weights (sam)")
    p.add_argument("--model-type", default="vit_h", help="sam variant")
    p.add_argument("--device", default="cpu", help="torch device (sam)")
    p.add_argument("--json", action="store_true", help="machine-readable stdout")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        backend = load_backend(args.backend, checkpoint=args.checkpoint,
                               model_type=args.model_type, device=args.device)
        manifest = export(args.bundle, args.out, backend)
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.json:
        print(json.dumps(manifest.to_dict(), sort_keys=True))
    else:
        print(f"exported {manifest.views} views to {args.out} "
              f"({manifest.model}, {manifest.feature_dim} channels)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
