"""Exporter command line: `export` emits EMB1 files, `verify` re-checks them."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .backbones import SUPPORTED, BackboneError
from .emb1 import Emb1Error
from .export import ExportError, ExportJob, export_embeddings, verify_export


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emb1-export",
        description="Export frozen-CNN embeddings from an image dataset as EMB1.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("export", help="run a frozen backbone and write an EMB1 file")
    p.add_argument("--data", required=True, help="dataset root (class-per-subdirectory)")
    p.add_argument("--backbone", required=True, choices=SUPPORTED)
    p.add_argument("--out", required=True)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--weights", choices=("imagenet", "none"), default="imagenet",
                   help="'none' gives a seeded random init (dims only, for testing)")
    p.add_argument("--input-size", type=int, default=None,
                   help="resize tiles to this square size; default: native resolution")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("verify", help="validate an EMB1 file against a backbone")
    p.add_argument("--file", required=True)
    p.add_argument("--backbone", required=True, choices=SUPPORTED)
    return parser


def dispatch(argv: list[str]) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "export":
            job = ExportJob(
                data_root=Path(args.data),
                backbone=args.backbone,
                out_path=Path(args.out),
                batch_size=args.batch,
                weights=args.weights,
                input_size=args.input_size,
                seed=args.seed,
            )
            count = export_embeddings(job)
            print(f"exported {count} embeddings to {args.out}")
        else:
            report = verify_export(args.file, args.backbone)
            print(
                f"ok backbone={report.backbone} dim={report.dim} "
                f"records={report.record_count} sampled={report.sampled}"
            )
        return 0
    except (BackboneError, ExportError, Emb1Error, OSError) as exc:
        message = " ".join(str(exc).split())
        print(f"error: {type(exc).__name__}: {message}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
