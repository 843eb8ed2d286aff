"""CLI: ``graphofuse-embed export --images <dir> --out <file> --batch 32``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .backbones import build_backbone
from .errors import ExporterError
from .export import ExportJob, export_embeddings


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="graphofuse-embed")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("export", help="embed PNGs and write the embedding file")
    p.add_argument("--images", required=True, help="directory of <sample_id>.png files")
    p.add_argument("--out", required=True, help="output embedding file")
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--device", default="cpu")
    p.add_argument("--backbone", choices=["efficientnet-b7", "debug-tiny"], default="efficientnet-b7")
    p.add_argument("--weights", default=None, help="local weights file for the pretrained backbone")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        backbone = build_backbone(args.backbone, args.device, args.weights)
        job = ExportJob(
            image_dir=Path(args.images),
            output=Path(args.out),
            batch_size=args.batch,
            device=args.device,
            backbone=args.backbone,
            weights=args.weights,
        )
        count = export_embeddings(job, backbone)
    except ExporterError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {count} embeddings to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
