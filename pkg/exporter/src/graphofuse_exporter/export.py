"""Batched embedding export.

Scans the image directory recursively for ``<sample_id>.png``, refuses to
start when two files share a sample id, embeds readable images in sorted-id
batches, and writes the embedding file plus a ``<output>.rejects.txt`` sidecar
listing any skipped images.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .backbones import Backbone
from .errors import DuplicateSampleId, ExporterError

@dataclass(frozen=True)
class ExportJob:
    image_dir: Path
    output: Path
    batch_size: int = 32
    device: str = "cpu"
    backbone: str = "efficientnet-b7"
    weights: str | None = None


def _scan_images(image_dir: Path) -> list[tuple[str, Path]]:
    found: dict[str, Path] = {}
    for path in sorted(image_dir.rglob("*.png")):
        sample_id = path.stem
        if sample_id in found:
            raise DuplicateSampleId(f"{sample_id}: {found[sample_id]} and {path}")
        found[sample_id] = path
    if not found:
        raise ExporterError(f"no PNG images under {image_dir}")
    return sorted(found.items())


def _load_normalized(path: Path, backbone: Backbone) -> np.ndarray:
    """PNG -> float32 (3, R, R): grayscale replicated to RGB, resized to the
    backbone's native resolution, normalized per its convention."""
    with Image.open(path) as img:
        gray = img.convert("L").resize((backbone.resolution, backbone.resolution), Image.BILINEAR)
    arr = np.asarray(gray, dtype=np.float32) / 255.0
    rgb = np.stack([arr, arr, arr])
    mean = np.asarray(backbone.mean, dtype=np.float32).reshape(3, 1, 1)
    std = np.asarray(backbone.std, dtype=np.float32).reshape(3, 1, 1)
    return (rgb - mean) / std


def export_embeddings(job: ExportJob, backbone: Backbone) -> int:
    """Run the job; returns the number of exported rows."""
    entries = _scan_images(Path(job.image_dir))

    loaded: list[tuple[str, np.ndarray]] = []
    rejects: list[str] = []
    for sample_id, path in entries:
        try:
            loaded.append((sample_id, _load_normalized(path, backbone)))
        except OSError as exc:
            print(f"warning: UnreadableImage {path}: {exc} (skipped)", file=sys.stderr)
            rejects.append(f"{path}\t{exc}")

    rows: list[tuple[str, np.ndarray]] = []
    dim: int | None = None
    for start in range(0, len(loaded), job.batch_size):
        chunk = loaded[start:start + job.batch_size]
        batch = np.stack([img for _, img in chunk])
        vectors = backbone.embed(batch)
        if not np.all(np.isfinite(vectors)):
            raise ExporterError("backbone produced non-finite embeddings")
        dim = vectors.shape[1]
        rows.extend((sample_id, vec) for (sample_id, _), vec in zip(chunk, vectors))

    if dim is None:
        raise ExporterError("no readable images to embed")

    output = Path(job.output)
    output.parent.mkdir(parents=True, exist_ok=True)
    with output.open("w", encoding="utf-8") as fh:
        fh.write(f"dim={dim}\n")
        fh.write(f"# {backbone.describe()}\n")
        for sample_id, vec in rows:
            fh.write(sample_id + " " + " ".join(repr(float(v)) for v in vec) + "\n")
    rejects_path = output.with_name(output.name + ".rejects.txt")
    if rejects:
        rejects_path.write_text("\n".join(rejects) + "\n", encoding="utf-8")
    elif rejects_path.exists():
        rejects_path.unlink()
    return len(rows)
