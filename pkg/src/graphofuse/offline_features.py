"""Offline feature vectors from raster images.

Two extractor routes share the FeatureVector contract:

* Zoning: a self-contained classical descriptor, g x g cell ink densities plus
  row/column ink projections plus 8 shape scalars (length g^2 + 2g + 8).
* ExternalEmbedding: vectors computed elsewhere (e.g. a pretrained CNN) and
  ingested verbatim from a text file whose first non-comment line is
  ``dim=<D>`` and whose rows are ``<sample_id> v1 ... vD``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import DimMismatch, DuplicateSampleId, MalformedHeader, MissingSample, NonFiniteValue
from .ingest import Dataset
from .online_features import FeatureVector
from .raster import RasterImage

DEFAULT_ZONING_GRID = 16

KIND_ZONING = "zoning"
KIND_EXTERNAL_EMBEDDING = "external_embedding"


@dataclass(frozen=True)
class OfflineExtractorKind:
    kind: str
    grid: int = DEFAULT_ZONING_GRID
    embedding_path: str | Path | None = None

    def __post_init__(self):
        if self.kind not in (KIND_ZONING, KIND_EXTERNAL_EMBEDDING):
            raise ValueError(f"unknown extractor kind {self.kind!r}")
        if self.kind == KIND_ZONING and self.grid < 2:
            raise ValueError("zoning grid must be >= 2")
        if self.kind == KIND_EXTERNAL_EMBEDDING and self.embedding_path is None:
            raise ValueError("external embedding extractor needs a file path")


@dataclass(frozen=True)
class EmbeddingTable:
    dim: int
    rows: Mapping[str, np.ndarray]


def zoning_length(grid: int) -> int:
    return grid * grid + 2 * grid + 8


def zoning_manifest_version(grid: int) -> str:
    return f"zoning-g{grid}-v1"


def embedding_manifest_version(dim: int) -> str:
    return f"embedding-d{dim}-v1"


def zoning_feature_names(grid: int) -> tuple[str, ...]:
    names = [f"zone_{r}_{c}" for r in range(grid) for c in range(grid)]
    names += [f"rowproj_{i}" for i in range(grid)]
    names += [f"colproj_{i}" for i in range(grid)]
    names += [
        "ink_frac", "bbox_w_frac", "bbox_h_frac", "bbox_aspect",
        "centroid_x_frac", "centroid_y_frac", "moment2_x", "moment2_y",
    ]
    return tuple(names)


def extract_zoning(image: RasterImage, grid: int = DEFAULT_ZONING_GRID, sample_id: str = "") -> FeatureVector:
    """Zoning descriptor of length g^2 + 2g + 8.

    An all-background image yields zero densities, uniform 1/g projections and
    zero scalars. Centroids use the pixel-center convention (index + 0.5).
    """
    ink = image.ink_mask()
    h, w = ink.shape
    row_bounds = [r * h // grid for r in range(grid + 1)]
    col_bounds = [c * w // grid for c in range(grid + 1)]

    densities = np.zeros(grid * grid, dtype=np.float64)
    for r in range(grid):
        for c in range(grid):
            cell = ink[row_bounds[r]:row_bounds[r + 1], col_bounds[c]:col_bounds[c + 1]]
            densities[r * grid + c] = cell.mean() if cell.size else 0.0

    total_ink = int(ink.sum())
    if total_ink == 0:
        row_proj = np.full(grid, 1.0 / grid)
        col_proj = np.full(grid, 1.0 / grid)
        scalars = np.zeros(8, dtype=np.float64)
    else:
        row_counts = np.array([ink[row_bounds[r]:row_bounds[r + 1], :].sum() for r in range(grid)], dtype=np.float64)
        col_counts = np.array([ink[:, col_bounds[c]:col_bounds[c + 1]].sum() for c in range(grid)], dtype=np.float64)
        row_proj = row_counts / total_ink
        col_proj = col_counts / total_ink
        rows_idx, cols_idx = np.nonzero(ink)
        x_frac = (cols_idx + 0.5) / w
        y_frac = (rows_idx + 0.5) / h
        bbox_w = cols_idx.max() - cols_idx.min() + 1
        bbox_h = rows_idx.max() - rows_idx.min() + 1
        centroid_x = float(x_frac.mean())
        centroid_y = float(y_frac.mean())
        scalars = np.array([
            total_ink / ink.size,
            bbox_w / w,
            bbox_h / h,
            bbox_w / bbox_h,
            centroid_x,
            centroid_y,
            float(np.mean((x_frac - centroid_x) ** 2)),
            float(np.mean((y_frac - centroid_y) ** 2)),
        ])

    values = np.concatenate([densities, row_proj, col_proj, scalars])
    return FeatureVector(values=values, manifest_version=zoning_manifest_version(grid), sample_id=sample_id)


def load_embeddings(path: str | Path) -> EmbeddingTable:
    """Parse an embedding file; lines starting with '#' are comments."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    content = [(no, line) for no, line in enumerate(lines, start=1) if line.strip() and not line.lstrip().startswith("#")]
    if not content:
        raise MalformedHeader(f"{path}: empty file")
    header_no, header = content[0]
    if not header.strip().startswith("dim="):
        raise MalformedHeader(f"{path} line {header_no}: expected 'dim=<D>', got {header.strip()!r}")
    try:
        dim = int(header.strip()[4:])
    except ValueError as exc:
        raise MalformedHeader(f"{path} line {header_no}: dimension is not an integer") from exc
    if dim <= 0:
        raise MalformedHeader(f"{path} line {header_no}: dimension must be positive")

    rows: dict[str, np.ndarray] = {}
    for no, line in content[1:]:
        tokens = line.split()
        sample_id = tokens[0]
        if sample_id in rows:
            raise DuplicateSampleId(f"{path} line {no}: {sample_id}")
        if len(tokens) - 1 != dim:
            raise DimMismatch(f"{path} line {no}: expected {dim} values, got {len(tokens) - 1}")
        try:
            values = np.array([float(tok) for tok in tokens[1:]], dtype=np.float64)
        except ValueError as exc:
            raise NonFiniteValue(f"{path} line {no}: unparseable value") from exc
        if not np.all(np.isfinite(values)):
            raise NonFiniteValue(f"{path} line {no}: non-finite value")
        rows[sample_id] = values
    return EmbeddingTable(dim=dim, rows=rows)


def extract_offline(
    dataset: Dataset,
    images: Mapping[str, RasterImage],
    extractor: OfflineExtractorKind,
) -> dict[str, FeatureVector]:
    """One offline vector per dataset record, keyed by sample id."""
    out: dict[str, FeatureVector] = {}
    if extractor.kind == KIND_ZONING:
        for record in dataset.records:
            image = images.get(record.sample_id)
            if image is None:
                raise MissingSample(f"no image for {record.sample_id}")
            out[record.sample_id] = extract_zoning(image, extractor.grid, record.sample_id)
    else:
        table = load_embeddings(extractor.embedding_path)
        version = embedding_manifest_version(table.dim)
        for record in dataset.records:
            row = table.rows.get(record.sample_id)
            if row is None:
                raise MissingSample(f"no embedding row for {record.sample_id}")
            out[record.sample_id] = FeatureVector(values=row, manifest_version=version, sample_id=record.sample_id)
    return out
