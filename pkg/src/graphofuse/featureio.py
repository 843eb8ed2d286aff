"""Feature-matrix files: CSV with a JSON manifest sidecar.

The matrix is ``sample_id`` plus one column per feature, in manifest order.
Values are written with Python's shortest round-tripping float repr, so a
write/read cycle is lossless. The sidecar ``<matrix>.manifest.json`` records
the ordered names and the manifest version.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import IoError, MissingSample
from .online_features import FeatureVector


def sidecar_path(matrix_path: str | Path) -> Path:
    matrix_path = Path(matrix_path)
    return matrix_path.with_name(matrix_path.stem + ".manifest.json")


def write_feature_matrix(
    path: str | Path,
    vectors: Mapping[str, FeatureVector],
    names: Sequence[str],
    version: str,
) -> None:
    path = Path(path)
    ids = sorted(vectors)
    try:
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["sample_id", *names])
            for sample_id in ids:
                vec = vectors[sample_id]
                if len(vec.values) != len(names):
                    raise ValueError(f"{sample_id}: {len(vec.values)} values for {len(names)} columns")
                writer.writerow([sample_id, *(repr(float(v)) for v in vec.values)])
        sidecar_path(path).write_text(
            json.dumps({"version": version, "names": list(names)}, indent=1), encoding="utf-8"
        )
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_feature_matrix(path: str | Path) -> tuple[dict[str, FeatureVector], str, list[str]]:
    """Returns (vectors by sample id, manifest version, ordered names)."""
    path = Path(path)
    if not path.is_file():
        raise MissingSample(f"feature matrix {path} not found")
    sidecar = sidecar_path(path)
    if not sidecar.is_file():
        raise MissingSample(f"manifest sidecar {sidecar} not found")
    try:
        meta = json.loads(sidecar.read_text(encoding="utf-8"))
        version = meta["version"]
        names = list(meta["names"])
        with path.open("r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != ["sample_id", *names]:
                raise IoError(f"{path}: header does not match manifest sidecar")
            vectors = {}
            for row in reader:
                sample_id = row[0]
                values = np.array([float(v) for v in row[1:]], dtype=np.float64)
                vectors[sample_id] = FeatureVector(values=values, manifest_version=version, sample_id=sample_id)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return vectors, version, names
