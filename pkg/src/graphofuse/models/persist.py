"""Versioned text (JSON) persistence for trained models.

Floats survive the round trip exactly (JSON encodes them via repr), so a
reloaded model predicts bit-identically. Loss histories and other training
diagnostics are not part of the schema.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import IoError, SchemaVersionMismatch
from .gbt import GbtModel, Tree, TreeNode
from .standardize import Standardizer
from .svm import SvmModel

SCHEMA = "graphofuse-model-v1"


def _standardizer_to_dict(s: Standardizer) -> dict:
    return {"means": s.means.tolist(), "stds": s.stds.tolist()}


def _standardizer_from_dict(d: dict) -> Standardizer:
    return Standardizer(means=np.array(d["means"], dtype=np.float64), stds=np.array(d["stds"], dtype=np.float64))


def save_model(model: SvmModel | GbtModel, path: str | Path) -> None:
    if isinstance(model, SvmModel):
        payload = {
            "schema": SCHEMA,
            "kind": "svm",
            "kernel": model.kernel,
            "gamma": model.gamma,
            "C": model.C,
            "support_vectors": model.support_vectors.tolist(),
            "dual_coefs": model.dual_coefs.tolist(),
            "bias": model.bias,
            "platt_a": model.platt_a,
            "platt_b": model.platt_b,
            "standardizer": _standardizer_to_dict(model.standardizer),
            "kkt_violation": model.kkt_violation,
        }
    elif isinstance(model, GbtModel):
        payload = {
            "schema": SCHEMA,
            "kind": "gbt",
            "learning_rate": model.learning_rate,
            "base_score": model.base_score,
            "max_depth": model.max_depth,
            "standardizer": _standardizer_to_dict(model.standardizer),
            "trees": [
                [[n.feature, n.threshold, n.left, n.right, n.value] for n in tree.nodes]
                for tree in model.trees
            ],
        }
    else:
        raise TypeError(f"cannot persist {type(model).__name__}")
    try:
        Path(path).write_text(json.dumps(payload), encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_model(path: str | Path) -> SvmModel | GbtModel:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaVersionMismatch(f"{path}: not a valid model file ({exc})") from exc
    if not isinstance(payload, dict) or payload.get("schema") != SCHEMA:
        raise SchemaVersionMismatch(f"{path}: expected schema {SCHEMA!r}")

    try:
        kind = payload["kind"]
        standardizer = _standardizer_from_dict(payload["standardizer"])
        if kind == "svm":
            sv = np.array(payload["support_vectors"], dtype=np.float64)
            if sv.size == 0:
                sv = sv.reshape(0, standardizer.means.shape[0])
            return SvmModel(
                kernel=payload["kernel"],
                gamma=payload["gamma"],
                C=payload["C"],
                support_vectors=sv,
                dual_coefs=np.array(payload["dual_coefs"], dtype=np.float64),
                bias=payload["bias"],
                platt_a=payload["platt_a"],
                platt_b=payload["platt_b"],
                standardizer=standardizer,
                kkt_violation=payload["kkt_violation"],
            )
        if kind == "gbt":
            trees = tuple(
                Tree(nodes=tuple(TreeNode(int(f), float(t), int(l), int(r), float(v)) for f, t, l, r, v in nodes))
                for nodes in payload["trees"]
            )
            return GbtModel(
                trees=trees,
                learning_rate=payload["learning_rate"],
                base_score=payload["base_score"],
                max_depth=payload["max_depth"],
                standardizer=standardizer,
            )
        raise SchemaVersionMismatch(f"{path}: unknown model kind {kind!r}")
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaVersionMismatch(f"{path}: malformed model payload ({exc})") from exc
