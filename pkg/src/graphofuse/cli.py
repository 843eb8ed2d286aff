"""Command-line pipeline driver.

Stages exchange plain files (pen streams, CSVs, PNGs) so each can be re-run
independently. Every run writes a run_manifest.json with the fully resolved
configuration into its output directory. Exit codes: 0 success, 1 domain
error (the error name and context go to stderr), 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import eval as evaluation
from . import fusion, offline_features, online_features, raster, synth
from .errors import CoverageMismatch, GraphofuseError, InvalidLabel, MissingFile
from .featureio import read_feature_matrix, write_feature_matrix
from .ingest import FormatConfig, LABELS, load_dataset, normalize_task
from .models import save_model, train_gbt, train_svm

ONLINE_MATRIX = "online_features.csv"
OFFLINE_MATRIX = "offline_features.csv"

_MODE_TOKENS = {
    "feature-fusion": fusion.MODE_FEATURE_FUSION,
    "soft-vote": fusion.MODE_SOFT_VOTE,
    "conditional": fusion.MODE_CONDITIONAL,
}


def _write_manifest(args: argparse.Namespace) -> None:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    resolved = {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items()) if k != "func"}
    (out / "run_manifest.json").write_text(json.dumps(resolved, indent=1, sort_keys=True), encoding="utf-8")


def _read_metadata(data_dir: Path, task: str) -> list[tuple[str, str, str]]:
    """(sample_id, subject_id, label) per metadata row of the given task."""
    meta_path = data_dir / "metadata.csv"
    if not meta_path.is_file():
        raise MissingFile(f"no metadata.csv in {data_dir}")
    rows = []
    with meta_path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            if normalize_task(row["task"]) != normalize_task(task):
                continue
            label = row["label"].strip()
            if label not in LABELS:
                raise InvalidLabel(label)
            rows.append((Path(row["file"]).stem, row["subject_id"].strip(), label))
    rows.sort()
    return rows


def _load_corpus(args: argparse.Namespace):
    data_dir = Path(args.data)
    meta_path = data_dir / "metadata.csv"
    if not meta_path.is_file():
        raise MissingFile(f"no metadata.csv in {data_dir}")
    config = FormatConfig(has_count_header=args.count_header)
    return load_dataset(data_dir, meta_path.read_bytes(), args.task, config)


def _build_pair(args: argparse.Namespace) -> evaluation.ModalityPair:
    features_dir = Path(args.features)
    online_path = features_dir / ONLINE_MATRIX
    offline_path = features_dir / OFFLINE_MATRIX
    if not online_path.is_file():
        raise CoverageMismatch(f"online feature matrix missing: {online_path}")
    if not offline_path.is_file():
        raise CoverageMismatch(f"offline feature matrix missing: {offline_path}")
    online_vecs, _, _ = read_feature_matrix(online_path)
    offline_vecs, _, _ = read_feature_matrix(offline_path)

    rows = _read_metadata(Path(args.data), args.task)
    missing_on = [s for s, _, _ in rows if s not in online_vecs]
    missing_off = [s for s, _, _ in rows if s not in offline_vecs]
    if missing_on or missing_off:
        raise CoverageMismatch(f"features missing for online={missing_on[:5]} offline={missing_off[:5]}")
    return evaluation.ModalityPair(
        sample_ids=tuple(s for s, _, _ in rows),
        subjects=tuple(subj for _, subj, _ in rows),
        labels=tuple(label for _, _, label in rows),
        x_online=np.stack([online_vecs[s].values for s, _, _ in rows]),
        x_offline=np.stack([offline_vecs[s].values for s, _, _ in rows]),
    )


# --- subcommands -------------------------------------------------------------

def _cmd_synth(args) -> int:
    config = synth.SynthConfig(
        n_subjects=args.subjects,
        records_per_subject=args.records,
        class_balance=args.balance,
        severity=args.severity,
        complementarity=args.complementarity,
        seed=args.seed,
    )
    dataset = synth.emit(config, args.out)
    _write_manifest(args)
    print(f"wrote {len(dataset.records)} records for {args.subjects} subjects to {args.out}")
    return 0


def _cmd_ingest(args) -> int:
    dataset = _load_corpus(args)
    _write_manifest(args)
    counts = ", ".join(f"{label}:{n}" for label, n in sorted(dataset.class_counts.items()))
    print(f"task={dataset.task_filter} records={len(dataset.records)} subjects={len(dataset.subjects())} [{counts}]")
    return 0


def _cmd_extract_online(args) -> int:
    dataset = _load_corpus(args)
    manifest = online_features.build_manifest()
    vectors = {
        r.sample_id: online_features.extract_online(r, manifest, args.tick_seconds)
        for r in dataset.records
    }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_feature_matrix(out / ONLINE_MATRIX, vectors, manifest.names(), manifest.version)
    _write_manifest(args)
    print(f"wrote {len(vectors)} x {len(manifest)} online features to {out / ONLINE_MATRIX}")
    return 0


def _cmd_rasterize(args) -> int:
    dataset = _load_corpus(args)
    config = raster.RasterConfig(
        canvas=args.canvas,
        margin_frac=args.margin,
        stroke_width=args.stroke_width,
        flip_y=not args.no_flip_y,
    )
    out = Path(args.out)
    images_dir = out / "images"
    images_dir.mkdir(parents=True, exist_ok=True)
    for record in dataset.records:
        image = raster.rasterize(record, config)
        raster.write_png(image, images_dir / f"{record.sample_id}.png")
        raster.write_sidecar(images_dir / f"{record.sample_id}.txt", record.sample_id, config)
    _write_manifest(args)
    print(f"rasterized {len(dataset.records)} records into {images_dir}")
    return 0


def _cmd_extract_offline(args) -> int:
    dataset = _load_corpus(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.extractor == "zoning":
        images_dir = Path(args.images) if args.images else out / "images"
        images = {}
        for record in dataset.records:
            png = images_dir / f"{record.sample_id}.png"
            if not png.is_file():
                raise offline_features.MissingSample(f"no image for {record.sample_id} in {images_dir}")
            images[record.sample_id] = raster.read_png(png)
        kind = offline_features.OfflineExtractorKind(kind=offline_features.KIND_ZONING, grid=args.grid)
        vectors = offline_features.extract_offline(dataset, images, kind)
        names = offline_features.zoning_feature_names(args.grid)
        version = offline_features.zoning_manifest_version(args.grid)
    else:
        if not args.embeddings:
            raise CoverageMismatch("--embeddings is required with --extractor embedding")
        kind = offline_features.OfflineExtractorKind(
            kind=offline_features.KIND_EXTERNAL_EMBEDDING, embedding_path=args.embeddings
        )
        vectors = offline_features.extract_offline(dataset, {}, kind)
        dim = len(next(iter(vectors.values())).values)
        names = tuple(f"e{i}" for i in range(dim))
        version = offline_features.embedding_manifest_version(dim)
    write_feature_matrix(out / OFFLINE_MATRIX, vectors, names, version)
    _write_manifest(args)
    print(f"wrote {len(vectors)} offline features to {out / OFFLINE_MATRIX}")
    return 0


def _cmd_train(args) -> int:
    pair = _build_pair(args)
    if args.modality == "online":
        X = pair.x_online
    elif args.modality == "offline":
        X = pair.x_offline
    else:
        X = np.hstack([pair.x_online, pair.x_offline])
    y = list(pair.labels)
    if args.algo == "svm":
        hp = {"kernel": args.kernel, "C": args.C}
        if args.gamma is not None:
            hp["gamma"] = args.gamma
        model = train_svm(X, y, hp, args.seed, groups=list(pair.subjects))
    else:
        hp = {
            "rounds": args.rounds,
            "max_depth": args.depth,
            "learning_rate": args.learning_rate,
            "subsample": args.subsample,
        }
        model = train_gbt(X, y, hp, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model_path = out / f"model_{args.algo}_{args.modality}.json"
    save_model(model, model_path)
    _write_manifest(args)
    print(f"trained {args.algo} on {args.modality} features ({len(y)} rows) -> {model_path}")
    return 0


def _cmd_evaluate(args) -> int:
    pair = _build_pair(args)
    config = fusion.FusionConfig(tau=args.tau, mode=_MODE_TOKENS[args.mode])
    report, decisions = evaluation.run_experiment_detailed(
        pair, config, algo=args.algo, k=args.folds, seed=args.seed,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.csv").write_text(evaluation.report_to_csv(report), encoding="utf-8")
    truths = dict(zip(pair.sample_ids, pair.labels))
    fusion.write_decisions(out / "decisions.csv", decisions, config, truths)
    _write_manifest(args)
    print(
        f"mode={args.mode} tau={args.tau} pooled accuracy={report.accuracy:.4f} "
        f"precision={report.precision:.4f} recall={report.recall:.4f} -> {out / 'report.csv'}"
    )
    return 0


def _cmd_sweep_tau(args) -> int:
    pair = _build_pair(args)
    taus = [float(tok) for tok in args.taus.split(",") if tok.strip()]
    rows = evaluation.sweep_threshold(pair, taus, algo=args.algo, k=args.folds, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.csv").write_text(evaluation.sweep_to_csv(rows), encoding="utf-8")
    _write_manifest(args)
    for tau, report, trigger_rate in rows:
        print(f"tau={tau:.2f} accuracy={report.accuracy:.4f} trigger_rate={trigger_rate:.3f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="base seed for all derived randomness")
    common.add_argument("--tick-seconds", type=float, default=online_features.DEFAULT_TICK_SECONDS,
                        help="duration of one device tick")
    common.add_argument("--out", default=".", help="output directory")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--data", required=True, help="corpus directory (pen streams + metadata.csv)")
    data.add_argument("--task", default="word", help="task filter token")
    data.add_argument("--count-header", action="store_true", help="pen-stream files carry a row-count header")

    features = argparse.ArgumentParser(add_help=False)
    features.add_argument("--features", required=True, help="directory with the extracted feature matrices")
    features.add_argument("--algo", choices=["svm", "gbt"], default="svm")
    features.add_argument("--folds", type=int, default=10)

    parser = argparse.ArgumentParser(prog="graphofuse", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic corpus")
    p.add_argument("--subjects", type=int, default=40)
    p.add_argument("--records", type=int, default=3)
    p.add_argument("--balance", type=float, default=0.5)
    p.add_argument("--severity", type=float, default=1.0)
    p.add_argument("--complementarity", type=float, default=0.5)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("ingest", parents=[common, data], help="validate and summarize a corpus")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("extract-online", parents=[common, data], help="compute the 141 online features")
    p.set_defaults(func=_cmd_extract_online)

    p = sub.add_parser("rasterize", parents=[common, data], help="render records to PNG images")
    p.add_argument("--canvas", type=int, default=256)
    p.add_argument("--margin", type=float, default=0.08)
    p.add_argument("--stroke-width", type=int, default=2)
    p.add_argument("--no-flip-y", action="store_true")
    p.set_defaults(func=_cmd_rasterize)

    p = sub.add_parser("extract-offline", parents=[common, data], help="compute offline features")
    p.add_argument("--extractor", choices=["zoning", "embedding"], default="zoning")
    p.add_argument("--grid", type=int, default=offline_features.DEFAULT_ZONING_GRID)
    p.add_argument("--images", help="image directory (default: <out>/images)")
    p.add_argument("--embeddings", help="embedding file for --extractor embedding")
    p.set_defaults(func=_cmd_extract_offline)

    p = sub.add_parser("train", parents=[common, data, features], help="train one model on all rows")
    p.add_argument("--modality", choices=["online", "offline", "fused"], required=True)
    p.add_argument("--kernel", choices=["linear", "rbf"], default="rbf")
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--rounds", type=int, default=100)
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--subsample", type=float, default=1.0)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", parents=[common, data, features], help="grouped-CV evaluation of a fusion mode")
    p.add_argument("--mode", choices=sorted(_MODE_TOKENS), required=True)
    p.add_argument("--tau", type=float, default=0.2)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("sweep-tau", parents=[common, data, features], help="threshold sensitivity sweep")
    p.add_argument("--taus", default="0.1,0.15,0.2,0.25,0.3")
    p.set_defaults(func=_cmd_sweep_tau)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except GraphofuseError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
