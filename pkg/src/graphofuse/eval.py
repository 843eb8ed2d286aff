"""Stratified group cross-validation with nested grid search.

Subjects (never records) are assigned to folds, so no subject's records can
reach both sides of any split; the same rule applies to the inner grid-search
folds. The headline metrics pool the confusion counts of all outer folds;
per-fold metrics ride along. All randomness flows from one base seed through
``derive_seed``, so a (dataset, seed, mode, grid) tuple fully determines the
report.
"""

from __future__ import annotations

import os
import zlib
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import fusion
from .errors import CoverageMismatch, EmptyConfusion, SingleClassInput
from .fusion import FusionConfig, FusionDecision
from .ingest import LABEL_DYG, Dataset
from .models.gbt import train_gbt
from .models.svm import train_svm
from .online_features import FeatureVector
from .splits import assign_folds, subject_label_counts

ALGO_SVM = "svm"
ALGO_GBT = "gbt"

DEFAULT_K = 10
DEFAULT_INNER_K = 3


# --- fold assignment --------------------------------------------------------

@dataclass(frozen=True)
class FoldAssignment:
    fold_of_subject: Mapping[str, int]

    def subjects_in(self, fold: int) -> set[str]:
        return {s for s, f in self.fold_of_subject.items() if f == fold}


def stratified_group_kfold(records: Dataset, k: int, seed: int) -> FoldAssignment:
    """Assign each subject of a dataset to one of k folds."""
    per_subject = subject_label_counts(
        [r.subject_id for r in records.records], [r.label for r in records.records]
    )
    return FoldAssignment(fold_of_subject=assign_folds(per_subject, k, seed))


def assert_subjects_disjoint(train_subjects: set[str], test_subjects: set[str]) -> None:
    """Hard leakage guard, applied on every outer and inner split."""
    overlap = train_subjects & test_subjects
    if overlap:
        raise AssertionError(f"subject leakage between train and test: {sorted(overlap)}")


# --- metrics -----------------------------------------------------------------

@dataclass(frozen=True)
class FoldMetrics:
    scope: str
    accuracy: float
    precision: float
    recall: float
    tp: int
    fp: int
    fn: int
    tn: int


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    precision: float
    recall: float
    confusion: tuple[int, int, int, int]  # tp, fp, fn, tn
    per_fold: tuple[FoldMetrics, ...]
    pooled: bool = True


def metrics_from_confusion(tp: int, fp: int, fn: int, tn: int) -> tuple[float, float, float]:
    """(accuracy, precision, recall) with the zero-denominator-is-0 rule.

    The positive class is DYG.
    """
    if min(tp, fp, fn, tn) < 0:
        raise ValueError("confusion counts must be non-negative")
    total = tp + fp + fn + tn
    if total == 0:
        raise EmptyConfusion("no predictions to score")
    accuracy = (tp + tn) / total
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    return accuracy, precision, recall


def _fold_metrics(scope: str, tp: int, fp: int, fn: int, tn: int) -> FoldMetrics:
    accuracy, precision, recall = metrics_from_confusion(tp, fp, fn, tn)
    return FoldMetrics(scope, accuracy, precision, recall, tp, fp, fn, tn)


def _confusion(pairs: Sequence[tuple[str, str]]) -> tuple[int, int, int, int]:
    """(tp, fp, fn, tn) from (predicted, truth) label pairs."""
    tp = fp = fn = tn = 0
    for predicted, truth in pairs:
        if predicted == LABEL_DYG and truth == LABEL_DYG:
            tp += 1
        elif predicted == LABEL_DYG:
            fp += 1
        elif truth == LABEL_DYG:
            fn += 1
        else:
            tn += 1
    return tp, fp, fn, tn


def report_to_csv(report: EvalReport) -> str:
    lines = ["scope,accuracy,precision,recall,tp,fp,fn,tn"]
    rows = [FoldMetrics("pooled", report.accuracy, report.precision, report.recall, *report.confusion)]
    rows.extend(report.per_fold)
    for m in rows:
        lines.append(f"{m.scope},{m.accuracy:.6f},{m.precision:.6f},{m.recall:.6f},{m.tp},{m.fp},{m.fn},{m.tn}")
    return "\n".join(lines) + "\n"


def sweep_to_csv(rows: Sequence[tuple[float, EvalReport, float]]) -> str:
    lines = ["tau,accuracy,precision,recall,trigger_rate"]
    for tau, report, trigger_rate in rows:
        lines.append(f"{tau:.6f},{report.accuracy:.6f},{report.precision:.6f},{report.recall:.6f},{trigger_rate:.6f}")
    return "\n".join(lines) + "\n"


# --- aligned multimodal design matrices --------------------------------------

@dataclass(frozen=True)
class ModalityPair:
    """Both modality matrices aligned row-by-row with ids/subjects/labels."""

    sample_ids: tuple[str, ...]
    subjects: tuple[str, ...]
    labels: tuple[str, ...]
    x_online: np.ndarray
    x_offline: np.ndarray

    def __len__(self) -> int:
        return len(self.sample_ids)


def pair_features(
    dataset: Dataset,
    online: Mapping[str, FeatureVector],
    offline: Mapping[str, FeatureVector],
) -> ModalityPair:
    """Align both feature maps against the dataset records (sorted by id)."""
    wanted = [r.sample_id for r in dataset.records]
    missing_on = [s for s in wanted if s not in online]
    missing_off = [s for s in wanted if s not in offline]
    if missing_on or missing_off:
        raise CoverageMismatch(
            f"missing online features for {missing_on[:5]} / offline for {missing_off[:5]}"
        )
    return ModalityPair(
        sample_ids=tuple(wanted),
        subjects=tuple(r.subject_id for r in dataset.records),
        labels=tuple(r.label for r in dataset.records),
        x_online=np.stack([online[s].values for s in wanted]),
        x_offline=np.stack([offline[s].values for s in wanted]),
    )


# --- seeds, grids, workers ----------------------------------------------------

def derive_seed(base: int, tag: str) -> int:
    """Child seed = (base * 1000003 + crc32(tag)) mod 2^32."""
    return (base * 1_000_003 + zlib.crc32(tag.encode("utf-8"))) % (2**32)


def default_svm_grid(n_features: int) -> list[dict]:
    """Kernel-major, then C, then gamma; first cell wins score ties."""
    cells: list[dict] = [{"kernel": "linear", "C": c} for c in (0.1, 1.0, 10.0, 100.0)]
    for c in (0.1, 1.0, 10.0, 100.0):
        for gamma in (1.0 / n_features, 0.01, 0.1):
            cells.append({"kernel": "rbf", "C": c, "gamma": gamma})
    return cells


def default_gbt_grid() -> list[dict]:
    cells = []
    for rounds in (100, 300):
        for depth in (2, 3):
            for lr in (0.05, 0.1):
                for subsample in (0.8, 1.0):
                    cells.append({"rounds": rounds, "max_depth": depth, "learning_rate": lr, "subsample": subsample})
    return cells


def default_grid(algo: str, n_features: int) -> list[dict]:
    return default_svm_grid(n_features) if algo == ALGO_SVM else default_gbt_grid()


def train_classifier(algo: str, X: np.ndarray, y: Sequence[str], hp: dict, seed: int, groups: Sequence[str] | None):
    if algo == ALGO_SVM:
        return train_svm(X, y, hp, seed, groups=groups)
    if algo == ALGO_GBT:
        return train_gbt(X, y, hp, seed)
    raise ValueError(f"unknown algorithm {algo!r}")


def resolve_workers(requested: int | None = None) -> int:
    """Worker count from the request or GRAPHOFUSE_THREADS (0 = auto)."""
    if requested is None:
        raw = os.environ.get("GRAPHOFUSE_THREADS", "1")
        try:
            requested = int(raw)
        except ValueError:
            requested = 1
    if requested == 0:
        return os.cpu_count() or 1
    return max(1, requested)


# --- grid search ---------------------------------------------------------------

def grid_search(
    X: np.ndarray,
    y: Sequence[str],
    subjects: Sequence[str],
    algo: str,
    grid: Sequence[dict],
    inner_k: int,
    seed: int,
) -> dict:
    """Exhaustive search scored by pooled accuracy over grouped inner folds.

    Ties resolve to the earliest grid cell. The inner folds are shared across
    cells so scores are comparable.
    """
    y = list(y)
    if len(set(y)) < 2:
        raise SingleClassInput("grid search needs both classes")
    if len(grid) == 1:
        return dict(grid[0])

    per_subject = subject_label_counts(list(subjects), y)
    inner_k = min(inner_k, len(per_subject))
    if inner_k < 2:
        return dict(grid[0])
    fold_of = assign_folds(per_subject, inner_k, seed)
    fold_ids = np.array([fold_of[s] for s in subjects])

    subject_arr = np.array(subjects)
    y_arr = np.array(y)
    best_score = -1.0
    best_cell = dict(grid[0])
    for cell_index, cell in enumerate(grid):
        correct = 0
        total = 0
        for fold in range(inner_k):
            test_mask = fold_ids == fold
            train_mask = ~test_mask
            if not test_mask.any():
                continue
            assert_subjects_disjoint(set(subject_arr[train_mask]), set(subject_arr[test_mask]))
            if len(set(y_arr[train_mask])) < 2:
                continue
            model = train_classifier(
                algo,
                X[train_mask],
                list(y_arr[train_mask]),
                cell,
                derive_seed(seed, f"inner{fold}.cell{cell_index}"),
                groups=list(subject_arr[train_mask]),
            )
            for row, truth in zip(X[test_mask], y_arr[test_mask]):
                if model.predict_proba(row).label() == truth:
                    correct += 1
                total += 1
        score = correct / total if total else 0.0
        if score > best_score:
            best_score = score
            best_cell = dict(cell)
    return best_cell


# --- per-fold training (parallelizable unit) -----------------------------------

def _fold_models_task(payload: dict) -> tuple[int, dict]:
    """Grid-search and train the per-fold classifiers; runs in a worker."""
    pair: ModalityPair = payload["pair"]
    fold: int = payload["fold"]
    fold_ids: np.ndarray = payload["fold_ids"]
    algo: str = payload["algo"]
    grids: dict = payload["grids"]
    seed: int = payload["seed"]
    inner_k: int = payload["inner_k"]
    roles: tuple[str, ...] = payload["roles"]

    test_mask = fold_ids == fold
    train_mask = ~test_mask
    subjects = np.array(pair.subjects)
    assert_subjects_disjoint(set(subjects[train_mask]), set(subjects[test_mask]))

    matrices = {
        "online": pair.x_online,
        "offline": pair.x_offline,
        "fused": np.hstack([pair.x_online, pair.x_offline]),
    }
    y_train = [pair.labels[i] for i in np.flatnonzero(train_mask)]
    groups_train = [pair.subjects[i] for i in np.flatnonzero(train_mask)]
    models = {}
    for role in roles:
        X_train = matrices[role][train_mask]
        hp = grid_search(
            X_train, y_train, groups_train, algo, grids[role], inner_k,
            derive_seed(seed, f"fold{fold}.{role}.grid"),
        )
        models[role] = train_classifier(
            algo, X_train, y_train, hp,
            derive_seed(seed, f"fold{fold}.{role}.train"),
            groups=groups_train,
        )
    return fold, models


def _train_all_folds(
    pair: ModalityPair,
    fold_ids: np.ndarray,
    k: int,
    algo: str,
    grids: dict,
    seed: int,
    inner_k: int,
    roles: tuple[str, ...],
    workers: int,
) -> dict[int, dict]:
    payloads = [
        {
            "pair": pair, "fold": fold, "fold_ids": fold_ids, "algo": algo,
            "grids": grids, "seed": seed, "inner_k": inner_k, "roles": roles,
        }
        for fold in range(k)
    ]
    if workers <= 1 or k == 1:
        results = [_fold_models_task(p) for p in payloads]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, k)) as pool:
            results = list(pool.map(_fold_models_task, payloads))
    return {fold: models for fold, models in results}


def _roles_for_mode(mode: str) -> tuple[str, ...]:
    if mode == fusion.MODE_SOFT_VOTE:
        return ("online", "offline")
    if mode == fusion.MODE_FEATURE_FUSION:
        return ("fused",)
    return ("online", "offline", "fused")


def _grids_for(pair: ModalityPair, algo: str, grid: Sequence[dict] | None) -> dict:
    m = pair.x_online.shape[1]
    n = pair.x_offline.shape[1]
    if grid is not None:
        cells = [dict(c) for c in grid]
        return {"online": cells, "offline": cells, "fused": cells}
    return {
        "online": default_grid(algo, m),
        "offline": default_grid(algo, n),
        "fused": default_grid(algo, m + n),
    }


def _report_from_fold_pairs(fold_pairs: dict[int, list[tuple[str, str]]]) -> EvalReport:
    per_fold = []
    totals = np.zeros(4, dtype=np.int64)
    for fold in sorted(fold_pairs):
        tp, fp, fn, tn = _confusion(fold_pairs[fold])
        totals += (tp, fp, fn, tn)
        per_fold.append(_fold_metrics(f"fold{fold}", tp, fp, fn, tn))
    accuracy, precision, recall = metrics_from_confusion(*totals)
    return EvalReport(
        accuracy=accuracy, precision=precision, recall=recall,
        confusion=tuple(int(v) for v in totals), per_fold=tuple(per_fold),
    )


# --- experiments ----------------------------------------------------------------

def run_experiment_detailed(
    pair: ModalityPair,
    config: FusionConfig,
    algo: str = ALGO_SVM,
    k: int = DEFAULT_K,
    seed: int = 0,
    grid: Sequence[dict] | None = None,
    inner_k: int = DEFAULT_INNER_K,
    workers: int | None = None,
) -> tuple[EvalReport, list[tuple[str, FusionDecision]]]:
    """Full nested-CV evaluation; also returns every held-out decision."""
    workers = resolve_workers(workers)
    per_subject = subject_label_counts(list(pair.subjects), list(pair.labels))
    fold_of = assign_folds(per_subject, k, seed)
    fold_ids = np.array([fold_of[s] for s in pair.subjects])
    grids = _grids_for(pair, algo, grid)
    roles = _roles_for_mode(config.mode)
    models_by_fold = _train_all_folds(pair, fold_ids, k, algo, grids, seed, inner_k, roles, workers)

    online_vecs = {
        s: FeatureVector(values=pair.x_online[i], manifest_version="online", sample_id=s)
        for i, s in enumerate(pair.sample_ids)
    }
    offline_vecs = {
        s: FeatureVector(values=pair.x_offline[i], manifest_version="offline", sample_id=s)
        for i, s in enumerate(pair.sample_ids)
    }
    truths = dict(zip(pair.sample_ids, pair.labels))

    fold_pairs: dict[int, list[tuple[str, str]]] = {}
    all_decisions: list[tuple[str, FusionDecision]] = []
    for fold in range(k):
        test_ids = [s for s, f in zip(pair.sample_ids, fold_ids) if f == fold]
        classifiers = {role: model.predict_proba for role, model in models_by_fold[fold].items()}
        decisions = fusion.predict_dataset(test_ids, classifiers, online_vecs, offline_vecs, config)
        fold_pairs[fold] = [(d.label, truths[s]) for s, d in decisions]
        all_decisions.extend(decisions)
    all_decisions.sort(key=lambda item: item[0])
    return _report_from_fold_pairs(fold_pairs), all_decisions


def run_experiment(
    pair: ModalityPair,
    config: FusionConfig,
    algo: str = ALGO_SVM,
    k: int = DEFAULT_K,
    seed: int = 0,
    grid: Sequence[dict] | None = None,
    inner_k: int = DEFAULT_INNER_K,
    workers: int | None = None,
) -> EvalReport:
    """Full nested-CV evaluation of one fusion strategy."""
    return run_experiment_detailed(pair, config, algo, k, seed, grid, inner_k, workers)[0]


def run_single_modality(
    pair: ModalityPair,
    modality: str,
    algo: str = ALGO_SVM,
    k: int = DEFAULT_K,
    seed: int = 0,
    grid: Sequence[dict] | None = None,
    inner_k: int = DEFAULT_INNER_K,
    workers: int | None = None,
) -> EvalReport:
    """Baseline evaluation of one modality's classifier alone."""
    if modality not in ("online", "offline"):
        raise ValueError(f"modality must be 'online' or 'offline', got {modality!r}")
    workers = resolve_workers(workers)
    per_subject = subject_label_counts(list(pair.subjects), list(pair.labels))
    fold_of = assign_folds(per_subject, k, seed)
    fold_ids = np.array([fold_of[s] for s in pair.subjects])
    grids = _grids_for(pair, algo, grid)
    models_by_fold = _train_all_folds(pair, fold_ids, k, algo, grids, seed, inner_k, (modality,), workers)

    X = pair.x_online if modality == "online" else pair.x_offline
    fold_pairs: dict[int, list[tuple[str, str]]] = {}
    for fold in range(k):
        model = models_by_fold[fold][modality]
        rows = np.flatnonzero(fold_ids == fold)
        fold_pairs[fold] = [(model.predict_proba(X[i]).label(), pair.labels[i]) for i in rows]
    return _report_from_fold_pairs(fold_pairs)


def sweep_threshold(
    pair: ModalityPair,
    taus: Sequence[float],
    algo: str = ALGO_SVM,
    k: int = DEFAULT_K,
    seed: int = 0,
    grid: Sequence[dict] | None = None,
    inner_k: int = DEFAULT_INNER_K,
    workers: int | None = None,
) -> list[tuple[float, EvalReport, float]]:
    """Conditional-fusion reports for every tau using one shared training pass.

    Models are tau-independent, so each fold's three classifiers are trained
    once and only the decision rule varies; probability triples are
    precomputed per test sample and reused across thresholds.
    """
    if not taus:
        raise ValueError("taus must be nonempty")
    for tau in taus:
        if not 0.0 <= tau <= 1.0:
            raise ValueError(f"tau {tau} outside [0, 1]")
    workers = resolve_workers(workers)
    per_subject = subject_label_counts(list(pair.subjects), list(pair.labels))
    fold_of = assign_folds(per_subject, k, seed)
    fold_ids = np.array([fold_of[s] for s in pair.subjects])
    grids = _grids_for(pair, algo, grid)
    roles = ("online", "offline", "fused")
    models_by_fold = _train_all_folds(pair, fold_ids, k, algo, grids, seed, inner_k, roles, workers)

    fused_matrix = np.hstack([pair.x_online, pair.x_offline])
    triples: dict[int, list[tuple[str, object, object, object]]] = {}
    for fold in range(k):
        models = models_by_fold[fold]
        rows = np.flatnonzero(fold_ids == fold)
        triples[fold] = [
            (
                pair.labels[i],
                models["online"].predict_proba(pair.x_online[i]),
                models["offline"].predict_proba(pair.x_offline[i]),
                models["fused"].predict_proba(fused_matrix[i]),
            )
            for i in rows
        ]

    results = []
    for tau in taus:
        fold_pairs: dict[int, list[tuple[str, str]]] = {}
        triggered = 0
        total = 0
        for fold in range(k):
            pairs = []
            for truth, p_on, p_off, p_fused in triples[fold]:
                ensemble = fusion.soft_vote([p_on, p_off])
                total += 1
                if ensemble.margin() < tau:
                    triggered += 1
                    final = fusion.soft_vote([p_on, p_off, p_fused])
                else:
                    final = ensemble
                pairs.append((final.label(), truth))
            fold_pairs[fold] = pairs
        results.append((float(tau), _report_from_fold_pairs(fold_pairs), triggered / total))
    return results
