"""Subject-grouped, class-balanced fold assignment.

All of a subject's records land in exactly one fold. Subjects are sorted by
(majority label, descending record count, subject id) and assigned greedily to
the fold that minimizes the spread of per-fold class counts around the global
proportions, with fold-size spread as a secondary criterion. Exact ties fall
back to a seed-shuffled fold preference, so the assignment is deterministic
given the seed.
"""

from __future__ import annotations

from collections import Counter
from typing import Mapping

import numpy as np

from .errors import TooFewSubjects
from .ingest import LABEL_DYG


def subject_label_counts(subjects: list[str], labels: list[str]) -> dict[str, Counter]:
    """Per-subject record label counts from parallel record-level lists."""
    out: dict[str, Counter] = {}
    for subject, label in zip(subjects, labels):
        out.setdefault(subject, Counter())[label] += 1
    return out


def _majority_label(counts: Counter) -> str:
    # Ties resolve toward DYG so ordering is deterministic.
    best = max(counts.values())
    candidates = sorted(label for label, n in counts.items() if n == best)
    return LABEL_DYG if LABEL_DYG in candidates else candidates[0]


def assign_folds(per_subject: Mapping[str, Counter], k: int, seed: int) -> dict[str, int]:
    """Greedy stratified group assignment: subject id -> fold index in [0, k)."""
    if k < 2:
        raise TooFewSubjects(f"k must be >= 2, got {k}")
    if len(per_subject) < k:
        raise TooFewSubjects(f"{len(per_subject)} subjects for {k} folds")

    labels = sorted({label for counts in per_subject.values() for label in counts})
    order = sorted(
        per_subject,
        key=lambda s: (_majority_label(per_subject[s]), -sum(per_subject[s].values()), s),
    )
    tie_pref = list(np.random.default_rng(seed).permutation(k))

    fold_class = np.zeros((k, len(labels)), dtype=np.float64)
    fold_size = np.zeros(k, dtype=np.float64)
    assignment: dict[str, int] = {}
    for subject in order:
        counts = np.array([per_subject[subject].get(label, 0) for label in labels], dtype=np.float64)
        best: tuple[float, float, int] | None = None
        best_fold = 0
        for fold in range(k):
            fold_class[fold] += counts
            fold_size[fold] += counts.sum()
            class_spread = float(np.sum(fold_class.std(axis=0)))
            size_spread = float(fold_size.std())
            fold_class[fold] -= counts
            fold_size[fold] -= counts.sum()
            key = (class_spread, size_spread, tie_pref.index(fold))
            if best is None or key < best:
                best = key
                best_fold = fold
        assignment[subject] = best_fold
        fold_class[best_fold] += counts
        fold_size[best_fold] += counts.sum()

    # The size criterion keeps folds populated in practice; repair the rare
    # degenerate layout so the nonempty guarantee is unconditional.
    fold_subjects: dict[int, list[str]] = {f: [] for f in range(k)}
    for subject, fold in assignment.items():
        fold_subjects[fold].append(subject)
    for fold in range(k):
        if fold_subjects[fold]:
            continue
        donor = max(fold_subjects, key=lambda f: (len(fold_subjects[f]), -f))
        moved = sorted(fold_subjects[donor])[0]
        fold_subjects[donor].remove(moved)
        fold_subjects[fold].append(moved)
        assignment[moved] = fold
    return assignment
