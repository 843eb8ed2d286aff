"""Multimodal decision strategies: feature concatenation, soft voting, and
the conditional-fusion ensemble.

The conditional ensemble first soft-votes the two single-modality
probabilities. When the between-class margin |p_dyg - p_td| of that vote is
strictly below the threshold tau, the classifier trained on concatenated
features is consulted and all three probability pairs are soft-voted again;
otherwise the two-way vote stands. With tau = 0 the trigger never fires, so
the strategy reduces exactly to plain soft voting.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import EmptyInput, MissingSample, SampleIdMismatch
from .models.svm import ProbabilityPair
from .online_features import FeatureVector

MODE_FEATURE_FUSION = "feature_fusion"
MODE_SOFT_VOTE = "soft_vote"
MODE_CONDITIONAL = "conditional_fusion"
MODES = (MODE_FEATURE_FUSION, MODE_SOFT_VOTE, MODE_CONDITIONAL)

# A trained classifier is anything mapping a feature row to a ProbabilityPair.
Classifier = Callable[[np.ndarray], ProbabilityPair]


@dataclass(frozen=True)
class FusionConfig:
    tau: float = 0.2
    mode: str = MODE_CONDITIONAL

    def __post_init__(self):
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must be in [0, 1], got {self.tau}")
        if self.mode not in MODES:
            raise ValueError(f"unknown fusion mode {self.mode!r}")


@dataclass(frozen=True)
class FusionDecision:
    """Outcome for one sample. ensemble_probs is the two-way vote (or the
    fused classifier's output in feature-fusion mode); fused_probs carries the
    triggered three-way vote and is present exactly when triggered."""

    label: str
    ensemble_probs: ProbabilityPair
    fused_probs: ProbabilityPair | None
    triggered: bool

    def __post_init__(self):
        if self.triggered != (self.fused_probs is not None):
            raise ValueError("fused_probs must be present exactly when triggered")

    def final_probs(self) -> ProbabilityPair:
        return self.fused_probs if self.triggered else self.ensemble_probs


def soft_vote(probs: Sequence[ProbabilityPair]) -> ProbabilityPair:
    """Element-wise arithmetic mean of probability pairs."""
    if not probs:
        raise EmptyInput("soft_vote needs at least one probability pair")
    return ProbabilityPair(
        p_td=sum(p.p_td for p in probs) / len(probs),
        p_dyg=sum(p.p_dyg for p in probs) / len(probs),
    )


def concat_features(x_online: FeatureVector, x_offline: FeatureVector) -> FeatureVector:
    """Fused vector [online | offline] for one sample."""
    if x_online.sample_id != x_offline.sample_id:
        raise SampleIdMismatch(f"{x_online.sample_id!r} vs {x_offline.sample_id!r}")
    return FeatureVector(
        values=np.concatenate([x_online.values, x_offline.values]),
        manifest_version=f"{x_online.manifest_version}+{x_offline.manifest_version}",
        sample_id=x_online.sample_id,
    )


def _as_classifier(clf) -> Classifier:
    return clf.predict_proba if hasattr(clf, "predict_proba") else clf


def conditional_fusion_predict(
    p_online: ProbabilityPair,
    p_offline: ProbabilityPair,
    clf_fused,
    x_fused: FeatureVector,
    config: FusionConfig,
) -> FusionDecision:
    """One conditional-fusion decision; clf_fused runs only when triggered.

    clf_fused may be a trained model (anything with predict_proba) or a bare
    callable from feature row to ProbabilityPair.
    """
    if config.mode != MODE_CONDITIONAL:
        raise ValueError(f"conditional_fusion_predict requires mode {MODE_CONDITIONAL!r}")
    ensemble = soft_vote([p_online, p_offline])
    if ensemble.margin() < config.tau:
        p_fusion = _as_classifier(clf_fused)(x_fused.values)
        final = soft_vote([p_online, p_offline, p_fusion])
        return FusionDecision(label=final.label(), ensemble_probs=ensemble, fused_probs=final, triggered=True)
    return FusionDecision(label=ensemble.label(), ensemble_probs=ensemble, fused_probs=None, triggered=False)


def predict_dataset(
    sample_ids: Sequence[str],
    models: Mapping[str, Classifier],
    online: Mapping[str, FeatureVector],
    offline: Mapping[str, FeatureVector],
    config: FusionConfig,
) -> list[tuple[str, FusionDecision]]:
    """Apply the configured strategy to every sample id.

    models maps 'online'/'offline'/'fused' to classifiers (trained models or
    bare callables); only the ones the mode consults need to be present.
    """
    models = {role: _as_classifier(clf) for role, clf in models.items()}
    decisions: list[tuple[str, FusionDecision]] = []
    for sample_id in sample_ids:
        if config.mode != MODE_FEATURE_FUSION:
            x_on = online.get(sample_id)
            x_off = offline.get(sample_id)
            if x_on is None or x_off is None:
                raise MissingSample(sample_id)
            p_on = models["online"](x_on.values)
            p_off = models["offline"](x_off.values)
        if config.mode == MODE_SOFT_VOTE:
            ensemble = soft_vote([p_on, p_off])
            decision = FusionDecision(label=ensemble.label(), ensemble_probs=ensemble, fused_probs=None, triggered=False)
        elif config.mode == MODE_FEATURE_FUSION:
            x_on = online.get(sample_id)
            x_off = offline.get(sample_id)
            if x_on is None or x_off is None:
                raise MissingSample(sample_id)
            fused_p = models["fused"](concat_features(x_on, x_off).values)
            decision = FusionDecision(label=fused_p.label(), ensemble_probs=fused_p, fused_probs=None, triggered=False)
        else:
            x_fused = concat_features(x_on, x_off)
            decision = conditional_fusion_predict(p_on, p_off, models["fused"], x_fused, config)
        decisions.append((sample_id, decision))
    return decisions


def write_decisions(
    path,
    decisions: Sequence[tuple[str, FusionDecision]],
    config: FusionConfig,
    truths: Mapping[str, str],
) -> None:
    """Dump decisions as CSV for inspection and diffing."""
    lines = ["sample_id,mode,tau,p_td_ensemble,p_dyg_ensemble,triggered,p_td_final,p_dyg_final,label,truth"]
    for sample_id, d in decisions:
        final = d.final_probs()
        lines.append(
            f"{sample_id},{config.mode},{config.tau:.6f},"
            f"{d.ensemble_probs.p_td:.6f},{d.ensemble_probs.p_dyg:.6f},"
            f"{int(d.triggered)},{final.p_td:.6f},{final.p_dyg:.6f},"
            f"{d.label},{truths.get(sample_id, '')}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
