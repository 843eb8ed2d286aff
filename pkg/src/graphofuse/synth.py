"""Deterministic synthetic pen-stream corpus with controllable class signal.

Records are multi-stroke trajectories built from sinusoid-modulated arcs
sampled at a fixed tick interval. The positive-class (DYG) perturbations are
split between two channels:

* shape signal (strength = severity * (1 - complementarity)): low-frequency
  coordinate wobble, per-stroke amplitude irregularity, baseline shifts and
  slant jitter — distortions the rasterized image sees well while their
  derivatives stay small;
* dynamic signal (strength = severity * complementarity): pressure-variance
  inflation, a tremor time-warp that inflates velocity extrema, and extra pen
  lifts — visible (almost) only in the online modality.

Point roughness, tempo, and pressure-wave amplitude vary per record but are
class-independent nuisance.

At severity 0 both strengths vanish, so the class distributions coincide.
Per-subject random effects (size, speed, baseline pressure, stroke count)
correlate the records of one subject. Everything derives from the config
seed: subject i uses rng([seed, i]) and record j of subject i uses
rng([seed, i, j]).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidConfig
from .ingest import (
    LABEL_DYG,
    LABEL_TD,
    Dataset,
    FormatConfig,
    PenSample,
    TASK_WORD,
    format_pen_stream,
    load_dataset,
    make_record,
)

# Seed of the corpus used by the acceptance suite; generator constants were
# tuned against it and then frozen.
GOLDEN_SEED = 20240817

TICK_STEP = 2  # ticks between consecutive samples
GAP_TICKS = 24  # extra ticks consumed by a pen lift


@dataclass(frozen=True)
class SynthConfig:
    n_subjects: int = 40
    records_per_subject: int = 3
    class_balance: float = 0.5  # fraction of DYG subjects
    severity: float = 1.0
    complementarity: float = 0.5
    seed: int = GOLDEN_SEED

    def __post_init__(self):
        if self.n_subjects < 2 or self.records_per_subject < 1:
            raise InvalidConfig("need at least 2 subjects and 1 record per subject")
        if not 0.0 < self.class_balance < 1.0:
            raise InvalidConfig("class_balance must be in (0, 1)")
        if not 0.0 <= self.severity <= 1.0:
            raise InvalidConfig("severity must be in [0, 1]")
        if not 0.0 <= self.complementarity <= 1.0:
            raise InvalidConfig("complementarity must be in [0, 1]")


def golden_config() -> SynthConfig:
    return SynthConfig(seed=GOLDEN_SEED)


def _record_samples(rng: np.random.Generator, subject: dict, shape: float, dyn: float) -> list[PenSample]:
    """One record's sample list given the subject effects and signal strengths."""
    samples: list[PenSample] = []
    t = 0
    x_cursor = 0.0
    scale = subject["scale"]
    baseline = 600.0

    # Planned pen-up splits (the dynamic extra-lift signal, over a small
    # class-independent baseline rate so lifts alone are not a giveaway).
    n_strokes = subject["n_strokes"]
    split_draws = rng.random(2)
    n_splits = int(split_draws[0] < 0.08 + 0.5 * dyn) + int(split_draws[1] < 0.35 * dyn)
    split_strokes = set(rng.choice(n_strokes, size=min(n_splits, n_strokes), replace=False).tolist())
    pace = rng.uniform(0.8, 1.3)  # per-record tempo nuisance (online-visible only)

    prev_end: tuple[float, float] | None = None
    for s in range(n_strokes):
        n_pts = int((26 + int(rng.integers(0, 6))) * pace)
        u = np.linspace(0.0, 1.0, n_pts)
        # Tremor time-warp: same curve, oscillating traversal speed.
        warp_phase = rng.uniform(0, 2 * np.pi)
        u_eff = u + dyn * 0.035 * np.sin(2 * np.pi * 5.0 * u + warp_phase)
        u_eff = np.clip(u_eff, 0.0, 1.0)

        span = (150.0 + rng.normal(0.0, 10.0)) * scale
        arcs = subject["arcs"][s]
        amp = subject["amp"] * (1.0 + shape * rng.normal(0.0, 1.0))
        phase = rng.uniform(0, 2 * np.pi)
        wob_phase = rng.uniform(0, 2 * np.pi)
        wob = shape * 45.0 * np.sin(2 * np.pi * 1.5 * u_eff + wob_phase)
        rough = rng.normal(0.0, 1.0, size=(2, n_pts)) * rng.uniform(2.0, 4.0)

        slant = subject["slant"] + shape * rng.normal(0.0, 0.10)
        stroke_base = baseline + shape * rng.normal(0.0, 45.0)
        x = x_cursor + span * u_eff + wob * 0.4 + rough[0]
        y = stroke_base + amp * np.sin(np.pi * arcs * u_eff + phase) + slant * (x - x_cursor) + wob + rough[1]

        pressure_sigma = 7.0 + rng.uniform(0.0, 20.0) + dyn * 30.0
        pressure = (
            subject["pressure_base"]
            + rng.uniform(35.0, 85.0) * np.sin(2 * np.pi * 1.3 * u_eff + phase)
            + rng.normal(0.0, 1.0, n_pts) * pressure_sigma
        )
        azimuth = subject["azimuth_base"] + rng.normal(0.0, 12.0, n_pts)
        altitude = subject["altitude_base"] + rng.normal(0.0, 9.0, n_pts)

        split_at = int(rng.integers(8, max(9, n_pts - 8))) if s in split_strokes else -1
        for i in range(n_pts):
            if i == split_at:
                # short in-air hop inside the stroke
                for _ in range(2):
                    samples.append(PenSample(int(round(x[i])), int(round(y[i])), t, False,
                                             max(0, int(round(azimuth[i]))), max(0, int(round(altitude[i]))), 0))
                    t += TICK_STEP
                t += GAP_TICKS
            samples.append(PenSample(
                int(round(x[i])), int(round(y[i])), t, True,
                max(0, int(round(azimuth[i]))), max(0, int(round(altitude[i]))),
                max(0, int(round(pressure[i]))),
            ))
            t += TICK_STEP
        prev_end = (float(x[-1]), float(y[-1]))
        x_cursor = float(x[-1]) + 30.0 + rng.normal(0.0, 4.0)

        if s < n_strokes - 1:
            for _ in range(3):
                samples.append(PenSample(int(round(prev_end[0])), int(round(prev_end[1])), t, False,
                                         subject["azimuth_base"], subject["altitude_base"], 0))
                t += TICK_STEP
            t += GAP_TICKS
    return samples


def generate(config: SynthConfig) -> Dataset:
    """Build the corpus in memory; byte-identical for identical configs."""
    corpus_rng = np.random.default_rng([config.seed, 0xC0FFEE])
    n_dyg = int(round(config.class_balance * config.n_subjects))
    n_dyg = min(max(n_dyg, 1), config.n_subjects - 1)
    labels = np.array([LABEL_DYG] * n_dyg + [LABEL_TD] * (config.n_subjects - n_dyg))
    corpus_rng.shuffle(labels)

    records = []
    for i in range(config.n_subjects):
        subject_id = f"s{i:03d}"
        label = str(labels[i])
        srng = np.random.default_rng([config.seed, i])
        subject = {
            "scale": 1.0 + srng.normal(0.0, 0.06),
            "amp": 95.0 * (1.0 + srng.normal(0.0, 0.08)),
            "slant": srng.normal(0.0, 0.05),
            "pressure_base": 512.0 + srng.normal(0.0, 45.0),
            "azimuth_base": int(1800 + srng.normal(0.0, 60.0)),
            "altitude_base": int(620 + srng.normal(0.0, 40.0)),
            "n_strokes": int(srng.integers(3, 5)),
            "arcs": [float(a) for a in srng.uniform(1.4, 2.6, size=8)],
            # per-subject signal strengths: some DYG subjects are weak in one
            # channel but strong in the other, so the modalities err on
            # partially different subjects and fusion has something to add
            "m_shape": float(srng.uniform(0.3, 1.3)),
            "m_dyn": float(srng.uniform(0.3, 1.3)),
        }
        is_dyg = label == LABEL_DYG
        shape = config.severity * (1.0 - config.complementarity) * subject["m_shape"] * (1.0 if is_dyg else 0.0)
        dyn = config.severity * config.complementarity * subject["m_dyn"] * (1.0 if is_dyg else 0.0)
        for j in range(config.records_per_subject):
            rng = np.random.default_rng([config.seed, i, j])
            samples = _record_samples(rng, subject, shape, dyn)
            records.append(make_record(subject_id, TASK_WORD, label, samples, f"{subject_id}_r{j:02d}"))

    records.sort(key=lambda r: r.sample_id)
    counts: dict[str, int] = {}
    for r in records:
        counts[r.label] = counts.get(r.label, 0) + 1
    return Dataset(records=tuple(records), task_filter=TASK_WORD, class_counts=counts)


def emit(config: SynthConfig, out_dir: str | Path) -> Dataset:
    """Write the corpus as pen-stream files plus metadata.csv; returns it too."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dataset = generate(config)
    lines = ["subject_id,label,task,file"]
    for record in dataset.records:
        filename = f"{record.sample_id}.txt"
        (out_dir / filename).write_text(format_pen_stream(record.samples), encoding="utf-8")
        lines.append(f"{record.subject_id},{record.label},{record.task},{filename}")
    (out_dir / "metadata.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return dataset


def reload(out_dir: str | Path) -> Dataset:
    """Round-trip helper: load an emitted corpus through the ingest path."""
    out_dir = Path(out_dir)
    metadata = (out_dir / "metadata.csv").read_bytes()
    return load_dataset(out_dir, metadata, TASK_WORD, FormatConfig())
