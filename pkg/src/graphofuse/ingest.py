"""Pen-stream parsing, record validation, and dataset assembly.

File formats handled here:

* Pen-stream file: whitespace-separated rows of 7 integer columns,
  ``x y t on_surface azimuth altitude pressure``, optionally preceded by a
  single-integer row-count header.
* Metadata CSV with header ``subject_id,label,task,file`` mapping each
  pen-stream file to its subject, class label and writing task.
"""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .errors import (
    CountMismatch,
    DuplicateSampleId,
    EmptyStream,
    InvalidLabel,
    MalformedRow,
    MissingFile,
    RecordRejected,
)

# Class labels. DYG (dysgraphia) is the positive class throughout.
LABEL_TD = "TD"
LABEL_DYG = "DYG"
LABELS = (LABEL_TD, LABEL_DYG)

# Canonical task tokens; anything else is carried through as free text.
TASK_WORD = "word"
TASK_PSEUDOWORD = "pseudoword"
TASK_DIFFICULT_WORD = "difficult_word"

METADATA_COLUMNS = ("subject_id", "label", "task", "file")


@dataclass(frozen=True)
class PenSample:
    """One digitizer sample: position, time tick, pen state and dynamics."""

    x: int
    y: int
    t: int
    on_surface: bool
    azimuth: int
    altitude: int
    pressure: int


@dataclass(frozen=True)
class FormatConfig:
    """Parsing options for pen-stream files.

    azimuth_range/altitude_range optionally tighten validation beyond the
    default non-negativity check; each is an inclusive (lo, hi) pair.
    """

    has_count_header: bool = False
    azimuth_range: tuple[int, int] | None = None
    altitude_range: tuple[int, int] | None = None


@dataclass(frozen=True)
class HandwritingRecord:
    """One complete written item with subject metadata."""

    subject_id: str
    task: str
    label: str
    samples: tuple[PenSample, ...]
    sample_id: str

    def on_surface_samples(self) -> tuple[PenSample, ...]:
        return tuple(s for s in self.samples if s.on_surface)


@dataclass(frozen=True)
class Stroke:
    """Maximal run of consecutive on-surface samples."""

    samples: tuple[PenSample, ...]
    index: int


@dataclass(frozen=True)
class InAirGap:
    """Maximal run of off-surface samples, with its duration in ticks.

    For gaps between two strokes the duration spans from the last on-surface
    sample before the gap to the first one after it; leading/trailing runs
    fall back to their own time span.
    """

    samples: tuple[PenSample, ...]
    duration_ticks: int


@dataclass(frozen=True)
class Dataset:
    """Validated records for a single task, sorted by sample id."""

    records: tuple[HandwritingRecord, ...]
    task_filter: str
    class_counts: Mapping[str, int] = field(default_factory=dict)

    def subjects(self) -> tuple[str, ...]:
        return tuple(sorted({r.subject_id for r in self.records}))


def normalize_task(token: str) -> str:
    return token.strip().lower()


def _decode(raw: bytes | str) -> str:
    if isinstance(raw, bytes):
        return raw.decode("utf-8")
    return raw


def parse_pen_stream(raw_text: bytes | str, config: FormatConfig = FormatConfig()) -> list[PenSample]:
    """Parse a pen-stream file body into samples, validating as it goes.

    Raises MalformedRow (with line number) on any structural violation,
    CountMismatch when a declared header count disagrees with the body, and
    EmptyStream when no sample rows are present.
    """
    lines = _decode(raw_text).splitlines()
    samples: list[PenSample] = []
    declared: int | None = None
    prev_t: int | None = None
    body_started = False

    for line_no, line in enumerate(lines, start=1):
        tokens = line.split()
        if not tokens:
            continue
        if config.has_count_header and not body_started and declared is None and len(tokens) == 1:
            try:
                declared = int(tokens[0])
            except ValueError as exc:
                raise MalformedRow(line_no, f"count header is not an integer: {tokens[0]!r}") from exc
            continue
        body_started = True
        if len(tokens) != 7:
            raise MalformedRow(line_no, f"expected 7 columns, got {len(tokens)}")
        try:
            x, y, t, on_surface, azimuth, altitude, pressure = (int(tok) for tok in tokens)
        except ValueError as exc:
            raise MalformedRow(line_no, f"non-integer token in row: {line.strip()!r}") from exc
        if on_surface not in (0, 1):
            raise MalformedRow(line_no, f"on_surface must be 0 or 1, got {on_surface}")
        if pressure < 0:
            raise MalformedRow(line_no, f"negative pressure {pressure}")
        if azimuth < 0 or altitude < 0:
            raise MalformedRow(line_no, "negative azimuth/altitude")
        if config.azimuth_range is not None and not (config.azimuth_range[0] <= azimuth <= config.azimuth_range[1]):
            raise MalformedRow(line_no, f"azimuth {azimuth} outside {config.azimuth_range}")
        if config.altitude_range is not None and not (config.altitude_range[0] <= altitude <= config.altitude_range[1]):
            raise MalformedRow(line_no, f"altitude {altitude} outside {config.altitude_range}")
        if prev_t is not None and t < prev_t:
            raise MalformedRow(line_no, f"timestamp {t} goes backwards (previous {prev_t})")
        prev_t = t
        samples.append(PenSample(x, y, t, bool(on_surface), azimuth, altitude, pressure))

    if not samples:
        raise EmptyStream("no sample rows")
    if declared is not None and declared != len(samples):
        raise CountMismatch(f"header declares {declared} rows, body has {len(samples)}")
    return samples


def format_pen_stream(samples: Iterable[PenSample], config: FormatConfig = FormatConfig()) -> str:
    """Serialize samples back to the 7-column text format (round-trip safe)."""
    rows = [
        f"{s.x} {s.y} {s.t} {int(s.on_surface)} {s.azimuth} {s.altitude} {s.pressure}"
        for s in samples
    ]
    if config.has_count_header:
        rows.insert(0, str(len(rows)))
    return "\n".join(rows) + "\n"


def make_record(
    subject_id: str,
    task: str,
    label: str,
    samples: Iterable[PenSample],
    sample_id: str,
) -> HandwritingRecord:
    """Build and validate a record; rejects records without on-surface samples."""
    record = HandwritingRecord(
        subject_id=subject_id,
        task=normalize_task(task),
        label=label,
        samples=tuple(samples),
        sample_id=sample_id,
    )
    if not record.samples:
        raise RecordRejected(f"{sample_id}: no samples")
    if not any(s.on_surface for s in record.samples):
        raise RecordRejected(f"{sample_id}: no on-surface samples")
    return record


def load_dataset(
    stream_dir: str | Path,
    metadata: bytes | str,
    task: str,
    config: FormatConfig = FormatConfig(),
) -> Dataset:
    """Assemble the task-filtered dataset described by a metadata CSV.

    Each metadata row matching ``task`` is loaded from ``stream_dir``,
    validated, and keyed by the file stem as its sample id. Records come out
    sorted by sample id so the dataset is byte-identical across runs.
    """
    stream_dir = Path(stream_dir)
    task = normalize_task(task)
    reader = csv.DictReader(io.StringIO(_decode(metadata)))
    header = reader.fieldnames or []
    missing_cols = [c for c in METADATA_COLUMNS if c not in header]
    if missing_cols:
        raise MalformedRow(1, f"metadata missing columns {missing_cols}")

    records: list[HandwritingRecord] = []
    seen_ids: set[str] = set()
    for row in reader:
        if normalize_task(row["task"]) != task:
            continue
        label = row["label"].strip()
        if label not in LABELS:
            raise InvalidLabel(f"label {label!r} for subject {row['subject_id']!r}")
        path = stream_dir / row["file"]
        if not path.is_file():
            raise MissingFile(str(path))
        sample_id = path.stem
        if sample_id in seen_ids:
            raise DuplicateSampleId(sample_id)
        seen_ids.add(sample_id)
        samples = parse_pen_stream(path.read_bytes(), config)
        records.append(make_record(row["subject_id"].strip(), task, label, samples, sample_id))

    records.sort(key=lambda r: r.sample_id)
    counts = Counter(r.label for r in records)
    return Dataset(records=tuple(records), task_filter=task, class_counts=dict(counts))


def segment_strokes(record: HandwritingRecord) -> list[Stroke]:
    """Split a record into maximal on-surface runs, in temporal order."""
    strokes: list[Stroke] = []
    current: list[PenSample] = []
    for sample in record.samples:
        if sample.on_surface:
            current.append(sample)
        elif current:
            strokes.append(Stroke(samples=tuple(current), index=len(strokes)))
            current = []
    if current:
        strokes.append(Stroke(samples=tuple(current), index=len(strokes)))
    return strokes


def in_air_gaps(record: HandwritingRecord) -> list[InAirGap]:
    """Collect maximal off-surface runs with their durations in ticks."""
    gaps: list[InAirGap] = []
    run: list[PenSample] = []
    prev_on: PenSample | None = None
    run_prev_on: PenSample | None = None

    def close(next_on: PenSample | None) -> None:
        nonlocal run
        if not run:
            return
        if run_prev_on is not None and next_on is not None:
            duration = next_on.t - run_prev_on.t
        else:
            duration = run[-1].t - run[0].t
        gaps.append(InAirGap(samples=tuple(run), duration_ticks=duration))
        run = []

    for sample in record.samples:
        if sample.on_surface:
            close(sample)
            prev_on = sample
        else:
            if not run:
                run_prev_on = prev_on
            run.append(sample)
    close(None)
    return gaps
