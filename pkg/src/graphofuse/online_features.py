"""Online feature extraction: the fixed 141-entry catalog.

Composition (channel-major, then stroke aggregates, then globals):

* 12 channels {vx, vy, v, ax, ay, a, jx, jy, j, pressure, altitude, azimuth}
  x 10 statistics {mean, median, std, min, max, range, iqr, skew, kurt, rms}
  = 120 entries. Derivatives are forward differences computed per stroke and
  never cross stroke boundaries; magnitudes combine the x/y components.
* 6 per-stroke scalars {path length, horizontal length, vertical length,
  width, height, duration} aggregated over strokes by {mean, std} = 12.
* 9 globals: pen lifts, total on-surface duration, total path length, word
  width, word height, mean-y drift from first to last stroke, second moment
  of per-stroke mean y about the record mean y, and local-extrema counts of
  the velocity and acceleration magnitudes.

All statistics use population moments; statistics of an empty series are 0,
and std/skew/kurt of a constant series are 0 (kurtosis is excess kurtosis).
Coordinates and timestamps are re-based on the first on-surface sample before
any computation, which makes translation and time-shift invariance exact in
floating point (inputs to every formula are then literally identical).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .ingest import HandwritingRecord, PenSample, Stroke, segment_strokes

MANIFEST_VERSION = "online-v1"
DEFAULT_TICK_SECONDS = 1e-2

CHANNELS = ("vx", "vy", "v", "ax", "ay", "a", "jx", "jy", "j", "pressure", "altitude", "azimuth")
STATS = ("mean", "median", "std", "min", "max", "range", "iqr", "skew", "kurt", "rms")
STROKE_SCALARS = ("path_len", "horiz_len", "vert_len", "width", "height", "duration")
GLOBALS = (
    "pen_lifts",
    "total_duration",
    "total_path_len",
    "word_width",
    "word_height",
    "stroke_y_drift",
    "stroke_y_var",
    "v_extrema_count",
    "a_extrema_count",
)


class Category(Enum):
    KINEMATIC = "kinematic"
    SPATIAL = "spatial"
    TEMPORAL = "temporal"
    DYNAMIC = "dynamic"
    GLOBAL = "global"


_CHANNEL_CATEGORY = {
    "vx": Category.KINEMATIC, "vy": Category.KINEMATIC, "v": Category.KINEMATIC,
    "ax": Category.KINEMATIC, "ay": Category.KINEMATIC, "a": Category.KINEMATIC,
    "jx": Category.KINEMATIC, "jy": Category.KINEMATIC, "j": Category.KINEMATIC,
    "pressure": Category.DYNAMIC, "altitude": Category.DYNAMIC, "azimuth": Category.DYNAMIC,
}
_SCALAR_CATEGORY = {
    "path_len": Category.SPATIAL, "horiz_len": Category.SPATIAL, "vert_len": Category.SPATIAL,
    "width": Category.SPATIAL, "height": Category.SPATIAL, "duration": Category.TEMPORAL,
}


@dataclass(frozen=True)
class FeatureManifest:
    """Ordered, versioned catalog of feature names."""

    entries: tuple[tuple[str, Category], ...]
    version: str

    def __post_init__(self):
        names = [name for name, _ in self.entries]
        if len(names) != len(set(names)):
            raise ValueError("manifest names must be unique")

    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.entries)

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class FeatureVector:
    """Feature values in manifest order for one record."""

    values: np.ndarray
    manifest_version: str
    sample_id: str

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"{self.sample_id}: non-finite feature values")


@dataclass(frozen=True)
class ChannelSeries:
    """Concatenated per-stroke series for one channel."""

    channel: str
    values: np.ndarray


def build_manifest() -> FeatureManifest:
    entries: list[tuple[str, Category]] = []
    for channel in CHANNELS:
        for stat in STATS:
            entries.append((f"{channel}_{stat}", _CHANNEL_CATEGORY[channel]))
    for scalar in STROKE_SCALARS:
        for agg in ("mean", "std"):
            entries.append((f"stroke_{scalar}_{agg}", _SCALAR_CATEGORY[scalar]))
    for name in GLOBALS:
        entries.append((name, Category.GLOBAL))
    manifest = FeatureManifest(entries=tuple(entries), version=MANIFEST_VERSION)
    assert len(manifest) == 141
    return manifest


def _collapse_duplicate_ticks(stroke: Stroke) -> tuple[np.ndarray, ...]:
    """Per-stroke arrays (x, y, t, pressure, altitude, azimuth) with samples
    sharing a timestamp collapsed to the first occurrence."""
    xs, ys, ts, ps, alts, azs = [], [], [], [], [], []
    prev_t = None
    for s in stroke.samples:
        if prev_t is not None and s.t == prev_t:
            continue
        prev_t = s.t
        xs.append(s.x)
        ys.append(s.y)
        ts.append(s.t)
        ps.append(s.pressure)
        alts.append(s.altitude)
        azs.append(s.azimuth)
    return tuple(np.asarray(arr, dtype=np.float64) for arr in (xs, ys, ts, ps, alts, azs))


def _forward_diff(values: np.ndarray, times_s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Forward differences of a series against its timestamps (seconds).

    Returns the derivative series and the timestamps it lives on (the left
    endpoints), so the same rule applies recursively for higher derivatives.
    """
    if len(values) < 2:
        return np.empty(0), np.empty(0)
    dt = np.diff(times_s)
    return np.diff(values) / dt, times_s[:-1]


def compute_channels(strokes: list[Stroke], tick_seconds: float) -> list[ChannelSeries]:
    """Compute the 12 channel series, concatenated across strokes.

    Velocity/acceleration/jerk are successive forward differences within each
    stroke; the magnitude channels (v, a, j) combine the x/y components.
    """
    per_channel: dict[str, list[np.ndarray]] = {ch: [] for ch in CHANNELS}
    for stroke in strokes:
        x, y, t, pressure, altitude, azimuth = _collapse_duplicate_ticks(stroke)
        t_s = t * tick_seconds
        vx, vt = _forward_diff(x, t_s)
        vy, _ = _forward_diff(y, t_s)
        ax, at = _forward_diff(vx, vt)
        ay, _ = _forward_diff(vy, vt)
        jx, _ = _forward_diff(ax, at)
        jy, _ = _forward_diff(ay, at)
        per_channel["vx"].append(vx)
        per_channel["vy"].append(vy)
        per_channel["v"].append(np.hypot(vx, vy))
        per_channel["ax"].append(ax)
        per_channel["ay"].append(ay)
        per_channel["a"].append(np.hypot(ax, ay))
        per_channel["jx"].append(jx)
        per_channel["jy"].append(jy)
        per_channel["j"].append(np.hypot(jx, jy))
        per_channel["pressure"].append(pressure)
        per_channel["altitude"].append(altitude)
        per_channel["azimuth"].append(azimuth)
    return [
        ChannelSeries(channel=ch, values=np.concatenate(per_channel[ch]) if per_channel[ch] else np.empty(0))
        for ch in CHANNELS
    ]


def _stats10(values: np.ndarray) -> list[float]:
    """The 10 per-channel statistics with the degenerate-series defaults."""
    if values.size == 0:
        return [0.0] * 10
    mean = float(np.mean(values))
    centered = values - mean
    m2 = float(np.mean(centered**2))
    if m2 == 0.0:
        skew = kurt = 0.0
    else:
        skew = float(np.mean(centered**3)) / m2**1.5
        kurt = float(np.mean(centered**4)) / m2**2 - 3.0
    q1, q3 = np.percentile(values, [25.0, 75.0])
    vmin, vmax = float(np.min(values)), float(np.max(values))
    return [
        mean,
        float(np.median(values)),
        float(np.sqrt(m2)),
        vmin,
        vmax,
        vmax - vmin,
        float(q3 - q1),
        skew,
        kurt,
        float(np.sqrt(np.mean(values**2))),
    ]


def count_local_extrema(series) -> int:
    """Count strict interior extrema, with plateaus counted once at their start.

    A plateau (run of equal values) is an extremum when the nearest differing
    values on both sides are both below it (max) or both above it (min).
    """
    values = np.asarray(series, dtype=np.float64)
    if values.size < 3:
        return 0
    run_values = [values[0]]
    for v in values[1:]:
        if v != run_values[-1]:
            run_values.append(v)
    count = 0
    for i in range(1, len(run_values) - 1):
        lo, mid, hi = run_values[i - 1], run_values[i], run_values[i + 1]
        if (lo < mid and hi < mid) or (lo > mid and hi > mid):
            count += 1
    return count


def _mean_or_zero(values: list[float]) -> float:
    return float(np.mean(values)) if values else 0.0


def _std_or_zero(values: list[float]) -> float:
    return float(np.std(values)) if values else 0.0


def extract_online(
    record: HandwritingRecord,
    manifest: FeatureManifest,
    tick_seconds: float = DEFAULT_TICK_SECONDS,
) -> FeatureVector:
    """Compute the full 141-entry vector for one record, in manifest order."""
    if manifest.version != MANIFEST_VERSION:
        raise ValueError(f"unsupported manifest version {manifest.version!r}")
    strokes = segment_strokes(record)
    # Re-base on the first on-surface sample so absolute position/time never
    # enter any formula (exact translation/time-shift invariance).
    ref = strokes[0].samples[0]
    strokes = [
        Stroke(
            samples=tuple(
                PenSample(s.x - ref.x, s.y - ref.y, s.t - ref.t, s.on_surface, s.azimuth, s.altitude, s.pressure)
                for s in stroke.samples
            ),
            index=stroke.index,
        )
        for stroke in strokes
    ]

    features: dict[str, float] = {}
    channels = compute_channels(strokes, tick_seconds)
    by_name = {c.channel: c.values for c in channels}
    for channel in CHANNELS:
        for stat, value in zip(STATS, _stats10(by_name[channel])):
            features[f"{channel}_{stat}"] = value

    path_lens, horiz_lens, vert_lens, widths, heights, durations = [], [], [], [], [], []
    stroke_mean_ys: list[float] = []
    all_x: list[np.ndarray] = []
    all_y: list[np.ndarray] = []
    for stroke in strokes:
        x, y, t, *_ = _collapse_duplicate_ticks(stroke)
        dx, dy = np.diff(x), np.diff(y)
        path_lens.append(float(np.sum(np.hypot(dx, dy))))
        horiz_lens.append(float(np.sum(np.abs(dx))))
        vert_lens.append(float(np.sum(np.abs(dy))))
        widths.append(float(np.max(x) - np.min(x)))
        heights.append(float(np.max(y) - np.min(y)))
        durations.append(float((t[-1] - t[0]) * tick_seconds))
        stroke_mean_ys.append(float(np.mean(y)))
        all_x.append(x)
        all_y.append(y)
    for scalar, values in zip(STROKE_SCALARS, (path_lens, horiz_lens, vert_lens, widths, heights, durations)):
        features[f"stroke_{scalar}_mean"] = _mean_or_zero(values)
        features[f"stroke_{scalar}_std"] = _std_or_zero(values)

    xs = np.concatenate(all_x)
    ys = np.concatenate(all_y)
    record_mean_y = float(np.mean(ys))
    features["pen_lifts"] = float(len(strokes) - 1)
    features["total_duration"] = float(np.sum(durations))
    features["total_path_len"] = float(np.sum(path_lens))
    features["word_width"] = float(np.max(xs) - np.min(xs))
    features["word_height"] = float(np.max(ys) - np.min(ys))
    features["stroke_y_drift"] = stroke_mean_ys[-1] - stroke_mean_ys[0]
    features["stroke_y_var"] = float(np.mean((np.asarray(stroke_mean_ys) - record_mean_y) ** 2))
    features["v_extrema_count"] = float(count_local_extrema(by_name["v"]))
    features["a_extrema_count"] = float(count_local_extrema(by_name["a"]))

    values = np.array([features[name] for name in manifest.names()], dtype=np.float64)
    return FeatureVector(values=values, manifest_version=manifest.version, sample_id=record.sample_id)
