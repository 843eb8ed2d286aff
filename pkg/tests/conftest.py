import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from graphofuse.ingest import LABEL_TD, PenSample, make_record


def build_record(points, sample_id="rec", subject_id="subj", label=LABEL_TD, task="word"):
    """Record from (x, y, t, on_surface[, azimuth, altitude, pressure]) tuples."""
    samples = []
    for p in points:
        x, y, t, on = p[:4]
        azimuth = p[4] if len(p) > 4 else 1800
        altitude = p[5] if len(p) > 5 else 600
        pressure = p[6] if len(p) > 6 else (512 if on else 0)
        samples.append(PenSample(x, y, t, bool(on), azimuth, altitude, pressure))
    return make_record(subject_id, task, label, samples, sample_id)


@pytest.fixture
def record_factory():
    return build_record
