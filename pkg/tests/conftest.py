from datetime import datetime

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from actirhythm.preprocess import ActivitySeries

settings.register_profile(
    "suite", max_examples=100, deadline=None,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("suite")

MIDNIGHT = datetime(2016, 5, 1)


def make_series(values, start=MIDNIGHT, subject_id="s1") -> ActivitySeries:
    """Contiguous minute series starting at ``start``."""
    return ActivitySeries.from_minutes(subject_id, start, np.asarray(values, float))


def make_window(day_values) -> ActivitySeries:
    """Windowed-style series from a list of 1440-minute days (or a flat
    array whose length is a multiple of 1440), all days valid."""
    if isinstance(day_values, (list, tuple)):
        arr = np.concatenate([np.asarray(d, float) for d in day_values])
    else:
        arr = np.asarray(day_values, float)
    assert arr.size % 1440 == 0
    return make_series(arr)


@pytest.fixture
def rng():
    return np.random.default_rng(20160501)
