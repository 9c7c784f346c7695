"""Statistical activity features: mean/SD, M10, L5, relative amplitude,
RMSSD, RMSSD/SD, and immobile minutes per day.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import BothZero, IncompleteDays, InsufficientData, TooShort
from .preprocess import MINUTES_PER_DAY, ActivitySeries


@dataclass(frozen=True)
class FeatureConfig:
    immobile_threshold: float = 0.0
    per_day: bool = False          # M10/L5 per day then averaged across days
    ra_raw_sums: bool = False      # literal (m10-l5)/(m10+l5) on raw sums
    sample_sd: bool = False        # N-1 divisor instead of N


@dataclass(frozen=True, eq=False)
class MinuteProfile:
    """Across-day mean count for each minute of day (length 1440)."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (MINUTES_PER_DAY,):
            raise ValueError("profile must have exactly 1440 values")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class ActivityFeatures:
    mean: float
    sd: float
    m10: float
    t_m10: float
    l5: float
    t_l5: float
    ra: float
    rmssd: float
    rmssd_sd: float
    immobile_minutes: float

    FIELDS = ("mean", "sd", "m10", "t_m10", "l5", "t_l5", "ra", "rmssd",
              "rmssd_sd", "immobile_minutes")


def _day_matrix(series: ActivitySeries) -> np.ndarray:
    blocks = []
    for d in range(series.n_days):
        if not series.day_valid[d]:
            raise IncompleteDays("series contains invalid days")
        block = series.day_block(d)
        if block.size != MINUTES_PER_DAY or series.day_offset_minutes(d) != 0:
            raise IncompleteDays("series contains partial days")
        blocks.append(block)
    return np.vstack(blocks)


def minute_profile(series: ActivitySeries) -> MinuteProfile:
    """Mean count per minute-of-day over the (complete, valid) days."""
    return MinuteProfile(_day_matrix(series).mean(axis=0))


def _window_sums(values: np.ndarray, width: int) -> np.ndarray:
    wrapped = np.concatenate([values, values[: width - 1]]) if width > 1 else values
    return sliding_window_view(wrapped, width).sum(axis=1)


def _window_extreme(values: np.ndarray, width: int, mode: str) -> tuple[float, int]:
    n = values.size
    if not 1 <= width <= n:
        raise ValueError(f"width must be in [1, {n}], got {width}")
    if mode not in ("max", "min"):
        raise ValueError(f"mode must be 'max' or 'min', got {mode!r}")
    sums = _window_sums(values, width)
    idx = int(np.argmax(sums) if mode == "max" else np.argmin(sums))
    return float(sums[idx]), idx


def window_extreme(profile: MinuteProfile, width: int, mode: str) -> tuple[float, int]:
    """Extreme circular window sum over all 1440 start minutes.

    Ties break to the smallest start minute.
    """
    return _window_extreme(profile.values, width, mode)


def relative_amplitude(m10: float, l5: float, raw_sums: bool = False) -> float:
    """(M10 - L5) / (M10 + L5) with L5 rescaled to the 10 h duration, so a
    flat profile scores 0. ``raw_sums`` applies the formula to the raw
    600- and 300-minute sums instead.
    """
    if m10 < 0 or l5 < 0:
        raise ValueError("window sums must be non-negative")
    scaled = l5 if raw_sums else 2.0 * l5
    if m10 + scaled == 0:
        raise BothZero("M10 and L5 are both zero")
    return (m10 - scaled) / (m10 + scaled)


def rmssd(series: ActivitySeries) -> float:
    """Root mean square of successive differences over valid minutes; pairs
    that span a removed day are excluded."""
    total = 0.0
    count = 0
    for d in range(series.n_days):
        if not series.day_valid[d]:
            continue
        block = series.day_block(d)
        if block.size >= 2:
            diffs = np.diff(block)
            total += float(diffs @ diffs)
            count += diffs.size
        if d + 1 < series.n_days and series.day_valid[d + 1] \
                and (series.day_dates[d + 1] - series.day_dates[d]).days == 1:
            lo = series.day_starts[d + 1]
            step = series.values[lo] - series.values[lo - 1]
            total += float(step * step)
            count += 1
    if count == 0:
        raise TooShort("need at least two consecutive valid minutes")
    return math.sqrt(total / count)


def immobile_minutes(series: ActivitySeries, threshold: float = 0.0) -> float:
    """Valid minutes at or below the threshold, per valid day."""
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    n_valid_days = int(series.day_valid.sum())
    if n_valid_days == 0:
        raise InsufficientData("no valid days")
    values = series.values[series.valid_minutes_mask()]
    return float(np.count_nonzero(values <= threshold)) / n_valid_days


def _circular_mean_minute(starts: list[int]) -> float:
    theta = 2.0 * np.pi * np.asarray(starts, dtype=float) / MINUTES_PER_DAY
    c, s = np.cos(theta).mean(), np.sin(theta).mean()
    if math.hypot(c, s) < 1e-12:
        return 0.0
    return float((math.atan2(s, c) * MINUTES_PER_DAY / (2.0 * np.pi)) % MINUTES_PER_DAY)


def compute_features(series: ActivitySeries,
                     config: FeatureConfig = FeatureConfig()) -> ActivityFeatures:
    """Full feature battery for a windowed series (complete valid days).

    ``rmssd_sd`` is NaN when the series is constant (sd = 0).
    """
    values = series.values[series.valid_minutes_mask()]
    mean = float(values.mean())
    sd = float(values.std(ddof=1 if config.sample_sd else 0))

    if config.per_day:
        days = _day_matrix(series)
        m10s, t10s, l5s, t5s = [], [], [], []
        for row in days:
            s10, t10 = _window_extreme(row, 600, "max")
            s5, t5 = _window_extreme(row, 300, "min")
            m10s.append(s10)
            t10s.append(t10)
            l5s.append(s5)
            t5s.append(t5)
        m10 = float(np.mean(m10s))
        l5 = float(np.mean(l5s))
        t_m10 = _circular_mean_minute(t10s)
        t_l5 = _circular_mean_minute(t5s)
    else:
        profile = minute_profile(series)
        m10, t10 = window_extreme(profile, 600, "max")
        l5, t5 = window_extreme(profile, 300, "min")
        t_m10 = float(t10)
        t_l5 = float(t5)

    ra = relative_amplitude(m10, l5, raw_sums=config.ra_raw_sums)
    rm = rmssd(series)
    rmssd_sd = rm / sd if sd > 0 else float("nan")
    immobile = immobile_minutes(series, config.immobile_threshold)
    return ActivityFeatures(mean=mean, sd=sd, m10=m10, t_m10=t_m10, l5=l5,
                            t_l5=t_l5, ra=ra, rmssd=rm, rmssd_sd=rmssd_sd,
                            immobile_minutes=immobile)
