"""Telemetry ingestion, scaling, windowing, and a synthetic generator.

Series are bits-per-second values on a uniform sampling grid (default
5-minute).  All statistics use population moments.  Scaling is min-max to
[0, 1], fitted on the training split only; splits are chronological.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone

import numpy as np

from .errors import DataError
from .numeric import Rng

DEFAULT_INTERVAL = 300.0
DEFAULT_START = datetime(2024, 1, 1, tzinfo=timezone.utc)

DAILY_PERIOD_SAMPLES = 288    # 24 h of 5-minute samples
WEEKLY_PERIOD_SAMPLES = 2016  # 7 days of 5-minute samples

LINK_CAPACITY_BPS = 40e9  # values above this are physically suspect

CSV_HEADER = ("timestamp", "bps")


@dataclass
class TimeSeries:
    """Uniformly sampled univariate traffic series in bits per second."""

    values: np.ndarray
    start: datetime = DEFAULT_START
    interval: float = DEFAULT_INTERVAL

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.interval <= 0:
            raise DataError(f"interval must be positive, got {self.interval}")
        if not np.all(np.isfinite(self.values)):
            raise DataError("series contains non-finite values")
        if np.any(self.values < 0):
            raise DataError("series contains negative values")

    def __len__(self) -> int:
        return len(self.values)


@dataclass
class SummaryStats:
    """Population mean/std/var and Fisher skewness.

    ``skewness`` is None when the series is constant (std == 0), where the
    moment ratio is undefined.
    """

    mean: float
    std: float
    var: float
    skewness: float | None


@dataclass
class ScalerParams:
    """Min-max bounds fitted on training data only."""

    min: float
    max: float

    def __post_init__(self):
        if not self.max > self.min:
            raise DataError(f"scaler needs max > min, got min={self.min} max={self.max}")


@dataclass
class WindowedDataset:
    """Supervised (n_past -> n_future) windows, stride 1.

    Window k's target block immediately follows its input block in time.
    """

    inputs: np.ndarray   # (num_windows, n_past)
    targets: np.ndarray  # (num_windows, n_future)
    n_past: int
    n_future: int

    def __post_init__(self):
        if len(self.inputs) != len(self.targets):
            raise ValueError(
                f"inputs/targets count mismatch: {len(self.inputs)} vs {len(self.targets)}"
            )

    def __len__(self) -> int:
        return len(self.inputs)


def _parse_timestamp(text: str) -> float:
    """Epoch seconds from an integer or ISO-8601 string (naive = UTC)."""
    text = text.strip()
    try:
        return float(int(text))
    except ValueError:
        pass
    iso = text.replace("Z", "+00:00")
    dt = datetime.fromisoformat(iso)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def load_csv(path, interval: float | None = None) -> tuple[TimeSeries, int]:
    """Read a ``timestamp,bps`` file into a series.

    Missing grid slots are filled by linear interpolation; the returned
    count is the number of interpolated points.  Rows that do not parse,
    non-monotone timestamps, and negative values are rejected.
    """
    times: list[float] = []
    values: list[float] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if lineno == 1:
                if [c.strip().lower() for c in row] != list(CSV_HEADER):
                    raise DataError(f"{path}: line 1: expected header 'timestamp,bps'")
                continue
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise DataError(f"{path}: line {lineno}: expected 2 columns, got {len(row)}")
            try:
                ts = _parse_timestamp(row[0])
                val = float(row[1])
            except (ValueError, OverflowError) as exc:
                raise DataError(f"{path}: line {lineno}: unparseable row: {exc}") from exc
            if not math.isfinite(val):
                raise DataError(f"{path}: line {lineno}: non-finite value")
            if val < 0:
                raise DataError(f"{path}: line {lineno}: negative value {val}")
            if times and ts <= times[-1]:
                raise DataError(f"{path}: line {lineno}: non-monotone timestamp")
            times.append(ts)
            values.append(val)
    if len(times) < 2:
        raise DataError(f"{path}: need at least 2 data rows, got {len(times)}")

    deltas = np.diff(times)
    step = float(interval) if interval is not None else float(deltas.min())
    filled: list[float] = [values[0]]
    warnings = 0
    for k, delta in enumerate(deltas):
        m = delta / step
        m_int = round(m)
        if m_int < 1 or abs(m - m_int) > 1e-6:
            raise DataError(
                f"{path}: timestamp gap of {delta}s at row {k + 2} is not a "
                f"multiple of the {step}s interval"
            )
        for j in range(1, m_int):
            filled.append(values[k] + (values[k + 1] - values[k]) * j / m_int)
            warnings += 1
        filled.append(values[k + 1])

    start = datetime.fromtimestamp(times[0], tz=timezone.utc)
    return TimeSeries(np.array(filled), start=start, interval=step), warnings


def write_csv(series: TimeSeries, path) -> None:
    """Emit ``timestamp,bps`` rows; values keep full float precision."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for k, v in enumerate(series.values):
            ts = series.start + timedelta(seconds=k * series.interval)
            writer.writerow([ts.strftime("%Y-%m-%dT%H:%M:%SZ"), repr(float(v))])


def counters_to_bps(
    samples, interval: float = DEFAULT_INTERVAL, start: datetime = DEFAULT_START
) -> tuple[TimeSeries, list[str]]:
    """Octet-counter readings -> bps series (delta x 8 / interval).

    64-bit counter wraps show up as negative deltas and get 2^64 added
    back.  Rates beyond the 40 Gbps link capacity are flagged in the
    returned warning list, not rejected.
    """
    samples = list(samples)
    if len(samples) < 2:
        raise DataError(f"need at least 2 counter samples, got {len(samples)}")
    # keep exact integer arithmetic through the wrap correction: near-2^64
    # counter values are not representable in float64
    deltas = []
    for prev, cur in zip(samples, samples[1:]):
        delta = cur - prev
        if delta < 0:
            delta += 2 ** 64
        deltas.append(float(delta))
    bps = np.array(deltas) * 8.0 / interval
    warnings = [
        f"sample {k + 1}: rate {bps[k]:.6g} bps exceeds {LINK_CAPACITY_BPS:.0f} bps capacity"
        for k in np.nonzero(bps > LINK_CAPACITY_BPS)[0]
    ]
    return TimeSeries(bps, start=start, interval=interval), warnings


def summary_stats(series) -> SummaryStats:
    """Population moments of a series (or raw array)."""
    values = series.values if isinstance(series, TimeSeries) else np.asarray(series, dtype=np.float64)
    if len(values) < 2:
        raise DataError(f"summary statistics need >= 2 points, got {len(values)}")
    mean = float(values.mean())
    centered = values - mean
    var = float(np.mean(centered ** 2))
    std = math.sqrt(var)
    if std == 0.0:
        skew = None
    else:
        skew = float(np.mean(centered ** 3) / std ** 3)
    return SummaryStats(mean=mean, std=std, var=var, skewness=skew)


def fit_scaler(train: np.ndarray) -> ScalerParams:
    """Min-max bounds from the training split.  Constant input is rejected."""
    train = np.asarray(train, dtype=np.float64)
    lo, hi = float(train.min()), float(train.max())
    if hi == lo:
        raise DataError("cannot fit scaler on a constant series (max == min)")
    return ScalerParams(min=lo, max=hi)


def scale(x, params: ScalerParams) -> np.ndarray:
    """Map train-min to 0 and train-max to 1; out-of-range inputs may leave [0, 1]."""
    return (np.asarray(x, dtype=np.float64) - params.min) / (params.max - params.min)


def inverse_scale(x, params: ScalerParams) -> np.ndarray:
    return np.asarray(x, dtype=np.float64) * (params.max - params.min) + params.min


def make_windows(values: np.ndarray, n_past: int, n_future: int) -> WindowedDataset:
    """Stride-1 sliding windows over a (scaled) value array."""
    values = np.asarray(values, dtype=np.float64)
    needed = n_past + n_future
    if len(values) < needed:
        raise DataError(
            f"series of length {len(values)} too short for windows: "
            f"need at least n_past + n_future = {needed}"
        )
    windows = np.lib.stride_tricks.sliding_window_view(values, needed)
    return WindowedDataset(
        inputs=windows[:, :n_past].copy(),
        targets=windows[:, n_past:].copy(),
        n_past=n_past,
        n_future=n_future,
    )


def concat_windows(parts: list[WindowedDataset]) -> WindowedDataset:
    """Merge per-series window sets; no window straddles a series boundary."""
    if not parts:
        raise ValueError("no window sets to concatenate")
    first = parts[0]
    for p in parts[1:]:
        if (p.n_past, p.n_future) != (first.n_past, first.n_future):
            raise ValueError("window sets disagree on n_past/n_future")
    return WindowedDataset(
        inputs=np.concatenate([p.inputs for p in parts]),
        targets=np.concatenate([p.targets for p in parts]),
        n_past=first.n_past,
        n_future=first.n_future,
    )


def split(series: TimeSeries, ratio: float, min_points: int | None = None) -> tuple[TimeSeries, TimeSeries]:
    """Chronological split at floor(ratio * length); never shuffles.

    ``min_points`` (typically n_past + n_future) rejects splits that leave
    a side too short to window.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"split ratio must be in (0, 1), got {ratio}")
    cut = int(math.floor(ratio * len(series.values)))
    if min_points is not None and (cut < min_points or len(series.values) - cut < min_points):
        raise DataError(
            f"split at {cut}/{len(series.values)} leaves a side shorter than {min_points} points"
        )
    train = TimeSeries(series.values[:cut].copy(), start=series.start, interval=series.interval)
    test_start = series.start + timedelta(seconds=cut * series.interval)
    test = TimeSeries(series.values[cut:].copy(), start=test_start, interval=series.interval)
    return train, test


@dataclass
class SynthProfile:
    """Parameters of the synthetic traffic generator."""

    base_bps: float
    daily_amp: float = 0.0
    weekly_amp: float = 0.0
    trend_per_day: float = 0.0
    noise_std: float = 0.0
    seed: int = 0


def synth(profile: SynthProfile, length: int, start: datetime = DEFAULT_START) -> TimeSeries:
    """Base level + daily/weekly sinusoids + linear trend + Gaussian noise.

    Deterministic per seed.  Profiles that dip below zero are rejected;
    pick amplitudes and noise so values stay nonnegative.
    """
    if length < 1:
        raise ValueError(f"length must be >= 1, got {length}")
    k = np.arange(length, dtype=np.float64)
    values = (
        profile.base_bps
        + profile.daily_amp * np.sin(2.0 * np.pi * k / DAILY_PERIOD_SAMPLES)
        + profile.weekly_amp * np.sin(2.0 * np.pi * k / WEEKLY_PERIOD_SAMPLES)
        + profile.trend_per_day * (k / DAILY_PERIOD_SAMPLES)
    )
    if profile.noise_std > 0:
        rng = Rng(profile.seed)
        values = values + rng.normal_array(length, 0.0, profile.noise_std)
    if np.any(values < 0):
        raise DataError("synthetic profile produced negative traffic; reduce amplitudes or noise")
    return TimeSeries(values, start=start, interval=DEFAULT_INTERVAL)
