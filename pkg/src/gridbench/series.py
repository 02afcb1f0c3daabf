"""Hourly series ingestion, validation, normalization, and windowing.

All operations are pure: nothing here mutates its inputs, so the no-leakage
guarantees reduce to "norm stats are computed from the train slice you pass".
Timestamps are UTC throughout; cadence is strictly hourly.
"""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

import numpy as np

from .errors import (
    BadValue,
    DegenerateSeries,
    GapDetected,
    GapTooLong,
    NonMonotonic,
    TooShort,
)

HOUR = timedelta(hours=1)


class DuplicateHourWarning(UserWarning):
    """Raised-as-warning when a DST-style duplicated hour is dropped."""


def parse_timestamp(text: str) -> datetime:
    """ISO-8601 to aware UTC datetime; naive inputs are taken as UTC."""
    ts = datetime.fromisoformat(text.strip().replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


@dataclass
class HourlySeries:
    """One grid's hourly signal, strictly hourly from `start`."""
    grid_id: str
    start: datetime
    values: np.ndarray
    name: str = "demand_mw"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1 or len(self.values) < 1:
            raise BadValue("series needs a 1-D value array of length >= 1")

    def __len__(self):
        return len(self.values)

    def timestamp(self, i: int) -> datetime:
        return self.start + i * HOUR

    @property
    def end(self) -> datetime:
        return self.timestamp(len(self) - 1)

    def slice(self, lo: int, hi: int) -> "HourlySeries":
        return HourlySeries(self.grid_id, self.timestamp(lo), self.values[lo:hi].copy(),
                            self.name)

    def with_values(self, values: np.ndarray) -> "HourlySeries":
        return HourlySeries(self.grid_id, self.start, np.asarray(values, dtype=np.float64),
                            self.name)


@dataclass
class CovariateSet:
    """Named covariate series on a common clock with per-name lag hours."""
    names: list
    columns: dict
    lags: dict

    def __post_init__(self):
        ref = self.columns[self.names[0]]
        for n in self.names:
            col = self.columns[n]
            if len(col) != len(ref) or col.start != ref.start:
                raise BadValue(f"covariate {n!r} misaligned with {self.names[0]!r}")
            if self.lags.get(n, 0) < 0:
                raise BadValue(f"negative lag for {n!r}")

    def __len__(self):
        return len(self.columns[self.names[0]])


@dataclass
class NormStats:
    mean: float
    std: float


@dataclass
class SplitSpec:
    train_frac: float = 0.70
    val_frac: float = 0.15
    test_frac: float = 0.15

    def __post_init__(self):
        for f in (self.train_frac, self.val_frac, self.test_frac):
            if not 0.0 < f < 1.0:
                raise BadValue("split fractions must lie in (0, 1)")
        if abs(self.train_frac + self.val_frac + self.test_frac - 1.0) > 1e-9:
            raise BadValue("split fractions must sum to 1")


@dataclass
class WindowSample:
    """One training/eval example: lookback, calendar indices, optional weather, target."""
    x: np.ndarray          # (L,) normalized load
    hour_idx: np.ndarray   # (L,) ints 0-23
    dow_idx: np.ndarray    # (L,) ints 0-6, Monday=0
    weather: np.ndarray | None  # (L, F) normalized, lag-shifted
    y: np.ndarray          # (W,) normalized target
    origin: datetime       # timestamp of the last lookback hour


@dataclass
class Batch:
    x: np.ndarray           # (B, L)
    hour_idx: np.ndarray    # (B, L)
    dow_idx: np.ndarray     # (B, L)
    weather: np.ndarray | None  # (B, L, F)
    y: np.ndarray           # (B, W)
    origins: list = field(default_factory=list)


def batch_windows(samples) -> Batch:
    weather = None
    if samples[0].weather is not None:
        weather = np.stack([s.weather for s in samples])
    return Batch(
        x=np.stack([s.x for s in samples]),
        hour_idx=np.stack([s.hour_idx for s in samples]),
        dow_idx=np.stack([s.dow_idx for s in samples]),
        weather=weather,
        y=np.stack([s.y for s in samples]),
        origins=[s.origin for s in samples],
    )


# ------------------------------------------------------------------ CSV I/O


def parse_hourly_csv(text, value_column: str, grid_id: str = "",
                     on_gap: str = "error") -> HourlySeries:
    """Parse a `timestamp,<columns>` CSV into an HourlySeries.

    on_gap="error" raises GapDetected on any missing hour; on_gap="mark"
    inserts NaN markers so fill_gaps can interpolate them afterwards.
    Duplicated hours (DST fall-back exports) keep the first row and warn.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    lines = [ln for ln in io.StringIO(text) if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise BadValue("empty CSV")
    header = [h.strip() for h in lines[0].split(",")]
    if "timestamp" not in header:
        raise BadValue("missing 'timestamp' column")
    if value_column not in header:
        raise BadValue(f"missing {value_column!r} column")
    t_col, v_col = header.index("timestamp"), header.index(value_column)

    times, vals = [], []
    for ln in lines[1:]:
        parts = [p.strip() for p in ln.split(",")]
        try:
            ts = parse_timestamp(parts[t_col])
        except ValueError as e:
            raise BadValue(f"bad timestamp {parts[t_col]!r}") from e
        try:
            v = float(parts[v_col])
        except ValueError as e:
            raise BadValue(f"non-numeric value {parts[v_col]!r}") from e
        if not np.isfinite(v):
            raise BadValue(f"non-finite value at {parts[t_col]}")
        times.append(ts)
        vals.append(v)
    if not times:
        raise BadValue("CSV has a header but no rows")

    out_vals = [vals[0]]
    prev = times[0]
    for ts, v in zip(times[1:], vals[1:]):
        if ts < prev:
            raise NonMonotonic(f"timestamp {ts.isoformat()} decreases")
        if ts == prev:
            warnings.warn(f"duplicated hour {ts.isoformat()}: keeping first row",
                          DuplicateHourWarning)
            continue
        missing = int((ts - prev) / HOUR) - 1
        if missing > 0:
            if on_gap == "error":
                raise GapDetected(f"{missing} missing hour(s) before {ts.isoformat()}")
            out_vals.extend([np.nan] * missing)
        out_vals.append(v)
        prev = ts
    return HourlySeries(grid_id, times[0], np.array(out_vals), name=value_column)


def write_series_csv(series: HourlySeries, path, header_comments=()) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for c in header_comments:
            fh.write(f"# {c}\n")
        fh.write(f"timestamp,{series.name}\n")
        for i, v in enumerate(series.values):
            ts = series.timestamp(i).strftime("%Y-%m-%dT%H:%M:%SZ")
            fh.write(f"{ts},{v:.6f}\n")


def fill_gaps(series: HourlySeries, max_run: int = 3) -> HourlySeries:
    """Linearly interpolate NaN runs of length <= max_run; longer runs are errors.

    A NaN run touching either end of the series has no bounding value to
    interpolate from and is always an error.
    """
    if max_run < 0:
        raise BadValue("max_run must be >= 0")
    v = series.values
    if not np.any(np.isnan(v)):
        return series
    out = v.copy()
    isnan = np.isnan(v)
    i = 0
    n = len(v)
    while i < n:
        if not isnan[i]:
            i += 1
            continue
        j = i
        while j < n and isnan[j]:
            j += 1
        run = j - i
        if run > max_run:
            raise GapTooLong(f"gap of {run} hours at index {i} exceeds max_run={max_run}")
        if i == 0 or j == n:
            raise GapTooLong(f"gap at series edge (index {i}) cannot be interpolated")
        lo, hi = v[i - 1], v[j]
        for k in range(run):
            out[i + k] = lo + (hi - lo) * (k + 1) / (run + 1)
        i = j
    return series.with_values(out)


# ------------------------------------------------------------- split / norm


def chrono_split(series: HourlySeries, spec: SplitSpec | None = None):
    """Chronological (train, val, test) split; test takes the remainder."""
    spec = spec or SplitSpec()
    n = len(series)
    if n < 10:
        raise TooShort(f"need >= 10 hours to split, got {n}")
    n_train = int(np.floor(spec.train_frac * n))
    n_val = int(np.floor(spec.val_frac * n))
    return (series.slice(0, n_train),
            series.slice(n_train, n_train + n_val),
            series.slice(n_train + n_val, n))


def fit_norm_stats(train: HourlySeries) -> NormStats:
    """Mean and population standard deviation of the training slice only."""
    if len(train) < 2:
        raise TooShort("need >= 2 values for norm stats")
    mean = float(np.mean(train.values))
    std = float(np.std(train.values))  # population (ddof=0)
    if std <= 1e-8:
        raise DegenerateSeries(f"std {std:.3e} too small to normalize")
    return NormStats(mean=mean, std=std)


def apply_norm(values: np.ndarray, stats: NormStats) -> np.ndarray:
    return (np.asarray(values, dtype=np.float64) - stats.mean) / stats.std


def invert_norm(values: np.ndarray, stats: NormStats) -> np.ndarray:
    return np.asarray(values, dtype=np.float64) * stats.std + stats.mean


# -------------------------------------------------------------- calendar


def temporal_indices(ts: datetime):
    """(hour 0-23, day-of-week 0-6 with Monday=0) for a UTC timestamp."""
    return ts.hour, ts.weekday()


def series_temporal_indices(series_start: datetime, n: int):
    """Vectorized hour/dow indices for n consecutive hours from series_start."""
    h0 = series_start.hour
    hours = (h0 + np.arange(n)) % 24
    # absolute day number since epoch keeps weekday arithmetic exact
    day0 = series_start.toordinal()
    days = day0 + (h0 + np.arange(n)) // 24
    dows = (days - 1) % 7  # ordinal 1 = Monday 0001-01-01
    return hours.astype(np.int64), dows.astype(np.int64)


# ---------------------------------------------------------------- lag


@dataclass
class LagEstimate:
    lag: int
    peak_abs_corr: float
    confident: bool  # peak |corr| >= 0.1


def estimate_thermal_lag(train_load: HourlySeries, covariate: HourlySeries,
                         max_lag: int = 12) -> LagEstimate:
    """argmax_k |Pearson corr(load_t, covariate_{t-k})|, ties toward smaller k.

    When the peak |corr| stays below 0.1 the argmax is statistical noise, so
    the estimate falls back to lag 0 with confident=False (no shift applied).
    """
    y = train_load.values
    c = covariate.values
    if len(y) != len(c):
        raise TooShort("load and covariate lengths differ")
    if len(y) < 48:
        raise TooShort(f"need >= 48 hours, got {len(y)}")
    best_k, best_r = 0, -1.0
    for k in range(max_lag + 1):
        a = y[k:]
        b = c[:len(c) - k] if k else c
        sa, sb = np.std(a), np.std(b)
        if sa <= 1e-12 or sb <= 1e-12:
            r = 0.0
        else:
            r = abs(float(np.corrcoef(a, b)[0, 1]))
        if r > best_r + 1e-15:
            best_k, best_r = k, r
    if best_r < 0.1:
        return LagEstimate(lag=0, peak_abs_corr=best_r, confident=False)
    return LagEstimate(lag=best_k, peak_abs_corr=best_r, confident=True)


# ---------------------------------------------------------------- windows


def lag_shift(values: np.ndarray, lag: int) -> np.ndarray:
    """shifted[t] = values[t - lag]; the leading edge replicates values[0].

    Never reads indices after t, so windowing a shifted covariate cannot leak
    post-origin weather.
    """
    if lag == 0:
        return np.asarray(values, dtype=np.float64)
    out = np.empty_like(np.asarray(values, dtype=np.float64))
    out[:lag] = values[0]
    out[lag:] = values[:len(values) - lag]
    return out


def make_windows(load: HourlySeries, covariates: CovariateSet | None,
                 L: int, W: int, stride: int = 1):
    """Slice (lookback, target) samples; count = max(0, floor((n-L-W)/stride)+1).

    `load` (and covariate columns) are expected to be already normalized.
    """
    if L < 1 or W < 1 or stride < 1:
        raise BadValue("L, W, stride must be >= 1")
    n = len(load)
    if n < L + W:
        return []
    hours, dows = series_temporal_indices(load.start, n)
    shifted = None
    if covariates is not None:
        shifted = np.column_stack([
            lag_shift(covariates.columns[name].values, covariates.lags.get(name, 0))
            for name in covariates.names
        ])
    count = (n - L - W) // stride + 1
    samples = []
    for i in range(count):
        s = i * stride
        samples.append(WindowSample(
            x=load.values[s:s + L].copy(),
            hour_idx=hours[s:s + L].copy(),
            dow_idx=dows[s:s + L].copy(),
            weather=None if shifted is None else shifted[s:s + L].copy(),
            y=load.values[s + L:s + L + W].copy(),
            origin=load.timestamp(s + L - 1),
        ))
    return samples
