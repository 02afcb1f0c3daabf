"""Error metrics on de-normalized (physical-unit) forecasts.

All return percentages.  MAPE refuses near-zero actuals outright instead of
returning an unstable number; nMAE is the intended replacement for signals
that cross zero.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (BadValue, DegenerateActuals, NearZeroActual, ShapeMismatch,
                     TooShort)

TAIL_EPS = 1e-6
NEAR_ZERO = 1e-9


def _pair(y, yhat) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=np.float64).ravel()
    yhat = np.asarray(yhat, dtype=np.float64).ravel()
    if y.shape != yhat.shape:
        raise ShapeMismatch(f"y {y.shape} vs yhat {yhat.shape}")
    if y.size < 1:
        raise TooShort("need at least one sample")
    return y, yhat


def mse_pct(y, yhat) -> float:
    """Root mean squared error as a percent of mean load."""
    y, yhat = _pair(y, yhat)
    y_bar = y.mean()
    if y_bar <= 0.0:
        raise DegenerateActuals(f"mean actual {y_bar} must be positive")
    return float(100.0 * np.sqrt(np.mean((y - yhat) ** 2)) / y_bar)


def mape(y, yhat) -> float:
    y, yhat = _pair(y, yhat)
    if np.min(np.abs(y)) <= NEAR_ZERO:
        raise NearZeroActual("actuals touch zero; use nmae for this signal")
    return float(100.0 * np.mean(np.abs(y - yhat) / np.abs(y)))


def nmae(y, yhat) -> float:
    y, yhat = _pair(y, yhat)
    denom = np.mean(np.abs(y))
    if denom <= NEAR_ZERO:
        raise DegenerateActuals("mean |actual| is ~0")
    return float(100.0 * np.mean(np.abs(y - yhat)) / denom)


def signed_tails(y, yhat) -> tuple[float, float]:
    """P0.5 and P99.5 of the signed percentage error, linearly interpolated."""
    y, yhat = _pair(y, yhat)
    if y.size < 2:
        raise TooShort("tails need at least two samples")
    e = 100.0 * (yhat - y) / (y + TAIL_EPS)
    p05, p995 = np.percentile(e, [0.5, 99.5], method="linear")
    return float(p05), float(p995)


def temperature_variability(temp) -> float:
    """Population standard deviation of a temperature series, degrees C."""
    values = np.asarray(temp.values, dtype=np.float64)
    if values.size < 2:
        raise TooShort("sigma_T needs at least two samples")
    return float(values.std())


@dataclass
class MetricsReport:
    mse_pct: float
    mape: float
    nmae: float
    p05: float
    p995: float
    n: int
    y_bar: float
    context: tuple = ()   # (grid, model, W, condition)

    def __post_init__(self):
        if self.n < 1:
            raise BadValue("report needs n >= 1")
        if self.p05 > self.p995:
            raise BadValue(f"p05 {self.p05} > p995 {self.p995}")
        for field_name in ("mse_pct", "mape", "nmae", "p05", "p995", "y_bar"):
            if not np.isfinite(getattr(self, field_name)):
                raise BadValue(f"{field_name} is not finite")


def compute_report(y, yhat, context=()) -> MetricsReport:
    y_arr, _ = _pair(y, yhat)
    p05, p995 = signed_tails(y, yhat)
    return MetricsReport(
        mse_pct=mse_pct(y, yhat),
        mape=mape(y, yhat),
        nmae=nmae(y, yhat),
        p05=p05,
        p995=p995,
        n=int(y_arr.size),
        y_bar=float(y_arr.mean()),
        context=tuple(context))
