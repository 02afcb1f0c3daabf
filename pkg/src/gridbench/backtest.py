"""Rolling-origin walk-forward backtesting with per-fold retraining.

Fold k issues forecasts for the fold_step hours starting at origin
o_k = origin_start + k*fold_step.  Training sees only hours strictly before
o_k (expanding window); the last 15% of that slice is held out to drive
early stopping.  Each fold retrains from scratch with a seed derived from
(seed, k), so folds are independent and reproducible in isolation.
"""

import hashlib
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta

import numpy as np

from .errors import BadConfig, BadValue, NoFolds
from .metrics import MetricsReport, compute_report
from .series import (CovariateSet, HourlySeries, NormStats, apply_norm,
                     invert_norm, make_windows)
from .training import History, TrainConfig, predict_batches, train

VAL_FRAC = 0.15
HOUR = timedelta(hours=1)


@dataclass
class BacktestConfig:
    origin_start: datetime
    origin_end: datetime
    fold_step: int = 720
    W: int = 24
    window_stride: int = 1

    def __post_init__(self):
        if self.origin_start >= self.origin_end:
            raise BadConfig("origin_start must precede origin_end")
        if self.W < 1 or self.fold_step < self.W:
            raise BadConfig("need 1 <= W <= fold_step")
        if self.window_stride < 1:
            raise BadConfig("window_stride must be >= 1")


@dataclass
class FoldResult:
    fold: int
    origin: datetime
    seed: int
    report: MetricsReport
    history: History
    n_train: int
    n_val: int
    n_test: int
    train_checksum: str


@dataclass
class WalkForwardResult:
    folds: list
    pooled: MetricsReport
    config: BacktestConfig = None


def _hour_offset(ts: datetime, start: datetime) -> int:
    seconds = (ts - start).total_seconds()
    if seconds != int(seconds) or int(seconds) % 3600:
        raise BadValue(f"{ts.isoformat()} is not on the hourly grid of the series")
    return int(seconds) // 3600


def fold_origins(cfg: BacktestConfig, series: HourlySeries) -> list:
    """Hour offsets of every complete fold origin.

    A fold is complete when its origin precedes origin_end and all
    fold_step test hours exist in the series.
    """
    o0 = _hour_offset(cfg.origin_start, series.start)
    oe = _hour_offset(cfg.origin_end, series.start)
    origins = []
    k = 0
    while True:
        o = o0 + k * cfg.fold_step
        if o >= oe or o + cfg.fold_step > len(series):
            return origins
        origins.append(o)
        k += 1


def _fold_seed(base_seed: int, k: int) -> int:
    return int(np.random.SeedSequence([base_seed, k]).generate_state(1)[0])


def _norm_covariates(covariates: CovariateSet | None, lo: int, hi: int,
                     fit_hi: int):
    """Slice [lo, hi) of every covariate, normalized by [0, fit_hi) moments."""
    if covariates is None:
        return None
    columns = {}
    for name in covariates.names:
        col = covariates.columns[name]
        head = col.values[:fit_hi]
        std = float(np.std(head))
        stats = NormStats(float(np.mean(head)), std if std > 0 else 1.0)
        sliced = col.slice(lo, hi)
        columns[name] = sliced.with_values(apply_norm(sliced.values, stats))
    return CovariateSet(names=list(covariates.names), columns=columns,
                        lags=dict(covariates.lags))


def _checksum(stats: NormStats, *window_lists) -> str:
    h = hashlib.sha256()
    h.update(np.float64([stats.mean, stats.std]).tobytes())
    for windows in window_lists:
        for w in windows:
            h.update(np.ascontiguousarray(w.x).tobytes())
            h.update(np.ascontiguousarray(w.y).tobytes())
            if w.weather is not None:
                h.update(np.ascontiguousarray(w.weather).tobytes())
    return h.hexdigest()


def _origin_index(w, series: HourlySeries) -> int:
    return _hour_offset(w.origin, series.start)


def walk_forward(series: HourlySeries, covariates: CovariateSet | None,
                 model_factory, cfg: BacktestConfig,
                 train_cfg: TrainConfig, on_fold=None) -> WalkForwardResult:
    """Retrain per fold, score each test block, pool errors in fold order.

    model_factory(seed) must return a freshly initialized model; its
    configured horizon must equal cfg.W.  on_fold(fold_result, model), when
    given, runs before the fold's model is discarded (checkpointing hook).
    """
    origins = fold_origins(cfg, series)
    if not origins:
        raise NoFolds(
            f"no complete fold between {cfg.origin_start.isoformat()} and "
            f"{cfg.origin_end.isoformat()} in {len(series)} hours")
    if covariates is not None:
        ref = covariates.columns[covariates.names[0]]
        if len(ref) != len(series) or ref.start != series.start:
            raise BadValue("covariates must share the load series clock")
    max_lag = max(covariates.lags.values(), default=0) if covariates else 0

    folds = []
    pooled_y, pooled_yhat = [], []
    for k, o in enumerate(origins):
        seed = _fold_seed(train_cfg.seed, k)
        model = model_factory(seed)
        L, W = model.config.L, model.config.W
        if W != cfg.W:
            raise BadConfig(f"model horizon {W} != backtest horizon {cfg.W}")
        if o < L:
            raise NoFolds(f"fold {k} origin at hour {o} precedes lookback {L}")

        boundary = int(np.floor((1.0 - VAL_FRAC) * o))
        head = series.values[:boundary]
        std = float(np.std(head))
        stats = NormStats(float(np.mean(head)), std if std > 0 else 1.0)

        hist_slice = series.slice(0, o)
        hist_norm = hist_slice.with_values(apply_norm(hist_slice.values, stats))
        hist_cov = _norm_covariates(covariates, 0, o, boundary)
        hist_windows = make_windows(hist_norm, hist_cov, L, W,
                                    stride=cfg.window_stride)
        train_w, val_w = [], []
        for w in hist_windows:
            t = _origin_index(w, series)
            if t + W < boundary:
                train_w.append(w)
            elif t + 1 >= boundary:
                val_w.append(w)
        if not train_w or not val_w:
            raise NoFolds(
                f"fold {k} training slice of {o} hours yields "
                f"{len(train_w)} train / {len(val_w)} val windows")

        left = max(0, o - L - max_lag)
        test_slice = series.slice(left, o + cfg.fold_step)
        test_norm = test_slice.with_values(apply_norm(test_slice.values, stats))
        test_cov = _norm_covariates(covariates, left, o + cfg.fold_step,
                                    boundary)
        test_w = [w for w in make_windows(test_norm, test_cov, L, W)
                  if _origin_index(w, series) >= o - 1]
        if not test_w:
            raise NoFolds(f"fold {k} produced no test windows")

        checksum = _checksum(stats, train_w, val_w)
        model, history = train(model, train_w, val_w,
                               replace(train_cfg, seed=seed), stats)

        pred_n = predict_batches(model, test_w)
        true_n = np.stack([w.y for w in test_w])
        yhat = invert_norm(pred_n.ravel(), stats)
        y = invert_norm(true_n.ravel(), stats)
        report = compute_report(y, yhat, context=(series.grid_id, "fold", k))
        folds.append(FoldResult(
            fold=k, origin=series.timestamp(o), seed=seed, report=report,
            history=history, n_train=len(train_w), n_val=len(val_w),
            n_test=len(test_w), train_checksum=checksum))
        if on_fold is not None:
            on_fold(folds[-1], model)
        pooled_y.append(y)
        pooled_yhat.append(yhat)

    pooled = compute_report(np.concatenate(pooled_y),
                            np.concatenate(pooled_yhat),
                            context=(series.grid_id, "pooled"))
    return WalkForwardResult(folds=folds, pooled=pooled, config=cfg)
