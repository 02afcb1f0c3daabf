"""Walk-forward backtest: fold arithmetic, leakage probes, pooled reports."""

from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from gridbench.backtest import (BacktestConfig, WalkForwardResult,
                                fold_origins, walk_forward)
from gridbench.errors import BadConfig, BadValue, NoFolds
from gridbench.fusion import FusionSpec, attach_fusion
from gridbench.models import ModelConfig, build_model
from gridbench.series import CovariateSet, HourlySeries
from gridbench.synth import SynthConfig, gen_synthetic_grid
from gridbench.training import TrainConfig

T0 = datetime(2022, 1, 3, tzinfo=timezone.utc)
HOUR = timedelta(hours=1)


def flat_series(hours, start=T0):
    rng = np.random.Generator(np.random.PCG64(9))
    values = 1000.0 + 50.0 * rng.standard_normal(hours)
    return HourlySeries("TEST", start, values)


def quick_train_cfg(**kw):
    base = dict(max_epochs=2, patience=1, batch_size=32, seed=3)
    base.update(kw)
    return TrainConfig(**base)


def smamba_factory(L=24, W=4, mode="temporal", covariates=()):
    def build(seed):
        cfg = ModelConfig(arch="s_mamba", d_model=8, n_layers=1, L=L, W=W,
                          heads=2, seed=seed, dropout=0.0, fusion_mode=mode,
                          covariate_count=len(covariates))
        model = build_model(cfg)
        if mode == "weather":
            attach_fusion(model, FusionSpec(
                mode="weather", strategy="early_sum",
                covariate_names=tuple(covariates),
                lag_per_covariate=tuple(3 for _ in covariates)))
        return model
    return build


# ------------------------------------------------------------- config checks


def test_config_validation():
    with pytest.raises(BadConfig):
        BacktestConfig(origin_start=T0, origin_end=T0)
    with pytest.raises(BadConfig):
        BacktestConfig(origin_start=T0, origin_end=T0 + HOUR, fold_step=24,
                       W=48)
    with pytest.raises(BadConfig):
        BacktestConfig(origin_start=T0, origin_end=T0 + HOUR, W=0)
    with pytest.raises(BadConfig):
        BacktestConfig(origin_start=T0, origin_end=T0 + HOUR,
                       window_stride=0)


def test_three_month_series_yields_two_folds():
    series = flat_series(2160)
    cfg = BacktestConfig(origin_start=T0 + 720 * HOUR,
                         origin_end=T0 + 2160 * HOUR, fold_step=720, W=24)
    assert fold_origins(cfg, series) == [720, 1440]


def test_origin_end_caps_folds():
    series = flat_series(2160)
    cfg = BacktestConfig(origin_start=T0 + 720 * HOUR,
                         origin_end=T0 + 1440 * HOUR, fold_step=720, W=24)
    assert fold_origins(cfg, series) == [720]


def test_data_availability_caps_folds():
    series = flat_series(2000)
    cfg = BacktestConfig(origin_start=T0 + 720 * HOUR,
                         origin_end=T0 + 2160 * HOUR, fold_step=720, W=24)
    assert fold_origins(cfg, series) == [720]


def test_off_grid_origin_rejected():
    series = flat_series(2160)
    cfg = BacktestConfig(origin_start=T0 + timedelta(minutes=30),
                         origin_end=T0 + 2160 * HOUR, fold_step=720, W=24)
    with pytest.raises(BadValue):
        fold_origins(cfg, series)


# --------------------------------------------------------------- walk_forward


def synth_series(hours=1440, seed=5):
    load, temp = gen_synthetic_grid(SynthConfig(hours=hours, seed=seed))
    covs = CovariateSet(names=["temp_c"], columns={"temp_c": temp},
                        lags={"temp_c": 3})
    return load, covs


def run_backtest(load, covs=None, origin_start=1100, origin_end=1340,
                 fold_step=120, W=4, mode="temporal", **train_kw):
    cfg = BacktestConfig(origin_start=T0 + origin_start * HOUR,
                         origin_end=T0 + origin_end * HOUR,
                         fold_step=fold_step, W=W, window_stride=6)
    names = tuple(covs.names) if covs is not None else ()
    factory = smamba_factory(W=W, mode=mode, covariates=names)
    return walk_forward(load, covs, factory, cfg, quick_train_cfg(**train_kw))


@pytest.fixture(scope="module")
def basic_result():
    load, _ = synth_series()
    return run_backtest(load)


def test_fold_layout(basic_result):
    result = basic_result
    assert isinstance(result, WalkForwardResult)
    assert [f.fold for f in result.folds] == [0, 1]
    assert [f.origin for f in result.folds] == [T0 + 1100 * HOUR,
                                                T0 + 1220 * HOUR]
    assert all(f.n_test == 120 - 4 + 1 for f in result.folds)
    assert all(f.n_train > 0 and f.n_val > 0 for f in result.folds)


def test_pooled_concatenates_folds(basic_result):
    result = basic_result
    assert result.pooled.n == sum(f.n_test * 4 for f in result.folds)
    assert all(np.isfinite(f.report.mape) for f in result.folds)
    assert np.isfinite(result.pooled.mape)


def test_fold_seeds_distinct_and_deterministic(basic_result):
    load, _ = synth_series()
    again = run_backtest(load)
    assert basic_result.folds[0].seed != basic_result.folds[1].seed
    assert [f.seed for f in again.folds] == \
           [f.seed for f in basic_result.folds]
    assert [f.train_checksum for f in again.folds] == \
           [f.train_checksum for f in basic_result.folds]
    assert again.pooled.mape == basic_result.pooled.mape


def test_post_origin_end_data_never_trains(basic_result):
    load, _ = synth_series()
    mutated = load.with_values(load.values.copy())
    mutated.values[1340:] = 77777.0
    result = run_backtest(mutated)
    assert [f.train_checksum for f in result.folds] == \
           [f.train_checksum for f in basic_result.folds]


def test_training_hour_mutation_changes_checksum(basic_result):
    load, _ = synth_series()
    mutated = load.with_values(load.values.copy())
    mutated.values[500] += 123.0
    result = run_backtest(mutated)
    assert result.folds[0].train_checksum != \
        basic_result.folds[0].train_checksum


def test_single_fold_equals_plain_split():
    load, _ = synth_series()
    result = run_backtest(load, origin_end=1220)
    assert len(result.folds) == 1
    only = result.folds[0].report
    assert result.pooled.n == only.n
    assert result.pooled.mape == pytest.approx(only.mape, rel=1e-12)
    assert result.pooled.mse_pct == pytest.approx(only.mse_pct, rel=1e-12)


def test_weather_covariates_flow_through():
    load, covs = synth_series()
    result = run_backtest(load, covs=covs, mode="weather")
    plain = run_backtest(load)
    assert len(result.folds) == 2
    assert np.isfinite(result.pooled.mape)
    assert result.folds[0].train_checksum != plain.folds[0].train_checksum


def test_no_folds_raised():
    load, _ = synth_series()
    cfg = BacktestConfig(origin_start=T0 + 2000 * HOUR,
                         origin_end=T0 + 2100 * HOUR, fold_step=120, W=4)
    with pytest.raises(NoFolds):
        walk_forward(load, None, smamba_factory(), cfg, quick_train_cfg())


def test_origin_before_lookback_rejected():
    load, _ = synth_series()
    cfg = BacktestConfig(origin_start=T0 + 12 * HOUR,
                         origin_end=T0 + 600 * HOUR, fold_step=120, W=4)
    with pytest.raises(NoFolds):
        walk_forward(load, None, smamba_factory(L=24), cfg, quick_train_cfg())


def test_tiny_training_slice_rejected():
    load, _ = synth_series()
    cfg = BacktestConfig(origin_start=T0 + 30 * HOUR,
                         origin_end=T0 + 600 * HOUR, fold_step=120, W=4)
    with pytest.raises(NoFolds):
        walk_forward(load, None, smamba_factory(L=24), cfg, quick_train_cfg())


def test_horizon_mismatch_rejected():
    load, _ = synth_series()
    cfg = BacktestConfig(origin_start=T0 + 1100 * HOUR,
                         origin_end=T0 + 1340 * HOUR, fold_step=120, W=24)
    with pytest.raises(BadConfig):
        walk_forward(load, None, smamba_factory(W=4), cfg, quick_train_cfg())


def test_covariate_clock_mismatch_rejected():
    load, covs = synth_series()
    shifted = CovariateSet(
        names=["temp_c"],
        columns={"temp_c": covs.columns["temp_c"].slice(1, 1300)},
        lags={"temp_c": 3})
    cfg = BacktestConfig(origin_start=T0 + 1100 * HOUR,
                         origin_end=T0 + 1340 * HOUR, fold_step=120, W=4)
    with pytest.raises(BadValue):
        walk_forward(load, shifted, smamba_factory(mode="weather",
                                                   covariates=("temp_c",)),
                     cfg, quick_train_cfg())
