"""Reproducible synthetic load/temperature pairs for desk-scale benchmarking.

The load signal is additive: a weekday/weekend base factor, a daily sinusoid
peaking in the evening, a U-shaped response to lagged temperature, and
Gaussian noise.  Temperature combines daily and annual sinusoids with a
persistent AR(1) anomaly, which is what makes weather covariates genuinely
informative beyond calendar features.

All randomness comes from one counter-based Philox stream keyed by the seed,
with a fixed draw order, so output is bit-identical across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import BadValue, ConfigInvariantViolated
from .series import HourlySeries, series_temporal_indices, write_series_csv


@dataclass
class SynthConfig:
    hours: int = 17520  # two years
    base_mw: float = 1000.0
    daily_amp: float = 170.0
    weekend_dip: float = 0.10
    temp_mean_c: float = 20.0
    temp_daily_amp_c: float = 7.0
    temp_annual_amp_c: float = 9.0
    inflection_c: float = 18.0
    heat_slope: float = 8.0    # MW per degC below the inflection
    cool_slope: float = 15.0   # MW per degC above the inflection
    lag_hours: int = 3
    noise_std: float = 30.0
    seed: int = 42
    grid_id: str = "synth"
    # start on a Monday so weekday structure is phase-stable across lengths
    start: datetime = field(
        default_factory=lambda: datetime(2022, 1, 3, 0, tzinfo=timezone.utc))
    temp_noise_std: float = 0.3
    temp_anomaly_std: float = 1.8   # AR(1) innovation
    temp_anomaly_phi: float = 0.95  # AR(1) persistence (weather fronts)
    load_peak_hour: float = 21.0
    temp_peak_hour: float = 15.0
    annual_peak_day: float = 195.0  # mid-July

    def __post_init__(self):
        if self.hours < 24 * 14:
            raise BadValue("hours must be >= 336 (two weeks)")
        if not 0.05 <= self.weekend_dip <= 0.15:
            raise BadValue("weekend_dip must lie in [0.05, 0.15]")
        for name in ("daily_amp", "temp_daily_amp_c", "temp_annual_amp_c",
                     "noise_std", "temp_noise_std", "temp_anomaly_std"):
            if getattr(self, name) < 0:
                raise BadValue(f"{name} must be >= 0")
        if self.lag_hours < 0:
            raise BadValue("lag_hours must be >= 0")


def u_shape_response(temp_c, cfg: SynthConfig):
    """MW response: heating below the inflection, cooling above, zero at it."""
    t = np.asarray(temp_c, dtype=np.float64)
    out = (cfg.heat_slope * np.maximum(0.0, cfg.inflection_c - t)
           + cfg.cool_slope * np.maximum(0.0, t - cfg.inflection_c))
    return float(out) if np.isscalar(temp_c) else out


def _realized_checks(load: np.ndarray, hours_idx: np.ndarray, dow_idx: np.ndarray):
    prof = np.array([load[hours_idx == h].mean() for h in range(24)])
    ratio = prof.max() / prof.min()
    weekend = dow_idx >= 5
    dip_ratio = load[weekend].mean() / load[~weekend].mean()
    return ratio, dip_ratio


def gen_synthetic_grid(cfg: SynthConfig):
    """Generate (load, temp) HourlySeries; same seed => bit-identical output."""
    n = cfg.hours
    rng = np.random.Generator(np.random.Philox(key=cfg.seed))
    # fixed draw order: anomaly innovations, temp noise, load noise
    eps_anom = rng.standard_normal(n)
    eps_temp = rng.standard_normal(n)
    eps_load = rng.standard_normal(n)

    hours_idx, dow_idx = series_temporal_indices(cfg.start, n)
    t = np.arange(n, dtype=np.float64)
    day_of_year = (cfg.start.timetuple().tm_yday - 1 + t / 24.0) % 365.25

    anomaly = np.empty(n)
    a = 0.0
    for i in range(n):
        a = cfg.temp_anomaly_phi * a + cfg.temp_anomaly_std * eps_anom[i]
        anomaly[i] = a
    temp = (cfg.temp_mean_c
            + cfg.temp_daily_amp_c * np.cos(2 * np.pi * (hours_idx - cfg.temp_peak_hour) / 24.0)
            + cfg.temp_annual_amp_c * np.cos(2 * np.pi * (day_of_year - cfg.annual_peak_day) / 365.25)
            + anomaly
            + cfg.temp_noise_std * eps_temp)

    weekday_factor = np.where(dow_idx >= 5, 1.0 - cfg.weekend_dip, 1.0)
    # semidiurnal shape: twin peaks at load_peak_hour and load_peak_hour - 12
    # (orthogonal to the diurnal temperature fundamental at every lag, so the
    # behavioral cycle cannot masquerade as thermal response)
    daily = cfg.daily_amp * np.cos(2 * np.pi * (hours_idx - cfg.load_peak_hour) / 12.0)
    lagged_temp = np.empty(n)
    lag = cfg.lag_hours
    lagged_temp[:lag] = temp[0] if lag else 0.0
    lagged_temp[lag:] = temp[:n - lag] if lag else temp
    load = (cfg.base_mw * weekday_factor
            + daily
            + u_shape_response(lagged_temp, cfg)
            + cfg.noise_std * eps_load)

    ratio, dip_ratio = _realized_checks(load, hours_idx, dow_idx)
    if not 1.3 <= ratio <= 1.7:
        raise ConfigInvariantViolated(
            f"realized daily peak/trough ratio {ratio:.3f} outside [1.3, 1.7]")
    if not 0.85 <= dip_ratio <= 0.95:
        raise ConfigInvariantViolated(
            f"realized weekend/weekday ratio {dip_ratio:.3f} outside [0.85, 0.95]")

    load_s = HourlySeries(cfg.grid_id, cfg.start, load, name="demand_mw")
    temp_s = HourlySeries(cfg.grid_id, cfg.start, temp, name="temp_c")
    return load_s, temp_s


def write_synth_csvs(cfg: SynthConfig, out_dir):
    """Generate and write the load/temp pair; returns (load_path, temp_path).

    Output carries the generating config in '#' comments but no wall-clock
    fields, so the same config always reproduces identical bytes.
    """
    load_s, temp_s = gen_synthetic_grid(cfg)
    provenance = (f"synthetic grid_id={cfg.grid_id} hours={cfg.hours} "
                  f"seed={cfg.seed} lag_hours={cfg.lag_hours}",)
    load_path = Path(out_dir) / f"{cfg.grid_id}_load.csv"
    temp_path = Path(out_dir) / f"{cfg.grid_id}_temp.csv"
    write_series_csv(load_s, load_path, header_comments=provenance)
    write_series_csv(temp_s, temp_path, header_comments=provenance)
    return load_path, temp_path
