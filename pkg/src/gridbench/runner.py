"""Experiment harness: expand a TOML run spec into trained, scored runs.

A run spec names grids, architectures, horizons, and fusion conditions; the
harness executes their Cartesian product, appends one results row per
(grid, model, W, condition, fold), and writes a manifest plus checkpoint for
every run.  Outputs carry the spec checksum and seed so an unchanged spec
reproduces byte-identical files.
"""

import dataclasses
import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

try:
    import tomllib
except ImportError:          # python < 3.11
    import tomli as tomllib

from .backtest import BacktestConfig, walk_forward
from .checkpoint import save_checkpoint
from .errors import BadConfig, BadValue, GridBenchError
from .fusion import FusionSpec, STRATEGY_FOR_ARCH, attach_fusion
from .metrics import compute_report
from .models import ARCHS, FUSION_MODES, ModelConfig, build_model
from .scorecard import write_results_csv
from .series import (CovariateSet, HourlySeries, apply_norm, chrono_split,
                     estimate_thermal_lag, fill_gaps, fit_norm_stats,
                     invert_norm, make_windows, parse_hourly_csv,
                     parse_timestamp)
from .training import TrainConfig, predict_batches, train

MODEL_OVERRIDE_KEYS = ("d_model", "n_layers", "L", "patch_len", "patch_stride",
                       "heads", "bidirectional", "dropout")
MAX_LAG = 12


@dataclass
class GridData:
    load_path: Path
    weather_path: Path | None = None
    covariates: tuple = ()


@dataclass
class RunSpec:
    seed: int
    output_dir: Path
    grids: tuple
    architectures: tuple
    windows: tuple
    conditions: tuple
    data: dict
    train: TrainConfig
    model: dict
    backtest: dict | None
    window_stride: int
    source_path: Path
    source_sha256: str


@dataclass
class RunOutcome:
    results_path: Path
    rows: list
    failures: list

    @property
    def ok(self) -> bool:
        return not self.failures


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _require(table: dict, key: str, kind, where: str):
    if key not in table:
        raise BadConfig(f"{where}: missing required key {key!r}")
    value = table[key]
    if kind is float and isinstance(value, int):
        value = float(value)
    if not isinstance(value, kind):
        raise BadConfig(f"{where}: {key} must be {kind.__name__}, "
                        f"got {type(value).__name__}")
    return value


def _str_list(table: dict, key: str, where: str):
    value = _require(table, key, list, where)
    if not value or not all(isinstance(v, str) for v in value):
        raise BadConfig(f"{where}: {key} must be a non-empty list of strings")
    return tuple(value)


def load_runspec(path, env: dict | None = None) -> RunSpec:
    """Parse and validate a TOML run spec.

    Every referenced data path must exist at load time, so a corrupt spec
    fails before any training starts.  GRIDBENCH_SEED in the environment
    overrides the spec's seed.
    """
    path = Path(path)
    if not path.exists():
        raise BadConfig(f"run spec {path} does not exist")
    raw = path.read_bytes()
    try:
        doc = tomllib.loads(raw.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise BadConfig(f"run spec {path}: {exc}") from exc

    where = str(path)
    seed = _require(doc, "seed", int, where)
    if seed < 0:
        raise BadConfig(f"{where}: seed must be non-negative")
    env = os.environ if env is None else env
    if "GRIDBENCH_SEED" in env:
        try:
            seed = int(env["GRIDBENCH_SEED"])
        except ValueError:
            raise BadValue(
                f"GRIDBENCH_SEED={env['GRIDBENCH_SEED']!r} is not an integer")
        if seed < 0:
            raise BadValue("GRIDBENCH_SEED must be non-negative")

    output_dir = path.parent / _require(doc, "output_dir", str, where)
    grids = _str_list(doc, "grids", where)
    archs = _str_list(doc, "architectures", where)
    for a in archs:
        if a not in ARCHS:
            raise BadConfig(f"{where}: unknown architecture {a!r}")

    windows = _require(doc, "windows", list, where)
    if not windows or not all(isinstance(w, int) and w >= 1 for w in windows):
        raise BadConfig(f"{where}: windows must be a non-empty list of "
                        "positive ints")
    windows = tuple(windows)

    if "conditions" in doc:
        conditions = _str_list(doc, "conditions", where)
    elif "condition" in doc:
        conditions = (_require(doc, "condition", str, where),)
    else:
        raise BadConfig(f"{where}: missing required key 'conditions'")
    for c in conditions:
        if c not in FUSION_MODES:
            raise BadConfig(f"{where}: unknown condition {c!r}")

    data_tables = _require(doc, "data", dict, where)
    data = {}
    for grid in grids:
        if grid not in data_tables:
            raise BadConfig(f"{where}: no [data.{grid}] table")
        t = data_tables[grid]
        load_path = path.parent / _require(t, "load", str, f"[data.{grid}]")
        if not load_path.exists():
            raise BadConfig(f"[data.{grid}]: load path {load_path} "
                            "does not exist")
        weather_path = None
        covariates = ()
        if "weather" in t:
            weather_path = path.parent / _require(t, "weather", str,
                                                  f"[data.{grid}]")
            if not weather_path.exists():
                raise BadConfig(f"[data.{grid}]: weather path {weather_path} "
                                "does not exist")
            covariates = tuple(t.get("covariates", ()))
            if not covariates:
                raise BadConfig(f"[data.{grid}]: weather table needs a "
                                "non-empty covariates list")
        elif "weather" in conditions:
            raise BadConfig(f"{where}: condition 'weather' requires a "
                            f"weather path for grid {grid!r}")
        data[grid] = GridData(load_path=load_path, weather_path=weather_path,
                              covariates=covariates)

    try:
        train_cfg = TrainConfig(seed=seed, **doc.get("train", {}))
    except TypeError as exc:
        raise BadConfig(f"{where}: [train] {exc}") from exc

    model = dict(doc.get("model", {}))
    for key in model:
        if key not in MODEL_OVERRIDE_KEYS:
            raise BadConfig(f"{where}: [model] key {key!r} not allowed "
                            f"(choose from {MODEL_OVERRIDE_KEYS})")

    backtest = None
    if "backtest" in doc:
        bt = dict(doc["backtest"])
        for key in ("origin_start", "origin_end"):
            bt[key] = parse_timestamp(_require(bt, key, str, "[backtest]"))
        unknown = set(bt) - {"origin_start", "origin_end", "fold_step",
                             "window_stride"}
        if unknown:
            raise BadConfig(f"[backtest]: unknown keys {sorted(unknown)}")
        backtest = bt

    window_stride = doc.get("window_stride", 1)
    if not isinstance(window_stride, int) or window_stride < 1:
        raise BadConfig(f"{where}: window_stride must be a positive int")

    return RunSpec(seed=seed, output_dir=output_dir, grids=grids,
                   architectures=archs, windows=windows,
                   conditions=conditions, data=data, train=train_cfg,
                   model=model, backtest=backtest,
                   window_stride=window_stride, source_path=path,
                   source_sha256=hashlib.sha256(raw).hexdigest())


def expand_runs(spec: RunSpec) -> list:
    """Cartesian product in spec order: grid, then arch, then W, then
    condition."""
    return [(g, a, w, c)
            for g in spec.grids
            for a in spec.architectures
            for w in spec.windows
            for c in spec.conditions]


def run_id_for(grid: str, arch: str, W: int, condition: str) -> str:
    return f"{grid}_{arch}_W{W}_{condition}"


def _run_seed(base_seed: int, run_id: str) -> int:
    tag = int.from_bytes(hashlib.sha256(run_id.encode()).digest()[:4],
                         "little")
    return int(np.random.SeedSequence([base_seed, tag]).generate_state(1)[0])


@dataclass
class GridBundle:
    load: HourlySeries
    weather: dict          # name -> HourlySeries, raw units
    load_sha256: str
    weather_sha256: str | None


def _value_column(text: str) -> str:
    """First non-timestamp column of a CSV header ('#' comments skipped)."""
    for line in text.splitlines():
        if line.strip() and not line.startswith("#"):
            names = [h.strip() for h in line.split(",") if
                     h.strip() != "timestamp"]
            if not names:
                break
            return names[0]
    raise BadValue("CSV has no value column")


def load_grid_bundle(grid: str, gd: GridData) -> GridBundle:
    text = gd.load_path.read_text()
    load = fill_gaps(parse_hourly_csv(text, value_column=_value_column(text),
                                      grid_id=grid, on_gap="mark"))
    weather = {}
    weather_sha = None
    if gd.weather_path is not None:
        text = gd.weather_path.read_text()
        weather_sha = hashlib.sha256(text.encode()).hexdigest()
        for name in gd.covariates:
            col = fill_gaps(parse_hourly_csv(text, value_column=name,
                                             grid_id=grid, on_gap="mark"))
            if len(col) != len(load) or col.start != load.start:
                raise BadValue(
                    f"grid {grid}: weather column {name!r} clock "
                    f"({col.start.isoformat()}, {len(col)}h) does not match "
                    f"load ({load.start.isoformat()}, {len(load)}h)")
            weather[name] = col
    return GridBundle(load=load, weather=weather,
                       load_sha256=_sha256_file(gd.load_path),
                       weather_sha256=weather_sha)


def _norm_stats_for(values: np.ndarray):
    mean = float(np.mean(values))
    std = float(np.std(values))
    return mean, (std if std > 0 else 1.0)


def _covset(bundle: GridBundle, lags: dict, lo: int, hi: int,
            fit_hi: int) -> CovariateSet | None:
    """Covariate slice [lo, hi) z-scored with stats from hours [0, fit_hi)."""
    if not bundle.weather:
        return None
    cols = {}
    for name, col in bundle.weather.items():
        mean, std = _norm_stats_for(col.values[:fit_hi])
        sliced = col.slice(lo, hi)
        cols[name] = sliced.with_values((sliced.values - mean) / std)
    return CovariateSet(names=list(bundle.weather), columns=cols, lags=lags)


def estimate_lags(bundle: GridBundle, train_hours: int) -> dict:
    """Thermal lag per covariate from pre-boundary data only."""
    lags = {}
    load_head = bundle.load.slice(0, train_hours)
    for name, col in bundle.weather.items():
        est = estimate_thermal_lag(load_head, col.slice(0, train_hours),
                                   max_lag=MAX_LAG)
        lags[name] = est.lag
    return lags


def _report_row(report, grid, arch, W, condition, fold):
    return {"grid": grid, "model": arch, "W": W, "condition": condition,
            "fold": fold, "mse_pct": report.mse_pct, "mape": report.mape,
            "nmae": report.nmae, "p05": report.p05, "p995": report.p995,
            "n": report.n, "y_bar": report.y_bar}


def _history_dict(history):
    return {"epochs": [dataclasses.asdict(e) for e in history.epochs],
            "best_epoch": history.best_epoch,
            "best_val_mape": history.best_val_mape,
            "stopped_early": history.stopped_early}


def _execute_split_run(spec, bundle, grid, arch, W, condition, run_seed,
                       ckpt_base):
    """Plain 70/15/15 chronological run; returns (rows, manifest_extras)."""
    train_s, val_s, test_s = chrono_split(bundle.load)
    stats = fit_norm_stats(train_s)
    n_train, n_val = len(train_s), len(val_s)

    use_weather = condition == "weather"
    lags = estimate_lags(bundle, n_train) if use_weather else {}

    cfg = ModelConfig(arch=arch, W=W, fusion_mode=condition,
                      covariate_count=len(bundle.weather) if use_weather
                      else 0,
                      seed=run_seed, **spec.model)
    model = build_model(cfg)
    fspec = None
    if condition != "none":
        fspec = FusionSpec(
            mode=condition, strategy=STRATEGY_FOR_ARCH[arch],
            covariate_names=tuple(bundle.weather) if use_weather else (),
            lag_per_covariate=tuple(lags[n] for n in bundle.weather)
            if use_weather else ())
        attach_fusion(model, fspec)

    def windows_for(seg, lo, hi):
        norm = seg.with_values(apply_norm(seg.values, stats))
        cov = (_covset(bundle, lags, lo, hi, n_train) if use_weather
               else None)
        return make_windows(norm, cov, cfg.L, W, stride=spec.window_stride)

    train_w = windows_for(train_s, 0, n_train)
    val_w = windows_for(val_s, n_train, n_train + n_val)
    test_w = windows_for(test_s, n_train + n_val, len(bundle.load))
    if not test_w:
        raise BadValue(f"test slice of {len(test_s)} hours yields no "
                       f"windows at L={cfg.L}, W={W}")

    model, history = train(model, train_w, val_w,
                           replace(spec.train, seed=run_seed), stats)

    pred_n = predict_batches(model, test_w)
    true_n = np.stack([w.y for w in test_w])
    report = compute_report(invert_norm(true_n.ravel(), stats),
                            invert_norm(pred_n.ravel(), stats),
                            context=(grid, arch, W, condition))
    save_checkpoint(model, ckpt_base.with_name(ckpt_base.name + "_fold0"))

    rows = [_report_row(report, grid, arch, W, condition, fold=0)]
    extras = {
        "evaluation": "chrono_split",
        "split": {"n_train": n_train, "n_val": n_val, "n_test": len(test_s)},
        "lags": lags,
        "history": [_history_dict(history)],
        "reports": [dataclasses.asdict(report)],
        "checkpoints": [str(ckpt_base.name) + "_fold0"],
        "model_config": dataclasses.asdict(cfg),
        "fusion": dataclasses.asdict(fspec) if fspec else None,
    }
    return rows, extras


def _execute_backtest_run(spec, bundle, grid, arch, W, condition, run_seed,
                          ckpt_base):
    """Walk-forward run: one results row per fold."""
    bt = dict(spec.backtest)
    bt_cfg = BacktestConfig(origin_start=bt["origin_start"],
                            origin_end=bt["origin_end"],
                            fold_step=bt.get("fold_step", 720), W=W,
                            window_stride=bt.get("window_stride",
                                                 spec.window_stride))
    use_weather = condition == "weather"
    first_origin = max(1, int((bt_cfg.origin_start -
                               bundle.load.start).total_seconds()) // 3600)
    lags = estimate_lags(bundle, min(first_origin, len(bundle.load))) \
        if use_weather else {}

    cov = None
    if use_weather:
        cov = CovariateSet(names=list(bundle.weather),
                           columns=dict(bundle.weather), lags=lags)

    cfg_kwargs = dict(arch=arch, W=W, fusion_mode=condition,
                      covariate_count=len(bundle.weather) if use_weather
                      else 0, **spec.model)
    fspec = None
    if condition != "none":
        fspec = FusionSpec(
            mode=condition, strategy=STRATEGY_FOR_ARCH[arch],
            covariate_names=tuple(bundle.weather) if use_weather else (),
            lag_per_covariate=tuple(lags[n] for n in bundle.weather)
            if use_weather else ())

    def factory(seed):
        model = build_model(ModelConfig(seed=seed, **cfg_kwargs))
        if fspec is not None:
            attach_fusion(model, fspec)
        return model

    saved = []

    def checkpoint_fold(fold_result, model):
        base = ckpt_base.with_name(f"{ckpt_base.name}_fold{fold_result.fold}")
        save_checkpoint(model, base)
        saved.append(base.name)

    result = walk_forward(bundle.load, cov, factory, bt_cfg,
                          replace(spec.train, seed=run_seed),
                          on_fold=checkpoint_fold)

    rows = [_report_row(f.report, grid, arch, W, condition, fold=f.fold)
            for f in result.folds]
    extras = {
        "evaluation": "walk_forward",
        "backtest": {"origin_start": bt_cfg.origin_start.isoformat(),
                     "origin_end": bt_cfg.origin_end.isoformat(),
                     "fold_step": bt_cfg.fold_step,
                     "window_stride": bt_cfg.window_stride,
                     "folds": len(result.folds)},
        "lags": lags,
        "fold_seeds": [f.seed for f in result.folds],
        "train_checksums": [f.train_checksum for f in result.folds],
        "history": [_history_dict(f.history) for f in result.folds],
        "reports": [dataclasses.asdict(f.report) for f in result.folds],
        "pooled": dataclasses.asdict(result.pooled),
        "checkpoints": saved,
        "model_config": dict(cfg_kwargs),
        "fusion": dataclasses.asdict(fspec) if fspec else None,
    }
    return rows, extras


def _execute_run(spec: RunSpec, bundle: GridBundle, task) -> tuple:
    grid, arch, W, condition = task
    rid = run_id_for(grid, arch, W, condition)
    run_seed = _run_seed(spec.seed, rid)
    ckpt_base = spec.output_dir / "checkpoints" / rid

    runner = (_execute_backtest_run if spec.backtest is not None
              else _execute_split_run)
    rows, extras = runner(spec, bundle, grid, arch, W, condition, run_seed,
                          ckpt_base)

    manifest = {
        "run_id": rid,
        "grid": grid,
        "arch": arch,
        "W": W,
        "condition": condition,
        "run_seed": run_seed,
        "spec_seed": spec.seed,
        "spec_sha256": spec.source_sha256,
        "train_config": dataclasses.asdict(replace(spec.train,
                                                   seed=run_seed)),
        "data": {
            "load_path": str(spec.data[grid].load_path),
            "load_sha256": bundle.load_sha256,
            "weather_path": (str(spec.data[grid].weather_path)
                             if spec.data[grid].weather_path else None),
            "weather_sha256": bundle.weather_sha256,
            "n_hours": len(bundle.load),
        },
        **extras,
    }
    manifest_path = spec.output_dir / "manifests" / f"{rid}.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True)
                             + "\n")
    return rows, manifest_path


def run_spec(spec: RunSpec, jobs: int = 1, log=None) -> RunOutcome:
    """Execute every run in the spec's product; siblings survive failures.

    Data is loaded and validated up front, so path or parse errors raise
    before any training.  Per-run failures are recorded and the remaining
    runs still execute; the caller maps a non-empty failure list to exit 1.
    """
    if jobs < 1:
        raise BadConfig("jobs must be >= 1")
    log = log or (lambda msg: None)

    for sub in ("checkpoints", "manifests"):
        (spec.output_dir / sub).mkdir(parents=True, exist_ok=True)

    bundles = {g: load_grid_bundle(g, gd) for g, gd in spec.data.items()}
    tasks = expand_runs(spec)

    def one(task):
        grid, arch, W, condition = task
        rid = run_id_for(grid, arch, W, condition)
        try:
            rows, _ = _execute_run(spec, bundles[grid], task)
            log(f"ok   {rid} ({len(rows)} rows)")
            return rows, None
        except GridBenchError as exc:
            log(f"FAIL {rid}: {type(exc).__name__}: {exc}")
            return [], {"run_id": rid, "error": type(exc).__name__,
                        "message": str(exc)}

    if jobs == 1:
        outcomes = [one(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(one, tasks))

    all_rows, failures = [], []
    for rows, failure in outcomes:
        all_rows.extend(rows)
        if failure is not None:
            failures.append(failure)

    results_path = spec.output_dir / "results.csv"
    write_results_csv(results_path, all_rows, header_comments=(
        f"spec_sha256={spec.source_sha256}",
        f"seed={spec.seed}",
        f"runs={len(tasks)} failed={len(failures)}",
    ))
    if failures:
        (spec.output_dir / "failures.json").write_text(
            json.dumps(failures, indent=2, sort_keys=True) + "\n")
    return RunOutcome(results_path=results_path, rows=all_rows,
                      failures=failures)
