"""gridbench command line: ingest, synth, run, backtest, scorecard.

Exit codes are a stable CI contract: 0 success, 1 run or aggregation
failure, 2 usage or spec failure (one-line diagnostic on stderr).
"""

import argparse
import dataclasses
import hashlib
import json
import sys
from pathlib import Path

from .backtest import BacktestConfig, walk_forward
from .errors import GridBenchError, MissingCell, NonFinite
from .fetch import (WEATHER_FIELDS, fetch_eia_demand, fetch_weather_archive,
                    write_weather_csv)
from .fusion import FusionSpec, STRATEGY_FOR_ARCH, attach_fusion
from .models import ARCHS, ModelConfig, build_model
from .runner import (GridData, estimate_lags, load_grid_bundle, load_runspec,
                     run_spec)
from .scorecard import (build_scorecard, delta_json, deltas_from_results,
                        read_results_csv, rows_from_results, scorecard_json)
from .series import CovariateSet, parse_timestamp
from .synth import SynthConfig, write_synth_csvs
from .training import TrainConfig


def _sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ----------------------------------------------------------------- synth


def cmd_synth(args) -> int:
    cfg = SynthConfig(hours=args.hours, seed=args.seed, grid_id=args.grid_id,
                      lag_hours=args.lag_hours, noise_std=args.noise_std,
                      base_mw=args.base_mw)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    load_path, temp_path = write_synth_csvs(cfg, out)
    config = dataclasses.asdict(cfg)
    config["start"] = cfg.start.isoformat()
    manifest = {
        "config": config,
        "files": {load_path.name: _sha256(load_path),
                  temp_path.name: _sha256(temp_path)},
    }
    (out / "synth_manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"wrote {load_path} {temp_path} ({cfg.hours} hours, "
          f"seed {cfg.seed})")
    return 0


# ------------------------------------------------------------------- run


def cmd_run(args) -> int:
    spec = load_runspec(args.spec)
    outcome = run_spec(spec, jobs=args.jobs, log=print)
    print(f"{len(outcome.rows)} result rows -> {outcome.results_path}")
    if outcome.failures:
        print(f"{len(outcome.failures)} run(s) failed "
              f"(see {spec.output_dir / 'failures.json'})", file=sys.stderr)
        return 1
    return 0


# -------------------------------------------------------------- backtest


def cmd_backtest(args) -> int:
    gd = GridData(load_path=Path(args.load),
                  weather_path=Path(args.weather) if args.weather else None,
                  covariates=tuple(args.covariates.split(","))
                  if args.covariates else ())
    if gd.weather_path and not gd.covariates:
        print("gridbench: --weather requires --covariates", file=sys.stderr)
        return 2
    for p in (gd.load_path, gd.weather_path):
        if p is not None and not p.exists():
            print(f"gridbench: path {p} does not exist", file=sys.stderr)
            return 2
    bundle = load_grid_bundle(args.grid_id, gd)

    condition = "weather" if bundle.weather else "temporal"
    lags = {}
    if bundle.weather:
        first = max(48, int((parse_timestamp(args.origin_start) -
                             bundle.load.start).total_seconds()) // 3600)
        lags = estimate_lags(bundle, min(first, len(bundle.load)))

    cfg = BacktestConfig(origin_start=parse_timestamp(args.origin_start),
                         origin_end=parse_timestamp(args.origin_end),
                         fold_step=args.fold_step, W=args.W,
                         window_stride=args.window_stride)
    train_cfg = TrainConfig(seed=args.seed, max_epochs=args.max_epochs,
                            patience=min(args.patience, args.max_epochs - 1),
                            batch_size=args.batch_size)

    def factory(seed):
        model = build_model(ModelConfig(
            arch=args.arch, W=args.W, L=args.L, d_model=args.d_model,
            n_layers=args.n_layers, fusion_mode=condition,
            covariate_count=len(bundle.weather), seed=seed))
        attach_fusion(model, FusionSpec(
            mode=condition, strategy=STRATEGY_FOR_ARCH[args.arch],
            covariate_names=tuple(bundle.weather),
            lag_per_covariate=tuple(lags[n] for n in bundle.weather)))
        return model

    cov = (CovariateSet(names=list(bundle.weather),
                        columns=dict(bundle.weather), lags=lags)
           if bundle.weather else None)
    try:
        result = walk_forward(bundle.load, cov, factory, cfg, train_cfg)
    except NonFinite as exc:
        print(f"gridbench: training diverged: {exc}", file=sys.stderr)
        return 1

    payload = {
        "grid": args.grid_id,
        "arch": args.arch,
        "config": {"origin_start": cfg.origin_start.isoformat(),
                   "origin_end": cfg.origin_end.isoformat(),
                   "fold_step": cfg.fold_step, "W": cfg.W},
        "seed": args.seed,
        "lags": lags,
        "folds": [{
            "fold": f.fold, "origin": f.origin.isoformat(), "seed": f.seed,
            "n_train": f.n_train, "n_val": f.n_val, "n_test": f.n_test,
            "train_checksum": f.train_checksum,
            "report": dataclasses.asdict(f.report),
        } for f in result.folds],
        "pooled": dataclasses.asdict(result.pooled),
    }
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"{len(result.folds)} fold(s), pooled MAPE "
          f"{result.pooled.mape:.3f} -> {out}")
    return 0


# ------------------------------------------------------------- scorecard


def _plot_deltas(deltas: dict, out_dir: Path) -> list:
    """Per-grid bar chart of weather-vs-none MAPE deltas, static SVG."""
    import matplotlib
    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "gridbench"
    import matplotlib.pyplot as plt

    written = []
    grids = sorted({g for g, _ in deltas})
    for grid in grids:
        models = sorted(m for g, m in deltas if g == grid)
        values = [deltas[(grid, m)] for m in models]
        fig, ax = plt.subplots(figsize=(6, 3.2))
        colors = ["#2a6f4e" if v < 0 else "#b04a3a" for v in values]
        ax.bar(range(len(models)), values, color=colors)
        ax.axhline(0.0, color="black", linewidth=0.8)
        ax.set_xticks(range(len(models)), models, rotation=20, fontsize=8)
        ax.set_ylabel("ΔMAPE (weather − none)")
        ax.set_title(f"{grid}: weather fusion effect")
        fig.tight_layout()
        path = out_dir / f"delta_{grid}.svg"
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        written.append(path)
    return written


def cmd_scorecard(args) -> int:
    records = read_results_csv(args.results)
    if not records:
        print("gridbench: results CSV has no rows", file=sys.stderr)
        return 1
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    conditions = sorted({r["condition"] for r in records})

    written = []
    try:
        for condition in conditions:
            rows = rows_from_results(records, condition)
            if not rows:
                continue
            card = build_scorecard(rows)
            path = out_dir / f"scorecard_{condition}.json"
            path.write_text(scorecard_json(card) + "\n")
            written.append(path)
        if {"none", "weather"} <= set(conditions):
            deltas, averages = deltas_from_results(records)
            path = out_dir / "delta.json"
            path.write_text(delta_json(deltas, averages) + "\n")
            written.append(path)
            if args.plots:
                written.extend(_plot_deltas(deltas, out_dir))
    except MissingCell as exc:
        print(f"gridbench: incomplete results table: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------- ingest


def cmd_ingest(args, session=None) -> int:
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.source == "eia":
        if not args.api_key:
            print("gridbench: --source eia requires --api-key",
                  file=sys.stderr)
            return 2
        series = fetch_eia_demand(args.grid_id, parse_timestamp(args.start),
                                  parse_timestamp(args.end), args.api_key,
                                  out_path=out, session=session)
        print(f"{len(series)} hours of {args.grid_id} demand -> {out}")
    else:
        if args.lat is None or args.lon is None:
            print("gridbench: --source weather requires --lat and --lon",
                  file=sys.stderr)
            return 2
        names = (tuple(args.covariates.split(",")) if args.covariates
                 else tuple(WEATHER_FIELDS))
        covs = fetch_weather_archive(args.lat, args.lon,
                                     parse_timestamp(args.start),
                                     parse_timestamp(args.end),
                                     out_path=out, names=names,
                                     session=session, grid_id=args.grid_id)
        n = len(covs.columns[covs.names[0]])
        print(f"{n} hours of {len(covs.names)} covariate(s) -> {out}")
    return 0


# ---------------------------------------------------------------- parser


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="gridbench",
        description="Grid load forecasting benchmark harness.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic grid")
    s.add_argument("--hours", type=int, default=17520)
    s.add_argument("--seed", type=int, default=42)
    s.add_argument("--out", required=True)
    s.add_argument("--grid-id", default="synth")
    s.add_argument("--base-mw", type=float, default=1000.0)
    s.add_argument("--lag-hours", type=int, default=3)
    s.add_argument("--noise-std", type=float, default=15.0)
    s.set_defaults(func=cmd_synth)

    r = sub.add_parser("run", help="execute a TOML run spec")
    r.add_argument("spec")
    r.add_argument("--jobs", type=int, default=1)
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("backtest", help="walk-forward backtest one model")
    b.add_argument("--load", required=True)
    b.add_argument("--arch", required=True, choices=ARCHS)
    b.add_argument("--grid-id", default="grid")
    b.add_argument("--weather")
    b.add_argument("--covariates")
    b.add_argument("--origin-start", required=True)
    b.add_argument("--origin-end", required=True)
    b.add_argument("--fold-step", type=int, default=720)
    b.add_argument("--window-stride", type=int, default=1)
    b.add_argument("--W", type=int, default=24)
    b.add_argument("--L", type=int, default=240)
    b.add_argument("--d-model", type=int, default=32)
    b.add_argument("--n-layers", type=int, default=2)
    b.add_argument("--max-epochs", type=int, default=30)
    b.add_argument("--patience", type=int, default=10)
    b.add_argument("--batch-size", type=int, default=64)
    b.add_argument("--seed", type=int, default=42)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_backtest)

    c = sub.add_parser("scorecard", help="aggregate a results CSV")
    c.add_argument("results")
    c.add_argument("--out", required=True)
    c.add_argument("--plots", action="store_true")
    c.set_defaults(func=cmd_scorecard)

    i = sub.add_parser("ingest", help="fetch demand or weather data")
    i.add_argument("--source", required=True, choices=("eia", "weather"))
    i.add_argument("--grid-id", default="grid")
    i.add_argument("--start", required=True)
    i.add_argument("--end", required=True)
    i.add_argument("--out", required=True)
    i.add_argument("--api-key")
    i.add_argument("--lat", type=float)
    i.add_argument("--lon", type=float)
    i.add_argument("--covariates")
    i.set_defaults(func=cmd_ingest)
    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except GridBenchError as exc:
        print(f"gridbench: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"gridbench: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
