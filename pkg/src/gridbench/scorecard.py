"""Benchmark scorecard arithmetic: row-level wins, macro averages, delta tables.

A bench table maps (grid, W) -> {model: {metric: value}}.  Reference tables
for the five main architectures ship as packaged CSV fixtures.
"""

import csv
import io
import json
from dataclasses import dataclass, field
from importlib import resources

from .errors import BadValue, KeyMismatch, MissingCell

SCORE_METRICS = ("mse_pct", "mape")
RESULT_FIELDS = ("grid", "model", "W", "condition", "fold",
                 "mse_pct", "mape", "nmae", "p05", "p995", "n", "y_bar")


def _model_set(rows):
    models = set()
    for cells in rows.values():
        models.update(cells)
    return sorted(models)


def _cell(rows, key, model, metric):
    cells = rows[key]
    if model not in cells or metric not in cells[model]:
        raise MissingCell(f"table row {key} has no {model}/{metric} cell")
    return float(cells[model][metric])


def win_tally(rows, metric: str) -> dict:
    """Per-model count of row minima; exact ties credit every tied model."""
    if not rows:
        raise MissingCell("win_tally needs at least one row")
    models = _model_set(rows)
    tally = {m: 0 for m in models}
    for key in rows:
        vals = {m: _cell(rows, key, m, metric) for m in models}
        best = min(vals.values())
        for m, v in vals.items():
            if v == best:
                tally[m] += 1
    return tally


def macro_average(rows, metric: str) -> dict:
    """Unweighted arithmetic mean over rows, per model."""
    if not rows:
        raise MissingCell("macro_average needs at least one row")
    models = _model_set(rows)
    return {m: sum(_cell(rows, key, m, metric) for key in rows) / len(rows)
            for m in models}


def delta_table(base: dict, augmented: dict):
    """Per-cell difference (augmented - base) plus per-model averages.

    Both arguments map (grid, model) -> value; negative deltas mean the
    augmented condition improved on the base.
    """
    if set(base) != set(augmented):
        missing = set(base) ^ set(augmented)
        raise KeyMismatch(f"base/augmented key sets differ on {sorted(missing)}")
    if not base:
        raise KeyMismatch("delta_table needs at least one cell")
    deltas = {k: float(augmented[k]) - float(base[k]) for k in base}
    models = sorted({m for _, m in deltas})
    averages = {}
    for model in models:
        vals = [d for (g, m), d in deltas.items() if m == model]
        averages[model] = sum(vals) / len(vals)
    return deltas, averages


@dataclass
class Scorecard:
    rows: dict
    wins: dict = field(default_factory=dict)
    macro: dict = field(default_factory=dict)

    def __post_init__(self):
        for metric, tally in self.wins.items():
            if sum(tally.values()) < len(self.rows):
                raise BadValue(
                    f"{metric} win tallies sum below row count; every row "
                    "must credit at least one model")


def build_scorecard(rows) -> Scorecard:
    return Scorecard(
        rows=rows,
        wins={m: win_tally(rows, m) for m in SCORE_METRICS},
        macro={m: macro_average(rows, m) for m in SCORE_METRICS},
    )


def scorecard_json(card: Scorecard) -> str:
    models = _model_set(card.rows)
    payload = {
        "rows": len(card.rows),
        "models": {
            m: {
                "mape_macro": round(card.macro["mape"][m], 4),
                "mse_macro": round(card.macro["mse_pct"][m], 4),
                "mape_wins": card.wins["mape"][m],
                "mse_wins": card.wins["mse_pct"][m],
            }
            for m in models
        },
    }
    return json.dumps(payload, indent=2, sort_keys=True)


def delta_json(deltas: dict, averages: dict) -> str:
    grids = sorted({g for g, _ in deltas})
    payload = {
        "cells": {g: {m: round(d, 4) for (gg, m), d in sorted(deltas.items())
                      if gg == g}
                  for g in grids},
        "averages": {m: round(v, 4) for m, v in sorted(averages.items())},
    }
    return json.dumps(payload, indent=2, sort_keys=True)


# ------------------------------------------------------------- fixture tables


def _fixture_text(name: str) -> str:
    return resources.files("gridbench").joinpath(f"fixtures/{name}").read_text()


def load_table2() -> dict:
    """Reference load-only benchmark: 30 (grid, W) rows x 5 models."""
    rows = {}
    for rec in csv.DictReader(io.StringIO(_fixture_text("table2.csv"))):
        key = (rec["grid"], int(rec["W"]))
        rows.setdefault(key, {})[rec["model"]] = {
            "mse_pct": float(rec["mse_pct"]),
            "mape": float(rec["mape"]),
            "p05": float(rec["p05"]),
            "p995": float(rec["p995"]),
        }
    return rows


def load_table4():
    """Reference weather-integration MAPE at W=24: (base, augmented) dicts
    keyed (grid, model)."""
    base, augmented = {}, {}
    for rec in csv.DictReader(io.StringIO(_fixture_text("table4.csv"))):
        key = (rec["grid"], rec["model"])
        target = base if rec["condition"] == "none" else augmented
        target[key] = float(rec["mape"])
    return base, augmented


# ------------------------------------------------------------ results CSV I/O


def write_results_csv(path, records, header_comments=()) -> None:
    """One row per (grid, model, W, condition, fold); '#' lines carry
    provenance such as config checksums and seeds."""
    with open(path, "w", newline="") as fh:
        for line in header_comments:
            fh.write(f"# {line}\n")
        writer = csv.DictWriter(fh, fieldnames=RESULT_FIELDS)
        writer.writeheader()
        for rec in records:
            writer.writerow({k: rec[k] for k in RESULT_FIELDS})


def read_results_csv(path) -> list:
    with open(path, newline="") as fh:
        body = [line for line in fh if not line.startswith("#")]
    records = []
    for rec in csv.DictReader(body):
        out = dict(rec)
        out["W"] = int(rec["W"])
        out["fold"] = int(rec["fold"])
        out["n"] = int(rec["n"])
        for key in ("mse_pct", "mape", "nmae", "p05", "p995", "y_bar"):
            out[key] = float(rec[key])
        records.append(out)
    return records


def rows_from_results(records, condition: str) -> dict:
    """Aggregate result records into a bench table, averaging over folds."""
    acc = {}
    for rec in records:
        if rec["condition"] != condition:
            continue
        key = (rec["grid"], rec["W"])
        acc.setdefault(key, {}).setdefault(rec["model"], []).append(rec)
    rows = {}
    for key, per_model in acc.items():
        rows[key] = {}
        for model, recs in per_model.items():
            rows[key][model] = {
                metric: sum(r[metric] for r in recs) / len(recs)
                for metric in ("mse_pct", "mape", "nmae", "p05", "p995")
            }
    return rows


def deltas_from_results(records, base_condition: str = "none",
                        augmented_condition: str = "weather",
                        metric: str = "mape"):
    """Collapse records to per-(grid, model) values and difference them."""
    def collapse(condition):
        acc = {}
        for rec in records:
            if rec["condition"] != condition:
                continue
            acc.setdefault((rec["grid"], rec["model"]), []).append(rec[metric])
        return {k: sum(v) / len(v) for k, v in acc.items()}

    return delta_table(collapse(base_condition),
                       collapse(augmented_condition))
