"""CLI surface: subcommands, exit codes, artifact shape."""

import json
import shutil
from datetime import timedelta

import pytest

from gridbench.cli import _build_parser, cmd_ingest, main
from gridbench.scorecard import write_results_csv
from gridbench.synth import SynthConfig, gen_synthetic_grid, write_synth_csvs

RUN_SPEC = """\
seed = 11
output_dir = "out"
grids = ["g1"]
architectures = ["s_mamba"]
windows = [4]
conditions = ["temporal"]
window_stride = 6

[data.g1]
load = "g1_load.csv"

[train]
max_epochs = 2
patience = 1
batch_size = 32

[model]
d_model = 8
n_layers = 1
L = 24
dropout = 0.0
"""


@pytest.fixture(scope="module")
def source_data(tmp_path_factory):
    d = tmp_path_factory.mktemp("clidata")
    write_synth_csvs(SynthConfig(hours=1440, seed=7, grid_id="g1"), d)
    return d


@pytest.fixture
def workspace(tmp_path, source_data):
    shutil.copy(source_data / "g1_load.csv", tmp_path / "g1_load.csv")
    shutil.copy(source_data / "g1_temp.csv", tmp_path / "g1_temp.csv")
    return tmp_path


def rec(grid, model, condition, mape, mse=7.0, W=24, fold=0):
    return {"grid": grid, "model": model, "W": W, "condition": condition,
            "fold": fold, "mse_pct": mse, "mape": mape, "nmae": 0.9 * mape,
            "p05": -2.0, "p995": 2.0, "n": 100, "y_bar": 1000.0}


# --------------------------------------------------------------- synth


def test_synth_writes_deterministic_files(tmp_path, capsys):
    out = tmp_path / "d"
    argv = ["synth", "--hours", "720", "--seed", "5", "--out", str(out)]
    assert main(argv) == 0
    load = out / "synth_load.csv"
    temp = out / "synth_temp.csv"
    manifest_path = out / "synth_manifest.json"
    assert load.exists() and temp.exists() and manifest_path.exists()

    manifest = json.loads(manifest_path.read_text())
    assert manifest["config"]["hours"] == 720
    assert manifest["config"]["seed"] == 5
    import hashlib
    assert manifest["files"]["synth_load.csv"] == \
        hashlib.sha256(load.read_bytes()).hexdigest()

    before = (load.read_bytes(), temp.read_bytes(),
              manifest_path.read_bytes())
    assert main(argv) == 0
    assert (load.read_bytes(), temp.read_bytes(),
            manifest_path.read_bytes()) == before


def test_synth_missing_out_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["synth", "--hours", "720"])
    assert exc.value.code == 2


def test_synth_invalid_hours_is_usage_error(tmp_path, capsys):
    rc = main(["synth", "--hours", "100", "--out", str(tmp_path / "d")])
    assert rc == 2
    err = capsys.readouterr().err.strip()
    assert err.startswith("gridbench:") and "\n" not in err


# ----------------------------------------------------------------- run


def test_run_spec_end_to_end(workspace, capsys):
    spec = workspace / "spec.toml"
    spec.write_text(RUN_SPEC)
    assert main(["run", str(spec)]) == 0
    results = workspace / "out" / "results.csv"
    assert results.exists()
    assert "# seed=11" in results.read_text()
    out = capsys.readouterr().out
    assert "1 result rows" in out


def test_run_env_seed_lands_in_outputs(workspace, monkeypatch):
    spec = workspace / "spec.toml"
    spec.write_text(RUN_SPEC)
    monkeypatch.setenv("GRIDBENCH_SEED", "77")
    assert main(["run", str(spec)]) == 0
    assert "# seed=77" in (workspace / "out" / "results.csv").read_text()


def test_run_missing_spec_is_exit_2(tmp_path, capsys):
    assert main(["run", str(tmp_path / "nope.toml")]) == 2
    err = capsys.readouterr().err.strip()
    assert err.startswith("gridbench:") and "\n" not in err


def test_run_corrupt_data_path_is_exit_2_before_training(workspace, capsys):
    spec = workspace / "spec.toml"
    spec.write_text(RUN_SPEC.replace("g1_load.csv", "gone.csv"))
    assert main(["run", str(spec)]) == 2
    assert not (workspace / "out" / "results.csv").exists()


def test_run_partial_failure_is_exit_1(workspace, capsys):
    start = gen_synthetic_grid(
        SynthConfig(hours=1440, seed=7, grid_id="g1"))[0].start
    lines = ["timestamp,demand_mw"]
    for i in range(400):
        t = start + timedelta(hours=i)
        lines.append(f"{t.strftime('%Y-%m-%dT%H:%M:%SZ')},100.0")
    (workspace / "flat_load.csv").write_text("\n".join(lines) + "\n")
    body = RUN_SPEC.replace('grids = ["g1"]', 'grids = ["flat", "g1"]')
    body += '\n[data.flat]\nload = "flat_load.csv"\n'
    spec = workspace / "spec.toml"
    spec.write_text(body)

    assert main(["run", str(spec)]) == 1
    assert (workspace / "out" / "failures.json").exists()
    results = (workspace / "out" / "results.csv").read_text()
    assert "g1,s_mamba" in results        # sibling completed


# ------------------------------------------------------------ scorecard


def test_scorecard_emits_json_and_deltas(tmp_path, capsys):
    records = [
        rec("A", "m1", "none", 5.0), rec("A", "m2", "none", 6.0),
        rec("A", "m1", "weather", 4.0), rec("A", "m2", "weather", 6.5),
    ]
    csv_path = tmp_path / "results.csv"
    write_results_csv(csv_path, records)
    out = tmp_path / "cards"
    assert main(["scorecard", str(csv_path), "--out", str(out)]) == 0

    card = json.loads((out / "scorecard_none.json").read_text())
    assert card["rows"] == 1
    assert card["models"]["m1"]["mape_wins"] == 1
    delta = json.loads((out / "delta.json").read_text())
    assert delta["cells"]["A"]["m1"] == pytest.approx(-1.0)
    assert delta["cells"]["A"]["m2"] == pytest.approx(0.5)
    assert delta["averages"]["m1"] == pytest.approx(-1.0)


def test_scorecard_plots_svg(tmp_path):
    records = [
        rec("A", "m1", "none", 5.0), rec("A", "m1", "weather", 4.0),
        rec("B", "m1", "none", 7.0), rec("B", "m1", "weather", 7.2),
    ]
    csv_path = tmp_path / "results.csv"
    write_results_csv(csv_path, records)
    out = tmp_path / "cards"
    assert main(["scorecard", str(csv_path), "--out", str(out),
                 "--plots"]) == 0
    for grid in ("A", "B"):
        svg = (out / f"delta_{grid}.svg").read_text()
        assert svg.lstrip().startswith("<?xml")
        assert "svg" in svg


def test_scorecard_empty_csv_is_exit_1(tmp_path, capsys):
    csv_path = tmp_path / "results.csv"
    write_results_csv(csv_path, [])
    assert main(["scorecard", str(csv_path), "--out",
                 str(tmp_path / "cards")]) == 1
    assert "no rows" in capsys.readouterr().err


def test_scorecard_missing_cell_is_exit_1(tmp_path, capsys):
    records = [
        rec("A", "m1", "none", 5.0), rec("A", "m2", "none", 6.0),
        rec("B", "m1", "none", 7.0),   # B lacks m2
    ]
    csv_path = tmp_path / "results.csv"
    write_results_csv(csv_path, records)
    assert main(["scorecard", str(csv_path), "--out",
                 str(tmp_path / "cards")]) == 1
    assert "incomplete" in capsys.readouterr().err


# ------------------------------------------------------------- backtest


def test_backtest_command(workspace, capsys):
    start = gen_synthetic_grid(
        SynthConfig(hours=1440, seed=7, grid_id="g1"))[0].start
    o_start = (start + timedelta(hours=1100)).strftime("%Y-%m-%dT%H:%M:%SZ")
    o_end = (start + timedelta(hours=1340)).strftime("%Y-%m-%dT%H:%M:%SZ")
    out = workspace / "bt.json"
    rc = main(["backtest", "--load", str(workspace / "g1_load.csv"),
               "--arch", "s_mamba", "--grid-id", "g1",
               "--origin-start", o_start, "--origin-end", o_end,
               "--fold-step", "120", "--W", "4", "--L", "24",
               "--d-model", "8", "--n-layers", "1", "--max-epochs", "2",
               "--batch-size", "32", "--window-stride", "6",
               "--out", str(out)])
    assert rc == 0
    payload = json.loads(out.read_text())
    assert len(payload["folds"]) == 2
    assert payload["pooled"]["n"] > 0
    assert payload["folds"][0]["train_checksum"]


def test_backtest_missing_load_path_is_exit_2(tmp_path, capsys):
    rc = main(["backtest", "--load", str(tmp_path / "gone.csv"),
               "--arch", "lstm", "--origin-start", "2022-02-01T00:00:00Z",
               "--origin-end", "2022-03-01T00:00:00Z",
               "--out", str(tmp_path / "bt.json")])
    assert rc == 2
    assert "does not exist" in capsys.readouterr().err


def test_backtest_unknown_arch_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["backtest", "--load", "x.csv", "--arch", "gru",
              "--origin-start", "a", "--origin-end", "b", "--out", "o"])
    assert exc.value.code == 2


# --------------------------------------------------------------- ingest


class FakeResponse:
    def __init__(self, payload):
        self.payload = payload

    def raise_for_status(self):
        pass

    def json(self):
        return self.payload


class FakeSession:
    def __init__(self, payloads):
        self.payloads = list(payloads)
        self.calls = []

    def get(self, url, params=None, timeout=None):
        self.calls.append((url, dict(params or {})))
        return FakeResponse(self.payloads.pop(0))


def test_ingest_eia_requires_api_key(tmp_path, capsys):
    rc = main(["ingest", "--source", "eia", "--grid-id", "CISO",
               "--start", "2024-01-01T00:00:00Z",
               "--end", "2024-01-02T00:00:00Z",
               "--out", str(tmp_path / "d.csv")])
    assert rc == 2
    assert "api-key" in capsys.readouterr().err


def test_ingest_weather_requires_coordinates(tmp_path, capsys):
    rc = main(["ingest", "--source", "weather",
               "--start", "2024-01-01T00:00:00Z",
               "--end", "2024-01-02T00:00:00Z",
               "--out", str(tmp_path / "w.csv")])
    assert rc == 2
    assert "--lat" in capsys.readouterr().err


def test_ingest_weather_with_fake_session(tmp_path):
    hours = [f"2024-01-01T{h:02d}:00" for h in range(6)]
    payload = {"hourly": {
        "time": hours,
        "temperature_2m": [10.0, 11.0, 12.0, 13.0, 14.0, 15.0],
    }}
    session = FakeSession([payload])
    out = tmp_path / "w.csv"
    args = _build_parser().parse_args(
        ["ingest", "--source", "weather", "--grid-id", "g",
         "--lat", "34.05", "--lon", "-118.25",
         "--start", "2024-01-01T00:00:00Z", "--end", "2024-01-01T05:00:00Z",
         "--covariates", "temp_c", "--out", str(out)])
    assert cmd_ingest(args, session=session) == 0
    text = out.read_text()
    assert "temp_c" in text.splitlines()[0] or "temp_c" in text
    assert len(session.calls) == 1
    assert "archive-api" in session.calls[0][0]
