import csv
import io
import json
import subprocess
import sys

import pytest

from glvq_act.activation import parse_activation
from glvq_act.bench import RatioReport, ReportRow
from glvq_act.cli import EXIT_CONFIG, EXIT_DATA, EXIT_OK, run_cli
from glvq_act.core import model_from_json

FAST = ["--lr", "0.05", "--max-epochs", "200"]


def bench(tmp_path, name, *extra):
    out = tmp_path / name
    code = run_cli(["bench", "--dataset", "blobs2", "--activations", "relu,swish:grid", "--grid", "1,2",
                    "--runs", "5", "--seed", "7", *FAST, "--out", str(out), *extra])
    assert code == EXIT_OK
    return out.read_bytes()


def test_bench_byte_identical(tmp_path):
    assert bench(tmp_path, "a.json") == bench(tmp_path, "b.json")


def test_bench_parallel_identical(tmp_path):
    assert bench(tmp_path, "a.json") == bench(tmp_path, "b.json", "--parallel", "2")


@pytest.mark.parametrize("fmt", ["csv", "md"])
def test_bench_formats(tmp_path, fmt):
    text = bench(tmp_path, f"r.{fmt}", "--format", fmt).decode()
    assert "swish" in text and "relu" in text


def test_report_relu_only(tmp_path):
    rep = RatioReport([ReportRow("relu", None, 0.8, 1.0, 0.0, 120.0, 1.0, 0.0, 1.0)], {})
    src = tmp_path / "r.json"
    src.write_text(rep.to_json())
    out = tmp_path / "r.csv"
    assert run_cli(["report", "--in", str(src), "--format", "csv", "--out", str(out)]) == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert len(rows) == 1
    assert float(rows[0]["accuracy_ratio"]) == 1.0 and float(rows[0]["convergence_ratio"]) == 1.0


def test_report_round_trip_through_json(tmp_path):
    bench(tmp_path, "r.json")
    out = tmp_path / "again.json"
    assert run_cli(["report", "--in", str(tmp_path / "r.json"), "--format", "json", "--out", str(out)]) == EXIT_OK
    assert out.read_bytes() == (tmp_path / "r.json").read_bytes()


def test_train_pima(tmp_path, capsys):
    out = tmp_path / "m.json"
    code = run_cli(["train", "--dataset", "pima", "--activation", "swish:1", "--max-epochs", "50", "--out", str(out)])
    assert code == EXIT_OK
    model = model_from_json(out.read_text())
    assert model.input_dim == 8 and len(model.prototypes) == 2
    assert model.activation == parse_activation("swish:1")
    assert "test accuracy" in capsys.readouterr().out


def test_train_with_config_file(tmp_path):
    cfg = tmp_path / "t.cfg"
    cfg.write_text("learning_rate = 0.05\nmax_epochs = 5\n")
    out = tmp_path / "m.json"
    assert run_cli(["train", "--dataset", "blobs2", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    assert json.loads(out.read_text())["dim"] == 2


@pytest.mark.parametrize(
    "argv",
    [
        ["train", "--dataset", "blobs2", "--activation", "swish:-1"],
        ["train", "--dataset", "blobs2", "--activation", "warp:2"],
        ["train", "--dataset", "blobs2", "--lr", "-1"],
        ["bench", "--dataset", "blobs2", "--activations", "swish"],
        ["bench", "--dataset", "blobs2", "--runs", "0"],
        ["bench", "--dataset", "blobs2", "--grid", "a,b"],
        ["frobnicate"],
        [],
    ],
)
def test_config_errors(argv, capsys):
    assert run_cli(argv) == EXIT_CONFIG
    assert "error" in capsys.readouterr().err


@pytest.mark.parametrize(
    "argv",
    [
        ["train", "--dataset", "nope"],
        ["train", "--dataset", "pima", "--manifest", "/nonexistent/m.json"],
        ["report", "--in", "/nonexistent/r.json"],
    ],
)
def test_data_errors(argv, capsys):
    assert run_cli(argv) == EXIT_DATA
    assert "data error" in capsys.readouterr().err


def test_bad_csv_is_data_error(tmp_path):
    (tmp_path / "d.csv").write_text("1,2,A\n3,x,B\n")
    (tmp_path / "m.json").write_text(json.dumps({"datasets": [{"name": "d", "path": "d.csv"}]}))
    assert run_cli(["train", "--manifest", str(tmp_path / "m.json"), "--dataset", "d"]) == EXIT_DATA


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "glvq_act.cli", "report", "--in", "/nonexistent"],
                         capture_output=True, text=True)
    assert res.returncode == EXIT_DATA
