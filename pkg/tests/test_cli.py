"""End-to-end command-line tests: the synth/train/register/sweep/report
pipeline, exit codes, and the CONDREG_SEED override."""

import json
from pathlib import Path

import numpy as np
import pytest

from condreg.bench.cli import main
from condreg.grid import DisplacementField, load_tensor

SYNTH_FLAGS = [
    "--shape",
    "32,32",
    "--n-blobs",
    "4",
    "--smoothness",
    "6.0",
    "--max-disp",
    "3.5",
]


def run(argv):
    return main([str(a) for a in argv])


def test_full_pipeline(tmp_path, capsys):
    data = tmp_path / "data"
    assert run(["synth", "--out", data, "--n-pairs", "10", "--seed", "3", *SYNTH_FLAGS]) == 0
    assert "wrote 10 pairs" in capsys.readouterr().out
    manifest = json.loads((data / "manifest.json").read_text())
    assert len(manifest["pairs"]) == 10

    run_dir = tmp_path / "run"
    assert (
        run(
            [
                "train",
                "--data",
                data,
                "--out",
                run_dir,
                "--iterations",
                "6",
                "--checkpoint-every",
                "6",
                "--seed",
                "0",
            ]
        )
        == 0
    )
    assert "trained 6 iterations" in capsys.readouterr().out
    best = run_dir / "best.pt"
    assert best.exists()

    pair = data / "pairs" / manifest["pairs"][-1]["id"]
    field_out = tmp_path / "field"
    assert (
        run(
            [
                "register",
                "--fixed",
                pair / "fixed",
                "--moving",
                pair / "moving",
                "--lambda",
                "0.5",
                "--model",
                best,
                "--out",
                field_out,
            ]
        )
        == 0
    )
    fld = load_tensor(field_out)
    assert isinstance(fld, DisplacementField)
    assert fld.values.shape == (2, 32, 32)
    assert np.isfinite(fld.values).all()

    sweep_dir = tmp_path / "sweep"
    assert (
        run(
            [
                "sweep",
                "--model",
                best,
                "--data",
                data,
                "--lambdas",
                "0.5,4",
                "--max-cases",
                "2",
                "--out",
                sweep_dir,
            ]
        )
        == 0
    )
    assert "swept 2 cases x 2 weights" in capsys.readouterr().out
    assert (sweep_dir / "sweep_result.json").exists()
    csv_lines = (sweep_dir / "sweep_rows.csv").read_text().splitlines()
    assert len(csv_lines) == 1 + 4

    rep_dir = tmp_path / "rep"
    assert (
        run(
            [
                "report",
                "--cond",
                sweep_dir / "sweep_result.json",
                "--base",
                sweep_dir / "sweep_result.json",
                "--out",
                rep_dir,
                "--t-train",
                "5",
                "--t-train-base",
                "10",
            ]
        )
        == 0
    )
    summary = json.loads((rep_dir / "summary.json").read_text())
    assert summary["comparison"]["pct_dsc"] == pytest.approx(0.0)
    assert summary["t_train_ratio"] == pytest.approx(2.0)
    assert len(list(rep_dir.glob("*.png"))) == 3


def test_register_rejects_out_of_range_weight(tmp_path, dataset_dir, trained_run, capsys):
    out, summary = trained_run
    pair = Path(dataset_dir) / "pairs" / "pair_0000"
    code = run(
        [
            "register",
            "--fixed",
            pair / "fixed",
            "--moving",
            pair / "moving",
            "--lambda",
            "10.5",
            "--model",
            summary["best_checkpoint"],
            "--out",
            tmp_path / "f",
        ]
    )
    assert code == 2
    assert "outside model range" in capsys.readouterr().err


def test_register_rejects_label_input(tmp_path, dataset_dir, trained_run, capsys):
    _, summary = trained_run
    pair = Path(dataset_dir) / "pairs" / "pair_0000"
    code = run(
        [
            "register",
            "--fixed",
            pair / "fixed_labels",
            "--moving",
            pair / "moving",
            "--lambda",
            "1",
            "--model",
            summary["best_checkpoint"],
            "--out",
            tmp_path / "f",
        ]
    )
    assert code == 1
    assert "image tensors" in capsys.readouterr().err


def test_sweep_rejects_bad_lambda_list(tmp_path, dataset_dir, trained_run, capsys):
    _, summary = trained_run
    code = run(
        [
            "sweep",
            "--model",
            summary["best_checkpoint"],
            "--data",
            dataset_dir,
            "--lambdas",
            "0.5,oops",
            "--out",
            tmp_path / "s",
        ]
    )
    assert code == 2
    assert "comma-separated numbers" in capsys.readouterr().err


def test_missing_model_is_a_data_error(tmp_path, dataset_dir, capsys):
    code = run(
        [
            "sweep",
            "--model",
            tmp_path / "nope.pt",
            "--data",
            dataset_dir,
            "--out",
            tmp_path / "s",
        ]
    )
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_report_missing_input(tmp_path, capsys):
    code = run(["report", "--cond", tmp_path / "absent.json", "--out", tmp_path / "r"])
    assert code == 1
    assert "not found" in capsys.readouterr().err


def test_seed_env_override_makes_runs_identical(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("CONDREG_SEED", "77")
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(["synth", "--out", a, "--n-pairs", "3", "--seed", "1", *SYNTH_FLAGS]) == 0
    assert run(["synth", "--out", b, "--n-pairs", "3", "--seed", "2", *SYNTH_FLAGS]) == 0
    ma = json.loads((a / "manifest.json").read_text())
    mb = json.loads((b / "manifest.json").read_text())
    assert ma["pairs"] == mb["pairs"]
    rel = "pairs/pair_0000/fixed/data.bin"
    assert (a / rel).read_bytes() == (b / rel).read_bytes()


def test_seed_env_rejects_garbage(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("CONDREG_SEED", "many")
    code = run(["synth", "--out", tmp_path / "x", "--n-pairs", "2", *SYNTH_FLAGS])
    assert code == 2
    assert "CONDREG_SEED" in capsys.readouterr().err


def test_usage_error_exits_two():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
