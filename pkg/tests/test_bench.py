"""Sweep and report tests. The structural guarantee that matters most here is
one forward pass per (case, weight) from a single trained model."""

import csv
import json
import warnings

import numpy as np
import pytest

from condreg.bench import (
    CSV_COLUMNS,
    DEFAULT_LAMBDA_GRID,
    SweepResult,
    load_sweep_result,
    register_case,
    report,
    save_sweep_result,
    sweep,
    sweep_dataset,
    time_forward,
    write_csv,
)
from condreg.datagen import generate_pair
from condreg.errors import ConfigError, DataError, RangeError
from condreg.grid import DisplacementField, load_tensor, std_jacobian
from condreg.metrics import DiceResult

from conftest import tiny_spec


def two_records():
    spec = tiny_spec()
    return [generate_pair(50, spec), generate_pair(51, spec)], ["case_a", "case_b"]


def test_default_grid_and_columns():
    assert DEFAULT_LAMBDA_GRID == (0.1, 0.5, 1.0, 2.0, 4.0, 8.0, 10.0)
    assert CSV_COLUMNS == ("case_id", "lambda", "dsc_mean", "std_jac", "inference_s")


def test_register_case_outputs(trained_model, sample_record):
    fld, d, elapsed = register_case(trained_model, sample_record, 1.0)
    assert isinstance(fld, DisplacementField)
    assert fld.values.shape == (2, *sample_record.fixed.shape)
    assert isinstance(d, DiceResult)
    assert 0.0 <= d.mean <= 1.0
    assert elapsed > 0.0
    assert std_jacobian(fld) >= 0.0


def test_register_case_rejects_out_of_range_weight(trained_model, sample_record):
    for lam in (-0.1, 10.5):
        with pytest.raises(RangeError):
            register_case(trained_model, sample_record, lam)


def test_sweep_rows_cover_grid(trained_model):
    records, ids = two_records()
    lambdas = (0.1, 1.0, 10.0)
    result = sweep(trained_model, records, ids, lambdas=lambdas)
    assert result.lambdas == lambdas
    assert len(result.rows) == len(records) * len(lambdas)
    seen = {(r["case_id"], r["lambda"]) for r in result.rows}
    assert seen == {(c, l) for c in ids for l in lambdas}
    for r in result.rows:
        assert set(r) == {
            "case_id",
            "lambda",
            "dsc_mean",
            "dsc_per_label",
            "std_jac",
            "inference_s",
        }
        assert 0.0 <= r["dsc_mean"] <= 1.0
        assert r["std_jac"] >= 0.0


def test_sweep_runs_one_forward_per_case_weight(trained_model):
    records, ids = two_records()
    calls = []
    original = trained_model.forward

    def counting(*args, **kwargs):
        calls.append(1)
        return original(*args, **kwargs)

    trained_model.forward = counting
    try:
        sweep(trained_model, records, ids, lambdas=(0.5, 2.0, 8.0))
    finally:
        del trained_model.forward
    assert len(calls) == len(records) * 3


def test_sweep_saves_fields_when_asked(trained_model, sample_record, tmp_path):
    out = tmp_path / "fields"
    result = sweep(
        trained_model, [sample_record], ["probe"], lambdas=(0.5,), fields_dir=out
    )
    loaded = load_tensor(out / "probe_lam0.5")
    fld, _, _ = register_case(trained_model, sample_record, 0.5)
    np.testing.assert_array_equal(loaded.values, fld.values)
    assert result.rows[0]["std_jac"] == pytest.approx(std_jacobian(fld))


def test_sweep_validation_errors(trained_model):
    records, ids = two_records()
    with pytest.raises(ConfigError):
        sweep(trained_model, records, ids, lambdas=())
    with pytest.raises(ConfigError):
        sweep(trained_model, records, ids[:1])


def test_sweep_warns_for_fixed_weight_model():
    from condreg.condnet import build_variant, default_config

    model = build_variant(
        default_config(
            "fixed",
            levels=2,
            blocks_per_level=2,
            conv_filters=8,
            latent_dim=8,
            mapping_layers=2,
            dims=2,
            fixed_lambda=1.0,
        )
    )
    records, ids = two_records()
    with pytest.warns(UserWarning, match="fixed weight"):
        sweep(model, records, ids, lambdas=(0.1, 1.0))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        sweep(model, records, ids, lambdas=(1.0,))


def test_sweep_dataset_split_and_cap(trained_model, dataset_dir):
    result = sweep_dataset(
        trained_model, dataset_dir, split="test", lambdas=(0.5,), max_cases=1
    )
    assert len(result.rows) == 1
    assert result.rows[0]["case_id"].startswith("pair_")
    with pytest.raises(DataError):
        sweep_dataset(trained_model, dataset_dir, split="nonsense")


def test_mean_over_cases_and_case_results():
    rows = [
        {"case_id": "a", "lambda": 0.5, "dsc_mean": 0.8, "std_jac": 0.1, "inference_s": 0.01},
        {"case_id": "b", "lambda": 0.5, "dsc_mean": 0.6, "std_jac": 0.3, "inference_s": 0.02},
        {"case_id": "a", "lambda": 2.0, "dsc_mean": 0.9, "std_jac": 0.05, "inference_s": 0.01},
        {"case_id": "b", "lambda": 2.0, "dsc_mean": 0.7, "std_jac": 0.15, "inference_s": 0.02},
    ]
    result = SweepResult(model_id="m", lambdas=(0.5, 2.0), rows=rows)
    means = result.mean_over_cases("dsc_mean")
    assert means == {0.5: pytest.approx(0.7), 2.0: pytest.approx(0.8)}
    cases = result.to_case_results()
    assert len(cases) == 4
    assert cases[0].case_id == "a" and cases[0].lam == 0.5
    assert cases[1].dsc == 0.6 and cases[1].std_jac == 0.3


def test_sweep_result_round_trip(trained_model, sample_record, tmp_path):
    result = sweep(trained_model, [sample_record], ["rt"], lambdas=(0.5, 4.0))
    path = tmp_path / "sweep.json"
    save_sweep_result(result, path)
    loaded = load_sweep_result(path)
    assert loaded.model_id == result.model_id
    assert loaded.lambdas == result.lambdas
    assert loaded.rows == result.rows
    for r in loaded.rows:
        assert all(isinstance(k, int) for k in r["dsc_per_label"])


def test_load_sweep_result_errors(tmp_path):
    with pytest.raises(DataError):
        load_sweep_result(tmp_path / "absent.json")
    bad = tmp_path / "bad.json"
    bad.write_text('{"model_id": "m"}')
    with pytest.raises(DataError):
        load_sweep_result(bad)


def test_write_csv_layout(trained_model, sample_record, tmp_path):
    result = sweep(trained_model, [sample_record], ["c0"], lambdas=(0.5, 4.0))
    path = tmp_path / "rows.csv"
    write_csv(result, path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == list(CSV_COLUMNS)
    assert len(rows) == 1 + len(result.rows)
    for row in rows[1:]:
        assert row[0] == "c0"
        float(row[1]), float(row[2]), float(row[3]), float(row[4])


def test_time_forward_is_positive(trained_model, sample_record):
    assert time_forward(trained_model, sample_record, 1.0, repeats=2) > 0.0


def test_report_emits_outputs(trained_model, tmp_path):
    records, ids = two_records()
    result = sweep(trained_model, records, ids, lambdas=(0.5, 4.0))
    out = report(result, tmp_path / "rep", t_train_cond=10.0)
    for key in ("csv", "summary", "plots", "summary_data"):
        assert key in out
    assert len(out["plots"]) == 3
    from pathlib import Path

    for p in [out["csv"], out["summary"], *out["plots"]]:
        assert Path(p).exists()
    data = json.loads(Path(out["summary"]).read_text())
    assert data["n_rows"] == 4
    assert data["t_train_s"] == 10.0
    assert set(data["dsc_mean_by_lambda"]) == {"0.5", "4"}


def test_report_self_comparison_is_zero(trained_model, tmp_path):
    records, ids = two_records()
    result = sweep(trained_model, records, ids, lambdas=(0.5,))
    out = report(
        result, tmp_path / "cmp", sweep_base=result, t_train_cond=5.0, t_train_base=10.0
    )
    cmp = out["summary_data"]["comparison"]
    own_dice = float(np.mean([r["dsc_mean"] for r in result.rows]))
    assert cmp["dsc"] == pytest.approx(own_dice)
    assert cmp["pct_dsc"] == pytest.approx(0.0)
    assert cmp["pct_std"] == pytest.approx(0.0)
    assert cmp["n_pairs"] == len(result.rows)
    assert out["summary_data"]["t_train_ratio"] == pytest.approx(2.0)


def test_report_rejects_mismatched_grids(trained_model, sample_record, tmp_path):
    a = sweep(trained_model, [sample_record], ["x"], lambdas=(0.5,))
    b = sweep(trained_model, [sample_record], ["x"], lambdas=(1.0,))
    with pytest.raises(DataError):
        report(a, tmp_path / "bad", sweep_base=b)
