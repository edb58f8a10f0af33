"""Regularization-weight sweeps and tabular reports.

A sweep runs one eval-mode forward pass per (case, weight), warps the labels,
and records Dice, the Jacobian spread, and the inference time. Reports turn
one or two sweeps into a CSV, a summary with per-weight aggregates, and plot
files. Nothing here touches the weights.
"""

from __future__ import annotations

import csv
import json
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from statistics import median
from typing import Optional, Sequence

import numpy as np
import torch

from ..condnet.network import ConditionalRegNet
from ..datagen.synth import load_manifest, load_pair, pairs_for_split
from ..errors import ConfigError, DataError, RangeError
from ..grid.containers import DisplacementField
from ..grid.io import save_tensor
from ..grid.ops import std_jacobian, warp
from ..metrics.evalmetrics import CaseResult, compare_to_baseline, dice

DEFAULT_LAMBDA_GRID = (0.1, 0.5, 1.0, 2.0, 4.0, 8.0, 10.0)

CSV_COLUMNS = ("case_id", "lambda", "dsc_mean", "std_jac", "inference_s")


@dataclass
class SweepResult:
    model_id: str
    lambdas: tuple
    rows: list = field(default_factory=list)

    def to_case_results(self):
        return [
            CaseResult(
                case_id=r["case_id"],
                lam=r["lambda"],
                dsc=r["dsc_mean"],
                std_jac=r["std_jac"],
                runtime_s=r["inference_s"],
            )
            for r in self.rows
        ]

    def mean_over_cases(self, key: str) -> dict:
        """Per-weight mean of one row field."""
        out = {}
        for lam in self.lambdas:
            vals = [r[key] for r in self.rows if r["lambda"] == lam]
            out[lam] = float(np.mean(vals))
        return out


def _normalize(lam: float, lambda_range) -> float:
    lo, hi = lambda_range
    if not (lo <= lam <= hi):
        raise RangeError(f"lambda {lam} outside model range [{lo}, {hi}]")
    return (lam - lo) / (hi - lo)


def register_case(model: ConditionalRegNet, record, lam: float):
    """Eval-mode registration of one pair at one raw weight. Returns the
    field container, per-case metrics, and the forward wall time."""
    lam_norm = _normalize(lam, model.config.lambda_range)
    model.eval()
    with torch.no_grad():
        t0 = time.monotonic()
        flow, _ = model(record.fixed, record.moving, lambda_norm=lam_norm)
        elapsed = time.monotonic() - t0
    fld = DisplacementField(values=flow.numpy().astype(np.float32))
    warped_labels = warp(record.moving_labels, fld, mode="nearest")
    d = dice(record.fixed_labels, warped_labels)
    return fld, d, elapsed


def sweep(
    model: ConditionalRegNet,
    records: Sequence,
    case_ids: Sequence[str],
    lambdas=DEFAULT_LAMBDA_GRID,
    model_id: str = "model",
    fields_dir=None,
) -> SweepResult:
    """Evaluate each case at each weight: exactly one forward per (case, λ)."""
    lambdas = tuple(float(v) for v in lambdas)
    if not lambdas:
        raise ConfigError("sweep needs at least one lambda")
    if len(records) != len(case_ids):
        raise ConfigError("records and case_ids must align")
    if model.config.conditioning == "fixed" and len(lambdas) > 1:
        warnings.warn(
            "this model was trained for one fixed weight; the swept lambda "
            "values do not change its output",
            stacklevel=2,
        )
    if fields_dir is not None:
        fields_dir = Path(fields_dir)
        fields_dir.mkdir(parents=True, exist_ok=True)

    result = SweepResult(model_id=model_id, lambdas=lambdas)
    for case_id, record in zip(case_ids, records):
        for lam in lambdas:
            fld, d, elapsed = register_case(model, record, lam)
            if fields_dir is not None:
                save_tensor(fields_dir / f"{case_id}_lam{lam:g}", fld)
            result.rows.append(
                {
                    "case_id": case_id,
                    "lambda": lam,
                    "dsc_mean": d.mean,
                    "dsc_per_label": d.per_label,
                    "std_jac": std_jacobian(fld),
                    "inference_s": elapsed,
                }
            )
    return result


def sweep_dataset(
    model: ConditionalRegNet,
    dataset_dir,
    split: str = "test",
    lambdas=DEFAULT_LAMBDA_GRID,
    model_id: str = "model",
    fields_dir=None,
    max_cases: Optional[int] = None,
) -> SweepResult:
    manifest = load_manifest(dataset_dir)
    entries = pairs_for_split(manifest, split)
    if not entries:
        raise DataError(f"dataset has no pairs in split {split!r}")
    if max_cases is not None:
        entries = entries[:max_cases]
    records = [load_pair(dataset_dir, e) for e in entries]
    ids = [e["id"] for e in entries]
    return sweep(model, records, ids, lambdas, model_id=model_id, fields_dir=fields_dir)


def time_forward(model: ConditionalRegNet, record, lam: float, repeats: int = 5) -> float:
    """Median forward time after one warm-up pass."""
    lam_norm = _normalize(lam, model.config.lambda_range)
    model.eval()
    with torch.no_grad():
        model(record.fixed, record.moving, lambda_norm=lam_norm)
        times = []
        for _ in range(repeats):
            t0 = time.monotonic()
            model(record.fixed, record.moving, lambda_norm=lam_norm)
            times.append(time.monotonic() - t0)
    return float(median(times))


def save_sweep_result(result: SweepResult, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "model_id": result.model_id,
        "lambdas": list(result.lambdas),
        "rows": result.rows,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)


def load_sweep_result(path) -> SweepResult:
    path = Path(path)
    if not path.exists():
        raise DataError(f"sweep result not found: {path}")
    try:
        with open(path) as fh:
            payload = json.load(fh)
        rows = payload["rows"]
        for r in rows:
            # JSON stringifies the per-label keys
            r["dsc_per_label"] = {int(k): v for k, v in r["dsc_per_label"].items()}
        return SweepResult(
            model_id=payload["model_id"],
            lambdas=tuple(payload["lambdas"]),
            rows=rows,
        )
    except (KeyError, ValueError) as exc:
        raise DataError(f"malformed sweep result {path}: {exc}") from exc


def write_csv(result: SweepResult, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in result.rows:
            writer.writerow([r[c] for c in CSV_COLUMNS])


def _plot_curves(result: SweepResult, out_dir: Path) -> list:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    paths = []
    for key, label, fname in (
        ("dsc_mean", "mean Dice", "dsc_vs_lambda.png"),
        ("std_jac", "std of Jacobian determinant", "std_vs_lambda.png"),
    ):
        means = result.mean_over_cases(key)
        fig, ax = plt.subplots(figsize=(5, 3.5))
        xs = list(result.lambdas)
        ax.plot(xs, [means[x] for x in xs], marker="o")
        ax.set_xlabel("regularization weight")
        ax.set_ylabel(label)
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        p = out_dir / fname
        fig.savefig(p, dpi=110)
        plt.close(fig)
        paths.append(str(p))

    # per-weight Dice distribution over cases
    fig, ax = plt.subplots(figsize=(5, 3.5))
    data = [
        [r["dsc_mean"] for r in result.rows if r["lambda"] == lam]
        for lam in result.lambdas
    ]
    ax.boxplot(data, tick_labels=[f"{v:g}" for v in result.lambdas])
    ax.set_xlabel("regularization weight")
    ax.set_ylabel("Dice per case")
    fig.tight_layout()
    p = out_dir / "dsc_box.png"
    fig.savefig(p, dpi=110)
    plt.close(fig)
    paths.append(str(p))
    return paths


def report(
    sweep_cond: SweepResult,
    out_dir,
    sweep_base: Optional[SweepResult] = None,
    t_train_cond: Optional[float] = None,
    t_train_base: Optional[float] = None,
) -> dict:
    """Write CSV, summary JSON, and plots; returns the emitted paths plus the
    summary dict. Comparisons require both sweeps on one weight grid."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    csv_path = out_dir / "sweep_rows.csv"
    write_csv(sweep_cond, csv_path)

    summary = {
        "model_id": sweep_cond.model_id,
        "lambdas": list(sweep_cond.lambdas),
        "n_rows": len(sweep_cond.rows),
        "dsc_mean_by_lambda": {
            f"{k:g}": v for k, v in sweep_cond.mean_over_cases("dsc_mean").items()
        },
        "std_jac_by_lambda": {
            f"{k:g}": v for k, v in sweep_cond.mean_over_cases("std_jac").items()
        },
        "t_test_s": float(median(r["inference_s"] for r in sweep_cond.rows)),
    }
    if t_train_cond is not None:
        summary["t_train_s"] = float(t_train_cond)

    if sweep_base is not None:
        if tuple(sweep_base.lambdas) != tuple(sweep_cond.lambdas):
            raise DataError(
                f"weight grids differ: {sweep_cond.lambdas} vs {sweep_base.lambdas}"
            )
        cmp = compare_to_baseline(
            sweep_cond.to_case_results(), sweep_base.to_case_results()
        )
        summary["comparison"] = {
            "dsc": cmp.dsc,
            "pct_dsc": cmp.pct_dsc,
            "std_jac": cmp.std_jac,
            "pct_std": cmp.pct_std,
            "n_pairs": cmp.n_pairs,
        }
        if t_train_cond is not None and t_train_base is not None:
            summary["t_train_baseline_s"] = float(t_train_base)
            summary["t_train_ratio"] = float(t_train_base) / float(t_train_cond)

    summary_path = out_dir / "summary.json"
    with open(summary_path, "w") as fh:
        json.dump(summary, fh, indent=1)

    plots = _plot_curves(sweep_cond, out_dir)
    return {
        "csv": str(csv_path),
        "summary": str(summary_path),
        "plots": plots,
        "summary_data": summary,
    }
