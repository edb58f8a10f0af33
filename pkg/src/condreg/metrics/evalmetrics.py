"""Non-differentiable evaluation metrics: Dice overlap and baseline comparison."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from ..errors import ConfigError, DataError, GridMismatchError
from ..grid.containers import LabelMap


@dataclass
class DiceResult:
    per_label: dict
    mean: float


def dice(a, b, labels: Optional[Sequence[int]] = None) -> DiceResult:
    """Per-label Dice 2|A∩B|/(|A|+|B|) plus the mean over evaluable labels.

    Labels absent from both maps are dropped from the result. Symmetric in
    its arguments; values lie in [0, 1].
    """
    av = a.values if isinstance(a, LabelMap) else np.asarray(a)
    bv = b.values if isinstance(b, LabelMap) else np.asarray(b)
    if av.shape != bv.shape:
        raise GridMismatchError(f"label maps differ in shape: {av.shape} vs {bv.shape}")
    if labels is None:
        pool = set()
        for m in (a, b):
            if isinstance(m, LabelMap):
                pool.update(m.labels)
        labels = sorted(pool)
    labels = [int(k) for k in labels]
    if not labels:
        raise ConfigError("empty label list")

    per_label = {}
    for k in labels:
        in_a = av == k
        in_b = bv == k
        size = int(in_a.sum()) + int(in_b.sum())
        if size == 0:
            continue
        per_label[k] = 2.0 * int((in_a & in_b).sum()) / size
    mean = float(np.mean(list(per_label.values()))) if per_label else float("nan")
    return DiceResult(per_label=per_label, mean=mean)


@dataclass
class CaseResult:
    """One registration outcome; serialized as a flat JSON record."""

    case_id: str
    lam: float
    dsc: float
    std_jac: float
    runtime_s: float

    def to_record(self) -> dict:
        rec = asdict(self)
        rec["lambda"] = rec.pop("lam")
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "CaseResult":
        rec = dict(rec)
        rec["lam"] = rec.pop("lambda")
        return cls(**rec)


@dataclass
class ComparisonReport:
    """Summary columns for one method; percentage columns are vs the baseline."""

    dsc: float
    pct_dsc: float
    std_jac: float
    pct_std: float
    t_train_s: Optional[float] = None
    t_test_s: Optional[float] = None
    n_pairs: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def _pct(value: float, base: float) -> float:
    diff = value - base
    if diff == 0.0:
        return 0.0
    return 100.0 * diff / base


def compare_to_baseline(
    cond: Sequence[CaseResult], base: Sequence[CaseResult]
) -> ComparisonReport:
    """Mean per-case percentage difference of DSC and std(|J|) versus a baseline.

    Results are paired by (case_id, lambda); an unpaired entry on either side
    is a data error.
    """
    base_by_key = {(r.case_id, r.lam): r for r in base}
    if len(base_by_key) != len(base):
        raise DataError("baseline contains duplicate (case, lambda) entries")
    pct_dsc = []
    pct_std = []
    seen = set()
    for r in cond:
        key = (r.case_id, r.lam)
        if key not in base_by_key:
            raise DataError(f"no baseline entry for case={r.case_id} lambda={r.lam}")
        seen.add(key)
        b = base_by_key[key]
        pct_dsc.append(_pct(r.dsc, b.dsc))
        pct_std.append(_pct(r.std_jac, b.std_jac))
    missing = set(base_by_key) - seen
    if missing:
        raise DataError(f"{len(missing)} baseline entries unmatched, e.g. {sorted(missing)[0]}")
    if not cond:
        raise DataError("nothing to compare")
    return ComparisonReport(
        dsc=float(np.mean([r.dsc for r in cond])),
        pct_dsc=float(np.mean(pct_dsc)),
        std_jac=float(np.mean([r.std_jac for r in cond])),
        pct_std=float(np.mean(pct_std)),
        n_pairs=len(cond),
    )
