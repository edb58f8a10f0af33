"""Loss and evaluation metric tests.

local_ncc and diffusion_energy are checked against direct loop
implementations, pyramid_loss against a hand-assembled combination of the
two, and dice against plain set counting.
"""

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as npst

from condreg.errors import ConfigError, GridMismatchError
from condreg.grid import DisplacementField, Image, LabelMap
from condreg.metrics import (
    LossConfig,
    NCC_EPS,
    compare_to_baseline,
    dice,
    diffusion_energy,
    local_ncc,
    pyramid_loss,
    window_size,
)


# --- oracles -----------------------------------------------------------------


def ncc_oracle(f: np.ndarray, m: np.ndarray, window: int, eps: float = NCC_EPS) -> float:
    """Squared Pearson correlation per fully supported window, averaged."""
    h, w = f.shape
    vals = []
    for r in range(h - window + 1):
        for c in range(w - window + 1):
            pf = f[r : r + window, c : c + window].ravel()
            pm = m[r : r + window, c : c + window].ravel()
            n = pf.size
            cross = pf @ pm - pf.sum() * pm.sum() / n
            var_f = max(pf @ pf - pf.sum() ** 2 / n, 0.0)
            var_m = max(pm @ pm - pm.sum() ** 2 / n, 0.0)
            vals.append(cross * cross / (var_f * var_m + eps))
    return float(np.mean(vals))


def diffusion_oracle(u: np.ndarray) -> float:
    """Forward differences per axis, squared, averaged; then averaged over axes."""
    ndim = u.shape[0]
    axis_means = []
    for d in range(ndim):
        diff = np.diff(u, axis=1 + d)
        axis_means.append(float(np.mean(diff * diff)))
    return float(np.mean(axis_means))


def dice_oracle(a: np.ndarray, b: np.ndarray, label: int) -> float:
    sa = {tuple(i) for i in np.argwhere(a == label)}
    sb = {tuple(i) for i in np.argwhere(b == label)}
    return 2.0 * len(sa & sb) / (len(sa) + len(sb))


# --- window sizes --------------------------------------------------------------


def test_window_size_grows_two_per_level():
    assert [window_size(i) for i in (1, 2, 3)] == [3, 5, 7]


# --- local ncc -------------------------------------------------------------------


def test_ncc_matches_loop_oracle():
    rng = np.random.default_rng(10)
    for window in (3, 5):
        f = rng.normal(size=(10, 9))
        m = rng.normal(size=(10, 9))
        got = local_ncc(torch.from_numpy(f), torch.from_numpy(m), window).item()
        assert abs(got - ncc_oracle(f, m, window)) < 1e-6


def test_ncc_is_one_for_affine_intensity_maps():
    rng = np.random.default_rng(11)
    f = rng.normal(size=(12, 12))
    for a, b in ((2.0, 1.0), (-3.0, 0.5)):
        got = local_ncc(torch.from_numpy(f), torch.from_numpy(a * f + b), 5).item()
        assert got == pytest.approx(1.0, abs=1e-3)


def test_ncc_accepts_containers():
    rng = np.random.default_rng(12)
    f = Image(rng.normal(size=(8, 8)))
    got = local_ncc(f, f, 3)
    assert got.dtype == torch.float64
    assert got.item() == pytest.approx(1.0, abs=1e-3)


def test_ncc_input_validation():
    f = torch.zeros(8, 8, dtype=torch.float64)
    with pytest.raises(GridMismatchError):
        local_ncc(f, torch.zeros(6, 6, dtype=torch.float64), 3)
    with pytest.raises(ConfigError):
        local_ncc(f, f, 4)
    with pytest.raises(ConfigError):
        local_ncc(f, f, 9)


@given(
    npst.arrays(
        np.float64,
        (7, 7),
        elements=st.floats(-50.0, 50.0, allow_nan=False),
    ),
    npst.arrays(
        np.float64,
        (7, 7),
        elements=st.floats(-50.0, 50.0, allow_nan=False),
    ),
)
@settings(max_examples=40, deadline=None)
def test_ncc_bounded_unit_interval(f, m):
    got = local_ncc(torch.from_numpy(f), torch.from_numpy(m), 3).item()
    assert 0.0 <= got <= 1.0 + 1e-12


# --- diffusion energy ------------------------------------------------------------


def test_diffusion_matches_loop_oracle():
    rng = np.random.default_rng(13)
    u2 = rng.normal(size=(2, 7, 9))
    u3 = rng.normal(size=(3, 5, 6, 4))
    for u in (u2, u3):
        got = diffusion_energy(torch.from_numpy(u)).item()
        assert abs(got - diffusion_oracle(u)) < 1e-9


def test_diffusion_zero_only_for_constant_fields():
    const = np.full((2, 6, 6), 3.0)
    assert diffusion_energy(torch.from_numpy(const)).item() == 0.0
    bump = const.copy()
    bump[0, 2, 2] += 1.0
    assert diffusion_energy(torch.from_numpy(bump)).item() > 0.0


def test_diffusion_known_value_for_unit_ramp():
    # u[0] = row index: unit forward difference along axis 0 only, so the
    # squared-difference mean is 1/2 for that component pair and the
    # axis average halves it again
    u = np.zeros((2, 5, 5))
    u[0] = np.arange(5.0)[:, None]
    got = diffusion_energy(torch.from_numpy(u)).item()
    assert got == pytest.approx(0.25, abs=1e-12)


def test_diffusion_accepts_field_container():
    fld = DisplacementField(np.zeros((2, 5, 5), dtype=np.float32))
    assert diffusion_energy(fld).item() == 0.0


def test_diffusion_rejects_malformed_fields():
    with pytest.raises(GridMismatchError):
        diffusion_energy(torch.zeros(3, 5, 5))


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=30, deadline=None)
def test_diffusion_nonnegative(seed):
    u = np.random.default_rng(seed).normal(size=(2, 6, 6))
    assert diffusion_energy(torch.from_numpy(u)).item() >= 0.0


# --- pyramid loss ----------------------------------------------------------------


def test_pyramid_loss_composes_terms():
    rng = np.random.default_rng(14)
    f_pyr = [torch.from_numpy(rng.normal(size=s)) for s in ((6, 6), (12, 12))]
    w_pyr = [torch.from_numpy(rng.normal(size=s)) for s in ((6, 6), (12, 12))]
    field = torch.from_numpy(rng.normal(size=(2, 12, 12)))
    lam = 1.7
    got = pyramid_loss(f_pyr, w_pyr, field, LossConfig(lam, 2)).item()
    want = (
        -local_ncc(f_pyr[0], w_pyr[0], 3).item() / 2.0
        - local_ncc(f_pyr[1], w_pyr[1], 5).item()
        + lam * diffusion_energy(field).item()
    )
    assert got == pytest.approx(want, rel=1e-12)


def test_pyramid_loss_level_one_has_no_downweighting():
    rng = np.random.default_rng(15)
    f = torch.from_numpy(rng.normal(size=(8, 8)))
    m = torch.from_numpy(rng.normal(size=(8, 8)))
    field = torch.from_numpy(rng.normal(size=(2, 8, 8)))
    got = pyramid_loss([f], [m], field, LossConfig(0.0, 1)).item()
    assert got == pytest.approx(-local_ncc(f, m, 3).item(), rel=1e-12)


def test_pyramid_loss_length_must_match_level():
    f = torch.zeros(8, 8, dtype=torch.float64)
    field = torch.zeros(2, 8, 8, dtype=torch.float64)
    with pytest.raises(ConfigError):
        pyramid_loss([f], [f], field, LossConfig(1.0, 2))


def test_loss_config_validation():
    with pytest.raises(ConfigError):
        LossConfig(-0.5, 1)
    with pytest.raises(ConfigError):
        LossConfig(0.5, 0)


# --- dice ------------------------------------------------------------------------


def test_dice_matches_set_count_oracle():
    rng = np.random.default_rng(16)
    a = rng.integers(0, 4, size=(15, 15)).astype(np.int32)
    b = rng.integers(0, 4, size=(15, 15)).astype(np.int32)
    got = dice(a, b, labels=[1, 2, 3])
    for k in (1, 2, 3):
        assert got.per_label[k] == dice_oracle(a, b, k)
    assert got.mean == pytest.approx(np.mean(list(got.per_label.values())))


def test_dice_identical_maps_score_one():
    lm = LabelMap(np.array([[0, 1, 1], [2, 2, 0], [0, 0, 3]]))
    got = dice(lm, lm)
    assert got.mean == 1.0
    assert set(got.per_label) == {1, 2, 3}


def test_dice_symmetric_and_bounded():
    rng = np.random.default_rng(17)
    a = rng.integers(0, 3, size=(12, 12)).astype(np.int32)
    b = rng.integers(0, 3, size=(12, 12)).astype(np.int32)
    ab = dice(a, b, labels=[1, 2])
    ba = dice(b, a, labels=[1, 2])
    assert ab.per_label == ba.per_label
    assert all(0.0 <= v <= 1.0 for v in ab.per_label.values())


def test_dice_drops_absent_labels():
    a = np.array([[1, 1], [0, 0]], dtype=np.int32)
    b = np.array([[1, 0], [0, 0]], dtype=np.int32)
    got = dice(a, b, labels=[1, 9])
    assert 9 not in got.per_label


def test_dice_validation():
    a = np.zeros((4, 4), dtype=np.int32)
    with pytest.raises(GridMismatchError):
        dice(a, np.zeros((5, 5), dtype=np.int32), labels=[1])
    with pytest.raises(ConfigError):
        dice(a, a, labels=[])


# --- baseline comparison ----------------------------------------------------------


def _case(case_id, lam, dsc, std):
    from condreg.metrics import CaseResult

    return CaseResult(case_id=case_id, lam=lam, dsc=dsc, std_jac=std, runtime_s=0.01)


def test_compare_to_baseline_percentages():
    cond = [_case("a", 1.0, 0.8, 0.05), _case("b", 1.0, 0.6, 0.08)]
    base = [_case("a", 1.0, 0.9, 0.10), _case("b", 1.0, 0.6, 0.08)]
    rep = compare_to_baseline(cond, base)
    assert rep.pct_dsc == pytest.approx(np.mean([100.0 * (0.8 - 0.9) / 0.9, 0.0]))
    assert rep.pct_std == pytest.approx(np.mean([100.0 * (0.05 - 0.10) / 0.10, 0.0]))
    assert rep.n_pairs == 2


def test_compare_to_baseline_self_is_zero():
    rows = [_case("a", 0.5, 0.5, 0.2), _case("a", 4.0, 0.7, 0.1)]
    rep = compare_to_baseline(rows, rows)
    assert rep.pct_dsc == 0.0
    assert rep.pct_std == 0.0


def test_compare_to_baseline_requires_pairing():
    from condreg.errors import DataError

    with pytest.raises(DataError):
        compare_to_baseline([_case("a", 1.0, 0.5, 0.1)], [_case("b", 1.0, 0.5, 0.1)])
    with pytest.raises(DataError):
        compare_to_baseline(
            [_case("a", 1.0, 0.5, 0.1)],
            [_case("a", 1.0, 0.5, 0.1), _case("b", 1.0, 0.5, 0.1)],
        )
