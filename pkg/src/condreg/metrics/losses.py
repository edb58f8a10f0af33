"""Differentiable registration losses: local NCC, diffusion energy, pyramid objective.

Functions accept either grid containers or torch tensors; tensors keep their
dtype and stay on the autograd tape, containers are evaluated at float64.
Similarity uses the squared local correlation coefficient computed over fully
supported (valid) windows, so it is exactly invariant to positive affine
intensity changes and bounded in [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from ..errors import ConfigError, GridMismatchError
from ..grid.containers import DisplacementField, Image

_CONV = {1: F.conv1d, 2: F.conv2d, 3: F.conv3d}

NCC_EPS = 1e-5


def _as_spatial(x) -> torch.Tensor:
    if isinstance(x, Image):
        return torch.from_numpy(np.asarray(x.values, dtype=np.float64))
    if isinstance(x, torch.Tensor):
        return x
    return torch.as_tensor(x, dtype=torch.float64)


def _as_field(x) -> torch.Tensor:
    if isinstance(x, DisplacementField):
        return torch.from_numpy(np.asarray(x.values, dtype=np.float64))
    if isinstance(x, torch.Tensor):
        return x
    return torch.as_tensor(x, dtype=torch.float64)


def window_size(level_index: int) -> int:
    """NCC window for pyramid level i (1 = coarsest): w = 1 + 2i."""
    return 1 + 2 * level_index


@dataclass
class LossConfig:
    """Weighting for the pyramid objective at a given level."""

    lambda_weight: float
    level: int

    def __post_init__(self):
        if self.lambda_weight < 0:
            raise ConfigError("lambda_weight must be >= 0")
        if self.level < 1:
            raise ConfigError("level must be >= 1")


def local_ncc(f, m, window: int, eps: float = NCC_EPS) -> torch.Tensor:
    """Mean squared local correlation coefficient over all valid windows.

    A window contributes the squared Pearson correlation of the two patches,
    with ``eps`` stabilizing the variance product. Result lies in [0, 1].
    """
    f = _as_spatial(f)
    m = _as_spatial(m)
    if f.shape != m.shape:
        raise GridMismatchError(f"images differ in shape: {f.shape} vs {m.shape}")
    ndim = f.ndim
    if ndim not in _CONV:
        raise GridMismatchError(f"unsupported dimensionality {ndim}")
    if window % 2 == 0 or window < 1:
        raise ConfigError(f"NCC window must be odd and >= 1, got {window}")
    if window > min(f.shape):
        raise ConfigError(
            f"NCC window {window} exceeds smallest axis {min(f.shape)}"
        )

    kernel = torch.ones((1, 1) + (window,) * ndim, dtype=f.dtype, device=f.device)
    n = float(window**ndim)
    conv = _CONV[ndim]

    def sums(x):
        return conv(x.unsqueeze(0).unsqueeze(0), kernel).squeeze(0).squeeze(0)

    sf = sums(f)
    sm = sums(m)
    sff = sums(f * f)
    smm = sums(m * m)
    sfm = sums(f * m)

    cross = sfm - sf * sm / n
    var_f = (sff - sf * sf / n).clamp_min(0.0)
    var_m = (smm - sm * sm / n).clamp_min(0.0)
    cc = cross * cross / (var_f * var_m + eps)
    return cc.mean()


def diffusion_energy(field) -> torch.Tensor:
    """Mean squared forward-difference gradient of the displacement field.

    Per axis, the squared differences are averaged over components and
    positions; the axis means are then averaged. Zero iff the field is
    constant.
    """
    u = _as_field(field)
    ndim = u.ndim - 1
    if ndim not in (1, 2, 3) or u.shape[0] != ndim:
        raise GridMismatchError(f"not a (D, *spatial) field: {tuple(u.shape)}")
    terms = []
    for d in range(ndim):
        n = u.shape[1 + d]
        if n < 2:
            raise GridMismatchError(f"axis of length {n} has no spatial gradient")
        diff = u.narrow(1 + d, 1, n - 1) - u.narrow(1 + d, 0, n - 1)
        terms.append((diff * diff).mean())
    return sum(terms) / ndim


def pyramid_loss(f_pyramid, warped_pyramid, field, cfg: LossConfig) -> torch.Tensor:
    """Multi-resolution similarity plus weighted smoothness.

    Pyramids run coarsest (i=1) to finest (i=level); level i contributes
    -NCC with window 1+2i, weighted 1/2^(level-i). The displacement field is
    penalized by ``lambda_weight`` times its diffusion energy.
    """
    if len(f_pyramid) != cfg.level or len(warped_pyramid) != cfg.level:
        raise ConfigError(
            f"pyramid length mismatch: {len(f_pyramid)}/{len(warped_pyramid)} "
            f"levels for level={cfg.level}"
        )
    total = None
    for i in range(1, cfg.level + 1):
        sim = local_ncc(f_pyramid[i - 1], warped_pyramid[i - 1], window_size(i))
        term = -sim / (2.0 ** (cfg.level - i))
        total = term if total is None else total + term
    return total + cfg.lambda_weight * diffusion_energy(field)
