"""Differentiable tensor kernels behind the grid operations.

Everything here works on torch tensors and supports 1-D, 2-D, and 3-D
grids with a uniform convention:

* volumes are shaped ``(C, *spatial)``,
* flows are shaped ``(D, *spatial)`` with ``flow[d]`` the displacement
  along spatial axis ``d``, measured in voxels of the same grid,
* warping reads the input at ``x + flow(x)`` with border clamping.

The container-level API in :mod:`condreg.grid.ops` wraps these kernels for
numpy-backed inputs; the network uses them directly so gradients flow.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F

from ..errors import GridMismatchError

_POOL = {1: F.avg_pool1d, 2: F.avg_pool2d, 3: F.avg_pool3d}
_LINEAR_MODE = {1: "linear", 2: "bilinear", 3: "trilinear"}


def _spatial_ndim(flow: torch.Tensor) -> int:
    ndim = flow.ndim - 1
    if ndim not in (1, 2, 3) or flow.shape[0] != ndim:
        raise GridMismatchError(
            f"flow of shape {tuple(flow.shape)} is not a (D, *spatial) field"
        )
    return ndim


def identity_grid(shape: tuple[int, ...], dtype=torch.float32, device=None) -> torch.Tensor:
    """Voxel-index coordinates, shaped (D, *shape); entry d holds axis-d indices."""
    axes = [torch.arange(n, dtype=dtype, device=device) for n in shape]
    mesh = torch.meshgrid(*axes, indexing="ij")
    return torch.stack(mesh, dim=0)


def _normalize_coords(coords: torch.Tensor, shape: tuple[int, ...]) -> torch.Tensor:
    """Map voxel coordinates (D, *S) to grid_sample's [-1, 1], axis order reversed."""
    ndim = coords.shape[0]
    norm = []
    # grid_sample expects the innermost (last) spatial axis first in the
    # coordinate vector, hence the reversed component order.
    for d in reversed(range(ndim)):
        n = shape[d]
        denom = max(n - 1, 1)
        norm.append(2.0 * coords[d] / denom - 1.0)
    return torch.stack(norm, dim=-1)


def warp_tensor(vol: torch.Tensor, flow: torch.Tensor, mode: str = "linear") -> torch.Tensor:
    """Sample ``vol`` at ``x + flow(x)``. Out-of-bounds positions clamp to the border.

    vol: (C, *spatial); flow: (D, *spatial) on the same grid.
    mode: "linear" (multi-linear) or "nearest".
    """
    if mode not in ("linear", "nearest"):
        raise ValueError(f"unknown interpolation mode {mode!r}")
    ndim = _spatial_ndim(flow)
    shape = tuple(flow.shape[1:])
    if vol.ndim != ndim + 1 or tuple(vol.shape[1:]) != shape:
        raise GridMismatchError(
            f"volume {tuple(vol.shape)} and flow {tuple(flow.shape)} disagree"
        )
    if not torch.all(torch.isfinite(flow)):
        raise ValueError("flow contains non-finite values")

    base = identity_grid(shape, dtype=flow.dtype, device=flow.device)
    grid = _normalize_coords(base + flow, shape)

    # grid_sample needs at least 2 spatial dims; lift 1-D inputs to (C, 1, W)
    # with the second (height) coordinate pinned to the single row.
    lift_1d = ndim == 1
    if lift_1d:
        vol = vol.unsqueeze(1)
        grid = torch.stack([grid[..., 0], torch.zeros_like(grid[..., 0])], dim=-1)
        grid = grid.unsqueeze(0)

    sample_mode = "bilinear" if mode == "linear" else "nearest"
    out = F.grid_sample(
        vol.unsqueeze(0).to(flow.dtype),
        grid.unsqueeze(0),
        mode=sample_mode,
        padding_mode="border",
        align_corners=True,
    ).squeeze(0)
    if lift_1d:
        out = out.squeeze(1)
    return out


def downsample2(vol: torch.Tensor, spatial_ndim: int) -> torch.Tensor:
    """Halve every spatial axis by 2-wide average pooling. Axes must be even."""
    shape = tuple(vol.shape[-spatial_ndim:])
    for n in shape:
        if n < 2:
            raise GridMismatchError(f"axis of length {n} cannot be halved")
        if n % 2:
            raise GridMismatchError(f"axis of length {n} is odd; down2 needs even axes")
    lead = vol.shape[:-spatial_ndim]
    flat = vol.reshape(1, -1, *shape) if lead else vol.reshape(1, 1, *shape)
    pooled = _POOL[spatial_ndim](flat, kernel_size=2, stride=2)
    return pooled.reshape(*lead, *pooled.shape[2:]) if lead else pooled.reshape(*pooled.shape[2:])


def upsample2(vol: torch.Tensor, spatial_ndim: int) -> torch.Tensor:
    """Double every spatial axis by multi-linear interpolation."""
    shape = tuple(vol.shape[-spatial_ndim:])
    lead = vol.shape[:-spatial_ndim]
    flat = vol.reshape(1, -1, *shape) if lead else vol.reshape(1, 1, *shape)
    up = F.interpolate(
        flat, scale_factor=2, mode=_LINEAR_MODE[spatial_ndim], align_corners=False
    )
    return up.reshape(*lead, *up.shape[2:]) if lead else up.reshape(*up.shape[2:])


def upsample_flow(flow: torch.Tensor) -> torch.Tensor:
    """Double a flow's resolution; voxel-unit values scale by 2 with it."""
    ndim = _spatial_ndim(flow)
    return upsample2(flow, ndim) * 2.0


def jacobian_determinant_tensor(flow: torch.Tensor) -> torch.Tensor:
    """det(I + du/dx) per interior voxel, central differences; boundary excluded.

    Returns a tensor of shape ``tuple(n - 2 for n in spatial)``.
    """
    ndim = _spatial_ndim(flow)
    shape = tuple(flow.shape[1:])
    for n in shape:
        if n < 3:
            raise GridMismatchError(
                f"axis of length {n} too small for central differences (need >= 3)"
            )

    def interior(t: torch.Tensor, skip_axis: int | None = None) -> torch.Tensor:
        idx = []
        for d in range(ndim):
            if d == skip_axis:
                idx.append(slice(None))
            else:
                idx.append(slice(1, shape[d] - 1))
        return t[(slice(None), *idx)]

    grads = []  # grads[d][c] = du_c/dx_d on the interior
    for d in range(ndim):
        t = interior(flow, skip_axis=d)
        fwd = t.narrow(1 + d, 2, shape[d] - 2)
        bwd = t.narrow(1 + d, 0, shape[d] - 2)
        grads.append((fwd - bwd) / 2.0)

    if ndim == 1:
        return 1.0 + grads[0][0]
    if ndim == 2:
        a = 1.0 + grads[0][0]
        b = grads[1][0]
        c = grads[0][1]
        d_ = 1.0 + grads[1][1]
        return a * d_ - b * c
    j = torch.stack(
        [torch.stack([grads[d][c] for d in range(3)], dim=-1) for c in range(3)],
        dim=-2,
    )
    eye = torch.eye(3, dtype=flow.dtype, device=flow.device)
    return torch.linalg.det(j + eye)
