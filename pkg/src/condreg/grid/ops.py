"""Container-level grid operations: warping, pyramid resampling, Jacobian stats."""

from __future__ import annotations

import numpy as np
import torch

from ..errors import GridMismatchError
from . import kernels
from .containers import DisplacementField, Image, LabelMap, check_same_grid


def _field_tensor(field: DisplacementField, dtype=torch.float64) -> torch.Tensor:
    return torch.from_numpy(np.asarray(field.values)).to(dtype)


def warp(image, field: DisplacementField, mode: str = "linear"):
    """Resample an Image or LabelMap through ``x -> x + u(x)``.

    Border clamping outside the grid. LabelMap inputs require nearest mode
    and come back as a LabelMap with the same label set.
    """
    is_labels = isinstance(image, LabelMap)
    if is_labels and mode != "nearest":
        raise ValueError("LabelMap warping requires mode='nearest'")
    if not isinstance(image, (Image, LabelMap)):
        raise TypeError(f"cannot warp {type(image).__name__}")
    check_same_grid(image, field, "image and field")

    flow = _field_tensor(field)
    vol = torch.from_numpy(np.asarray(image.values)).to(flow.dtype).unsqueeze(0)
    out = kernels.warp_tensor(vol, flow, mode=mode).squeeze(0).numpy()
    if is_labels:
        out = np.rint(out).astype(np.int32)
        return LabelMap(out, labels=image.labels, spacing=image.spacing)
    return Image(out.astype(np.float32), spacing=image.spacing)


def resample_image(image: Image, factor: str) -> Image:
    """Pyramid resampling: 'down2' average-pools, 'up2' multi-linearly doubles."""
    if factor not in ("down2", "up2"):
        raise ValueError(f"unknown resample factor {factor!r}")
    vol = torch.from_numpy(np.asarray(image.values, dtype=np.float64))
    if factor == "down2":
        out = kernels.downsample2(vol, image.ndim)
    else:
        out = kernels.upsample2(vol, image.ndim)
    return Image(out.numpy().astype(np.float32), spacing=image.spacing)


def upsample_field(field: DisplacementField) -> DisplacementField:
    """Double a field's grid; displacement values double with the resolution."""
    out = kernels.upsample_flow(_field_tensor(field))
    return DisplacementField(out.numpy().astype(np.float32), spacing=field.spacing)


def jacobian_determinant(field: DisplacementField) -> np.ndarray:
    """det(I + du/dx) on the interior grid (one-voxel boundary excluded)."""
    det = kernels.jacobian_determinant_tensor(_field_tensor(field))
    return det.numpy()


def std_jacobian(field: DisplacementField) -> float:
    """Population standard deviation of the Jacobian determinant over the interior."""
    det = jacobian_determinant(field)
    return float(det.std())


def downsample_pair(image: Image, times: int) -> Image:
    """Repeated down2; convenience for building pyramids."""
    out = image
    for _ in range(times):
        out = resample_image(out, "down2")
    return out
