"""Grid-attached data containers: scalar images, displacement fields, label maps.

All containers hold numpy arrays in C order. Displacements are expressed in
voxel units of their own grid: a field value u at voxel x means the warped
output reads the input at position x + u.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import GridMismatchError

SUPPORTED_DIMS = (2, 3)


def _check_finite(values: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{what} contains non-finite values")


def _check_dims(ndim: int, what: str) -> None:
    if ndim not in SUPPORTED_DIMS:
        raise GridMismatchError(f"{what} must be 2-D or 3-D, got {ndim}-D")


def _default_spacing(ndim: int) -> tuple[float, ...]:
    return (1.0,) * ndim


@dataclass
class Image:
    """Scalar intensity field on a regular grid. Spacing is metadata only."""

    values: np.ndarray
    spacing: tuple[float, ...] = ()

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32)
        _check_dims(self.values.ndim, "Image")
        _check_finite(self.values, "Image")
        if not self.spacing:
            self.spacing = _default_spacing(self.values.ndim)
        self.spacing = tuple(float(s) for s in self.spacing)
        if len(self.spacing) != self.values.ndim:
            raise GridMismatchError(
                f"spacing has {len(self.spacing)} entries for a "
                f"{self.values.ndim}-D image"
            )

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def ndim(self) -> int:
        return self.values.ndim


@dataclass
class DisplacementField:
    """Per-voxel displacement vectors, shaped (D, *grid), in voxel units."""

    values: np.ndarray
    spacing: tuple[float, ...] = ()

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32)
        ndim = self.values.ndim - 1
        _check_dims(ndim, "DisplacementField")
        if self.values.shape[0] != ndim:
            raise GridMismatchError(
                f"field has {self.values.shape[0]} components for a "
                f"{ndim}-D grid"
            )
        _check_finite(self.values, "DisplacementField")
        if not self.spacing:
            self.spacing = _default_spacing(ndim)
        self.spacing = tuple(float(s) for s in self.spacing)
        if len(self.spacing) != ndim:
            raise GridMismatchError("spacing length does not match grid rank")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape[1:]

    @property
    def ndim(self) -> int:
        return self.values.ndim - 1


@dataclass
class LabelMap:
    """Integer segmentation aligned with an Image grid."""

    values: np.ndarray
    labels: tuple[int, ...] = field(default_factory=tuple)
    spacing: tuple[float, ...] = ()

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.int32)
        _check_dims(self.values.ndim, "LabelMap")
        if self.values.min(initial=0) < 0:
            raise ValueError("LabelMap values must be non-negative")
        if not self.labels:
            present = np.unique(self.values)
            self.labels = tuple(int(v) for v in present if v != 0)
        self.labels = tuple(int(v) for v in self.labels)
        allowed = set(self.labels) | {0}
        present = set(int(v) for v in np.unique(self.values))
        if not present <= allowed:
            raise ValueError(
                f"LabelMap contains labels outside its declared set: "
                f"{sorted(present - allowed)}"
            )
        if not self.spacing:
            self.spacing = _default_spacing(self.values.ndim)
        self.spacing = tuple(float(s) for s in self.spacing)
        if len(self.spacing) != self.values.ndim:
            raise GridMismatchError("spacing length does not match grid rank")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def ndim(self) -> int:
        return self.values.ndim


def check_same_grid(a, b, what: str = "inputs") -> None:
    """Raise unless the two containers share one grid shape."""
    if a.shape != b.shape:
        raise GridMismatchError(f"{what} on different grids: {a.shape} vs {b.shape}")
