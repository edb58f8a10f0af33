"""Input checks shared by the estimator facade and the CLI glue."""

from __future__ import annotations

from pathlib import Path

from .datagen.synth import PairRecord
from .errors import ConfigError, DataError, GridMismatchError, RangeError
from .grid.containers import Image, check_same_grid


def check_lambda(lam, lambda_range) -> float:
    lam = float(lam)
    lo, hi = lambda_range
    if not (lo <= lam <= hi):
        raise RangeError(f"lambda {lam} outside [{lo:g}, {hi:g}]")
    return lam


def normalize_lambda(lam, lambda_range) -> float:
    lam = check_lambda(lam, lambda_range)
    lo, hi = lambda_range
    return (lam - lo) / (hi - lo)


def check_image_pair(fixed, moving):
    if not isinstance(fixed, Image) or not isinstance(moving, Image):
        raise ConfigError(
            f"expected a pair of images, got ({type(fixed).__name__}, "
            f"{type(moving).__name__})"
        )
    check_same_grid(fixed, moving)
    return fixed, moving


def as_image_pair(obj):
    """Accept a PairRecord or a (fixed, moving) pair of images."""
    if isinstance(obj, PairRecord):
        return obj.fixed, obj.moving
    if isinstance(obj, (tuple, list)) and len(obj) == 2:
        return check_image_pair(obj[0], obj[1])
    raise ConfigError(
        "expected a PairRecord or a (fixed, moving) tuple, got "
        f"{type(obj).__name__}"
    )


def check_dataset_dir(path) -> Path:
    path = Path(path)
    if not (path / "manifest.json").exists():
        raise DataError(f"{path} is not a dataset directory (no manifest.json)")
    return path
