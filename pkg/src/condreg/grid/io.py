"""Tensor container format: a directory holding header.json + data.bin.

header.json keys:
  kind        "image" | "field" | "labels"
  shape       grid shape, ints, C order
  components  vector components (fields only)
  dtype       "f32" | "i32"
  spacing     mm per axis, floats

data.bin is raw little-endian C-order values with no padding. Fields are
stored component-major: the array written is (components, *shape).
Round trips are bit-exact for the stored precision.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import DataError
from .containers import DisplacementField, Image, LabelMap

_HEADER = "header.json"
_DATA = "data.bin"
_DTYPES = {"f32": np.dtype("<f4"), "i32": np.dtype("<i4")}


def save_tensor(path, obj) -> Path:
    """Write an Image, DisplacementField, or LabelMap container directory."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)

    if isinstance(obj, Image):
        header = {"kind": "image", "dtype": "f32"}
        data = obj.values.astype("<f4")
    elif isinstance(obj, DisplacementField):
        header = {
            "kind": "field",
            "dtype": "f32",
            "components": int(obj.values.shape[0]),
        }
        data = obj.values.astype("<f4")
    elif isinstance(obj, LabelMap):
        header = {"kind": "labels", "dtype": "i32", "labels": list(obj.labels)}
        data = obj.values.astype("<i4")
    else:
        raise TypeError(f"cannot save {type(obj).__name__}")

    header["shape"] = list(obj.shape)
    header["spacing"] = list(obj.spacing)
    (path / _HEADER).write_text(json.dumps(header, indent=1))
    (path / _DATA).write_bytes(np.ascontiguousarray(data).tobytes())
    return path


def load_tensor(path):
    """Read a container directory back into its typed object."""
    path = Path(path)
    try:
        header = json.loads((path / _HEADER).read_text())
    except FileNotFoundError:
        raise DataError(f"missing {_HEADER} in {path}")
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed {_HEADER} in {path}: {exc}")

    kind = header.get("kind")
    if kind not in ("image", "field", "labels"):
        raise DataError(f"unknown tensor kind {kind!r}")
    try:
        shape = tuple(int(n) for n in header["shape"])
        spacing = tuple(float(s) for s in header["spacing"])
        dtype = _DTYPES[header["dtype"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed header fields in {path}: {exc}")

    full_shape = shape
    if kind == "field":
        components = int(header.get("components", -1))
        if components != len(shape):
            raise DataError(
                f"field with {components} components on a {len(shape)}-D grid"
            )
        full_shape = (components, *shape)

    raw = (path / _DATA).read_bytes()
    expected = int(np.prod(full_shape)) * dtype.itemsize
    if len(raw) != expected:
        raise DataError(
            f"data size mismatch in {path}: {len(raw)} bytes, expected {expected}"
        )
    # copy: frombuffer views are read-only, containers should own their data
    values = np.frombuffer(raw, dtype=dtype).reshape(full_shape).copy()

    if kind == "image":
        return Image(values, spacing=spacing)
    if kind == "field":
        return DisplacementField(values, spacing=spacing)
    labels = tuple(int(v) for v in header.get("labels", ()))
    return LabelMap(values, labels=labels, spacing=spacing)
