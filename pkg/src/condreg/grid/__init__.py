from .containers import DisplacementField, Image, LabelMap, check_same_grid
from .io import load_tensor, save_tensor
from .ops import (
    downsample_pair,
    jacobian_determinant,
    resample_image,
    std_jacobian,
    upsample_field,
    warp,
)

__all__ = [
    "Image",
    "DisplacementField",
    "LabelMap",
    "check_same_grid",
    "warp",
    "resample_image",
    "upsample_field",
    "jacobian_determinant",
    "std_jacobian",
    "downsample_pair",
    "save_tensor",
    "load_tensor",
]
