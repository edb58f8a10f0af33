"""Conditional deformable image registration.

One network, trained once over a whole range of regularization weights,
produces the deformation field for any weight in that range at inference
time. The weight enters through conditional instance normalization driven by
small mapping networks, so smoothness becomes a dial rather than a retrain.
"""

from .errors import (
    CondRegError,
    ConfigError,
    DataError,
    GridMismatchError,
    RangeError,
    TrainingDiverged,
)
from .grid.containers import DisplacementField, Image, LabelMap
from .estimator import ConditionalRegistration

__version__ = "0.1.0"

__all__ = [
    "CondRegError",
    "ConditionalRegistration",
    "ConfigError",
    "DataError",
    "DisplacementField",
    "GridMismatchError",
    "Image",
    "LabelMap",
    "RangeError",
    "TrainingDiverged",
    "__version__",
]
