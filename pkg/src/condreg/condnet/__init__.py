from .modulation import (
    CIN_EPS,
    ConditionalBlock,
    ConditionalInstanceNorm,
    MappingNetwork,
    PlainInstanceNorm,
    map_latent,
)
from .network import (
    CONDITIONING_VARIANTS,
    ConditionalRegNet,
    LevelNet,
    ModelConfig,
    build_variant,
    default_config,
)
from .checkpoint import FORMAT_VERSION, load_checkpoint, save_checkpoint

__all__ = [
    "CIN_EPS",
    "CONDITIONING_VARIANTS",
    "ConditionalBlock",
    "ConditionalInstanceNorm",
    "ConditionalRegNet",
    "FORMAT_VERSION",
    "LevelNet",
    "MappingNetwork",
    "ModelConfig",
    "PlainInstanceNorm",
    "build_variant",
    "default_config",
    "load_checkpoint",
    "map_latent",
    "save_checkpoint",
]
