from .config import TrainConfig
from .loop import (
    progressive_schedule,
    sample_lambda,
    train,
    train_step,
    validation_dice,
)

__all__ = [
    "TrainConfig",
    "progressive_schedule",
    "sample_lambda",
    "train",
    "train_step",
    "validation_dice",
]
