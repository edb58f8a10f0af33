from .evalmetrics import CaseResult, ComparisonReport, DiceResult, compare_to_baseline, dice
from .losses import LossConfig, NCC_EPS, diffusion_energy, local_ncc, pyramid_loss, window_size

__all__ = [
    "local_ncc",
    "diffusion_energy",
    "pyramid_loss",
    "window_size",
    "LossConfig",
    "NCC_EPS",
    "dice",
    "DiceResult",
    "CaseResult",
    "ComparisonReport",
    "compare_to_baseline",
]
