"""Training configuration with a JSON file round trip."""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path

from ..errors import ConfigError


@dataclass
class TrainConfig:
    iterations: int = 2000
    lr: float = 1e-4
    lambda_range: tuple = (0.0, 10.0)
    seed: int = 0
    progressive_fractions: tuple = (1 / 3, 1 / 3, 1 / 3)
    batch_size: int = 1
    checkpoint_every: int = 500
    validation_lambdas: tuple = (0.1,)
    selection_lambda: float = 0.1
    keep_best: int = 3
    # at short budgets the weight-conditioning pathway needs faster updates
    # than the trunk: its useful gradient is the differential across sampled
    # weights, which accumulates much more slowly than the mean signal
    cond_lr_scale: float = 100.0

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if self.lr <= 0:
            raise ConfigError("lr must be positive")
        lo, hi = self.lambda_range
        if not (0 <= lo < hi):
            raise ConfigError(
                f"lambda_range must satisfy 0 <= lo < hi, got {self.lambda_range}"
            )
        self.lambda_range = (float(lo), float(hi))
        fracs = tuple(float(f) for f in self.progressive_fractions)
        if any(f < 0 for f in fracs) or abs(sum(fracs) - 1.0) > 1e-9:
            raise ConfigError(
                f"progressive_fractions must be non-negative and sum to 1, got {fracs}"
            )
        self.progressive_fractions = fracs
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.checkpoint_every < 1:
            raise ConfigError("checkpoint_every must be >= 1")
        if self.keep_best < 1:
            raise ConfigError("keep_best must be >= 1")
        lams = tuple(float(v) for v in self.validation_lambdas)
        for v in lams + (float(self.selection_lambda),):
            if not (lo <= v <= hi):
                raise ConfigError(
                    f"validation lambda {v} outside lambda_range {self.lambda_range}"
                )
        self.validation_lambdas = lams
        self.selection_lambda = float(self.selection_lambda)
        if self.cond_lr_scale <= 0:
            raise ConfigError("cond_lr_scale must be positive")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "TrainConfig":
        data = json.loads(text)
        for key in ("lambda_range", "progressive_fractions", "validation_lambdas"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "TrainConfig":
        return cls.from_json(Path(path).read_text())
