"""Checkpoint serialization for registration networks.

A checkpoint is a single torch file holding the format version, the model
configuration as JSON, and the state dict. Loading rebuilds the network from
the embedded config, so a checkpoint is self-describing.
"""

from __future__ import annotations

from pathlib import Path

import torch

from ..errors import DataError
from .network import ConditionalRegNet, ModelConfig, build_variant

FORMAT_VERSION = 1


def save_checkpoint(model: ConditionalRegNet, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(
        {
            "format_version": FORMAT_VERSION,
            "config": model.config.to_json(),
            "state_dict": model.state_dict(),
        },
        path,
    )


def load_checkpoint(path) -> ConditionalRegNet:
    path = Path(path)
    if not path.exists():
        raise DataError(f"checkpoint not found: {path}")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:
        raise DataError(f"unreadable checkpoint {path}: {exc}") from exc
    if not isinstance(payload, dict) or "format_version" not in payload:
        raise DataError(f"{path} is not a registration checkpoint")
    version = payload["format_version"]
    if version != FORMAT_VERSION:
        raise DataError(
            f"checkpoint format version {version} not supported "
            f"(expected {FORMAT_VERSION})"
        )
    config = ModelConfig.from_json(payload["config"])
    model = build_variant(config)
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model
