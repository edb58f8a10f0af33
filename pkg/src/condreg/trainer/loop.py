"""Self-supervised training loop.

Every iteration draws a fresh regularization weight from the configured
range. The raw draw weighs the smoothness penalty in the objective; the same
draw rescaled to [0, 1] is what conditions the network. Resolution levels are
enabled coarse to fine over the run, with already-enabled levels continuing
to train, and periodic checkpoints are ranked by validation Dice at the
selection weight so only the best few survive.
"""

from __future__ import annotations

import json
import shutil
import time
from pathlib import Path

import numpy as np
import torch

from ..condnet.checkpoint import save_checkpoint
from ..condnet.network import ConditionalRegNet, default_config
from ..datagen.synth import load_manifest, load_pair, pairs_for_split
from ..errors import ConfigError, TrainingDiverged
from ..grid.containers import DisplacementField
from ..grid.kernels import downsample2, warp_tensor
from ..grid.ops import warp
from ..metrics.evalmetrics import dice
from ..metrics.losses import LossConfig, pyramid_loss
from .config import TrainConfig


def sample_lambda(rng: np.random.Generator, lambda_range=(0.0, 10.0)):
    """One uniform draw: the raw weight and its [0, 1] rescaling."""
    lo, hi = lambda_range
    raw = float(rng.uniform(lo, hi))
    return raw, (raw - lo) / (hi - lo)


def progressive_schedule(iteration: int, cfg: TrainConfig) -> int:
    """Active (finest) pyramid level for this iteration, 1-based."""
    total = cfg.iterations
    if not (0 <= iteration < total):
        raise ConfigError(f"iteration {iteration} outside [0, {total})")
    cum = 0.0
    for level, frac in enumerate(cfg.progressive_fractions, start=1):
        cum += frac
        if iteration < round(cum * total):
            return level
    return len(cfg.progressive_fractions)


def _loss_for_pair(model, fixed_t, moving_t, lam_raw, lam_norm, level):
    flow, level_fields = model(fixed_t, moving_t, lambda_norm=lam_norm, levels=level)
    depth = model.config.levels
    dims = model.config.dims
    f_pyr = [fixed_t]
    m_pyr = [moving_t]
    for _ in range(depth - 1):
        f_pyr.insert(0, downsample2(f_pyr[0], dims))
        m_pyr.insert(0, downsample2(m_pyr[0], dims))
    warped = [
        warp_tensor(m_pyr[i].unsqueeze(0), level_fields[i])[0] for i in range(level)
    ]
    cfg = LossConfig(lambda_weight=lam_raw, level=level)
    return pyramid_loss(f_pyr[:level], warped, flow, cfg)


def train_step(
    model: ConditionalRegNet,
    optimizer,
    batch,
    lam_raw: float,
    lam_norm: float,
    level: int,
    iteration: int | None = None,
) -> float:
    """One gradient step on the pyramid objective at the given level.

    ``batch`` is a sequence of (fixed, moving) tensor pairs. A model with a
    built-in weight substitutes it for the sampled one everywhere: the draw
    neither conditions it nor weighs its loss.
    """
    if model.config.conditioning == "fixed":
        lam_raw = model.config.fixed_lambda
        lam_norm = None
    losses = [
        _loss_for_pair(model, f, m, lam_raw, lam_norm, level) for f, m in batch
    ]
    loss = torch.stack(losses).mean()
    if not torch.isfinite(loss):
        where = "" if iteration is None else f" at iteration {iteration}"
        raise TrainingDiverged(
            f"non-finite loss {loss.item()}{where} "
            f"(lambda={lam_raw}, level={level}, batch={len(batch)})"
        )
    optimizer.zero_grad()
    loss.backward()
    optimizer.step()
    return float(loss.item())


def _build_optimizer(model: ConditionalRegNet, config: TrainConfig):
    cond = set(id(p) for p in model.conditioning_parameters())
    if not cond or config.cond_lr_scale == 1.0:
        return torch.optim.Adam(model.parameters(), lr=config.lr)
    groups = [
        {
            "params": [p for p in model.parameters() if id(p) not in cond],
            "lr": config.lr,
        },
        {
            "params": model.conditioning_parameters(),
            "lr": config.lr * config.cond_lr_scale,
        },
    ]
    return torch.optim.Adam(groups)


def _flow_to_field(flow: torch.Tensor) -> DisplacementField:
    return DisplacementField(values=flow.detach().cpu().numpy().astype(np.float32))


def validation_dice(model, records, lam_raw: float, lambda_range) -> float:
    """Mean Dice over records when registering at one raw weight."""
    lo, hi = lambda_range
    lam_norm = (lam_raw - lo) / (hi - lo)
    was_training = model.training
    model.eval()
    scores = []
    with torch.no_grad():
        for rec in records:
            flow, _ = model(rec.fixed, rec.moving, lambda_norm=lam_norm)
            warped = warp(rec.moving_labels, _flow_to_field(flow), mode="nearest")
            scores.append(dice(rec.fixed_labels, warped).mean)
    if was_training:
        model.train()
    return float(np.mean(scores))


def train(
    config: TrainConfig,
    dataset_dir,
    out_dir,
    model: ConditionalRegNet | None = None,
    model_config=None,
) -> dict:
    """Train on a generated dataset; returns a summary with the kept
    checkpoints ranked by validation Dice at the selection weight."""
    manifest = load_manifest(dataset_dir)
    train_entries = pairs_for_split(manifest, "train")
    if not train_entries:
        raise ConfigError("dataset has no training pairs")
    val_entries = pairs_for_split(manifest, "val") or train_entries

    train_records = [load_pair(dataset_dir, e) for e in train_entries]
    val_records = [load_pair(dataset_dir, e) for e in val_entries]

    if model is None:
        if model_config is None:
            dims = train_records[0].fixed.ndim
            model_config = default_config(dims=dims, lambda_range=config.lambda_range)
        model = ConditionalRegNet(model_config)
    if model.config.lambda_range != config.lambda_range:
        raise ConfigError(
            f"model lambda_range {model.config.lambda_range} differs from "
            f"training lambda_range {config.lambda_range}"
        )
    if len(config.progressive_fractions) != model.config.levels:
        raise ConfigError(
            f"{len(config.progressive_fractions)} progressive fractions for a "
            f"{model.config.levels}-level model"
        )

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    log_path = out_dir / "train_log.jsonl"

    rng = np.random.default_rng(config.seed)
    torch.manual_seed(config.seed)
    optimizer = _build_optimizer(model, config)

    dtype = next(model.parameters()).dtype
    tensors = [
        (
            torch.as_tensor(r.fixed.values, dtype=dtype),
            torch.as_tensor(r.moving.values, dtype=dtype),
        )
        for r in train_records
    ]

    candidates = []
    t0 = time.monotonic()
    model.train()
    with open(log_path, "w") as log:
        for it in range(config.iterations):
            level = progressive_schedule(it, config)
            # draw order is fixed: batch indices first, then the weight
            idx = rng.integers(0, len(tensors), size=config.batch_size)
            lam_raw, lam_norm = sample_lambda(rng, config.lambda_range)
            batch = [tensors[i] for i in idx]
            loss = train_step(
                model, optimizer, batch, lam_raw, lam_norm, level, iteration=it
            )
            log.write(
                json.dumps(
                    {"iteration": it, "lambda": lam_raw, "level": level, "loss": loss}
                )
                + "\n"
            )
            if (it + 1) % config.checkpoint_every == 0 or it == config.iterations - 1:
                path = out_dir / f"ckpt_{it + 1:06d}.pt"
                if not path.exists():
                    save_checkpoint(model, path)
                    dsc = validation_dice(
                        model, val_records, config.selection_lambda, config.lambda_range
                    )
                    candidates.append(
                        {"path": str(path), "iteration": it + 1, "dice": dsc}
                    )
    train_seconds = time.monotonic() - t0

    ranked = sorted(candidates, key=lambda c: (-c["dice"], -c["iteration"]))
    kept = ranked[: config.keep_best]
    for entry in ranked[config.keep_best :]:
        Path(entry["path"]).unlink(missing_ok=True)
    if kept:
        shutil.copyfile(kept[0]["path"], out_dir / "best.pt")

    summary = {
        "best": kept,
        "best_checkpoint": str(out_dir / "best.pt") if kept else None,
        "train_seconds": train_seconds,
        "iterations": config.iterations,
        "log": str(log_path),
    }
    with open(out_dir / "training_summary.json", "w") as fh:
        json.dump(summary, fh, indent=1)
    return summary
