"""Multi-resolution conditional registration network.

A stack of per-resolution subnetworks estimates a displacement field coarse to
fine. Each subnetwork encodes the image pair at its scale, refines features
through a chain of pre-activation residual blocks, and decodes a residual
field that is added to the upsampled field from the level below. How the
regularization weight reaches the features is the only thing that changes
between variants:

* ``cir_dm``  - one small mapping network per residual block; its code drives
  the block's two conditional instance norms.
* ``cir_cm``  - a single larger mapping network shared by every block.
* ``concat``  - the weight is tiled as an extra input channel; norms are
  plain instance norms.
* ``fixed``   - the weight never enters the network at all.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from typing import Optional, Sequence

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..errors import ConfigError, GridMismatchError, RangeError
from ..grid.containers import Image
from ..grid.kernels import downsample2, upsample_flow, warp_tensor
from .modulation import (
    LEAKY_SLOPE,
    ConditionalBlock,
    ConditionalInstanceNorm,
    MappingNetwork,
)

CONDITIONING_VARIANTS = ("cir_dm", "cir_cm", "concat", "fixed")

_CONV_ND = {2: nn.Conv2d, 3: nn.Conv3d}
_CONVT_ND = {2: nn.ConvTranspose2d, 3: nn.ConvTranspose3d}


@dataclass
class ModelConfig:
    levels: int = 3
    blocks_per_level: int = 5
    conv_filters: int = 28
    latent_dim: int = 64
    mapping_layers: int = 4
    lambda_range: tuple = (0.0, 10.0)
    conditioning: str = "cir_dm"
    fixed_lambda: Optional[float] = None
    dims: int = 2
    range_flow: float = 0.4

    def __post_init__(self):
        if self.levels < 1:
            raise ConfigError("levels must be >= 1")
        if self.blocks_per_level < 1:
            raise ConfigError("blocks_per_level must be >= 1")
        if self.conv_filters < 1:
            raise ConfigError("conv_filters must be >= 1")
        if self.latent_dim < 1:
            raise ConfigError("latent_dim must be >= 1")
        if self.mapping_layers < 1:
            raise ConfigError("mapping_layers must be >= 1")
        if self.dims not in (2, 3):
            raise ConfigError(f"dims must be 2 or 3, got {self.dims}")
        if self.conditioning not in CONDITIONING_VARIANTS:
            raise ConfigError(
                f"unknown conditioning variant {self.conditioning!r}; "
                f"expected one of {CONDITIONING_VARIANTS}"
            )
        lo, hi = self.lambda_range
        if not (lo < hi) or lo < 0:
            raise ConfigError(
                f"lambda_range must satisfy 0 <= lo < hi, got {self.lambda_range}"
            )
        self.lambda_range = (float(lo), float(hi))
        if self.conditioning == "fixed":
            if self.fixed_lambda is None:
                raise ConfigError("fixed variant requires fixed_lambda")
            if not (lo <= self.fixed_lambda <= hi):
                raise RangeError(
                    f"fixed_lambda {self.fixed_lambda} outside "
                    f"lambda_range {self.lambda_range}"
                )
        if self.range_flow <= 0:
            raise ConfigError("range_flow must be positive")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ModelConfig":
        data = json.loads(text)
        data["lambda_range"] = tuple(data["lambda_range"])
        return cls(**data)


def default_config(conditioning: str = "cir_dm", **overrides) -> ModelConfig:
    """Config presets. The centralized variant trades the many small mapping
    networks for a single deeper and wider one."""
    base = dict(conditioning=conditioning)
    if conditioning == "cir_cm":
        base.update(latent_dim=256, mapping_layers=8)
    base.update(overrides)
    return ModelConfig(**base)


class LevelNet(nn.Module):
    """Single-resolution registration subnetwork.

    Two stride-2 convolutions encode the input pair to quarter resolution,
    residual blocks refine, and a transposed convolution plus an output
    convolution decode the residual displacement. The raw output is squashed
    through a softsign and scaled so a single level cannot displace content
    beyond a fraction of its own extent.
    """

    def __init__(
        self,
        in_channels: int,
        filters: int,
        dims: int,
        n_blocks: int,
        latent_dim: int | None,
        range_flow: float,
    ):
        super().__init__()
        conv_nd = _CONV_ND[dims]
        convt_nd = _CONVT_ND[dims]
        self.dims = dims
        self.range_flow = range_flow
        self.enc1 = conv_nd(in_channels, filters, 3, stride=2, padding=1)
        self.enc2 = conv_nd(filters, filters, 3, stride=2, padding=1)
        self.blocks = nn.ModuleList(
            ConditionalBlock(filters, dims, latent_dim) for _ in range(n_blocks)
        )
        self.up = convt_nd(filters, filters, kernel_size=4, stride=4)
        self.head = conv_nd(filters, dims, 3, padding=1)

    def forward(self, x: torch.Tensor, codes: Sequence) -> torch.Tensor:
        h = F.leaky_relu(self.enc1(x), LEAKY_SLOPE)
        h = self.enc2(h)
        for block, code in zip(self.blocks, codes):
            h = block(h, code)
        h = F.leaky_relu(self.up(h), LEAKY_SLOPE)
        raw = self.head(h)
        cap = self.range_flow * min(x.shape[2:]) / 2.0
        return F.softsign(raw) * cap


class ConditionalRegNet(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        cond = config.conditioning
        latent = config.latent_dim if cond in ("cir_dm", "cir_cm") else None
        in_channels = 3 if cond == "concat" else 2
        self.level_nets = nn.ModuleList(
            LevelNet(
                in_channels,
                config.conv_filters,
                config.dims,
                config.blocks_per_level,
                latent,
                config.range_flow,
            )
            for _ in range(config.levels)
        )
        if cond == "cir_dm":
            # one mapping network per residual block, never shared
            self.mappings = nn.ModuleList(
                nn.ModuleList(
                    MappingNetwork(config.latent_dim, config.mapping_layers)
                    for _ in range(config.blocks_per_level)
                )
                for _ in range(config.levels)
            )
        elif cond == "cir_cm":
            self.mappings = MappingNetwork(config.latent_dim, config.mapping_layers)
        else:
            self.mappings = None

    # -- input handling ----------------------------------------------------

    def _as_tensor(self, obj) -> torch.Tensor:
        if isinstance(obj, Image):
            obj = obj.values
        dtype = next(self.parameters()).dtype
        if isinstance(obj, torch.Tensor):
            return obj.to(dtype)
        return torch.as_tensor(obj, dtype=dtype)

    def _check_shapes(self, fixed: torch.Tensor, moving: torch.Tensor, levels: int):
        if fixed.shape != moving.shape:
            raise GridMismatchError(
                f"fixed {tuple(fixed.shape)} and moving {tuple(moving.shape)} "
                "must share a grid"
            )
        if fixed.ndim != self.config.dims:
            raise GridMismatchError(
                f"model built for {self.config.dims}-dimensional images, "
                f"got {fixed.ndim} axes"
            )
        # level 1 runs at 1/2**(levels-1) scale and its encoder divides by
        # another factor of 4, which the transposed convolution must undo
        # exactly
        divisor = 2 ** (levels + 1)
        for n in fixed.shape:
            if n % divisor != 0:
                raise GridMismatchError(
                    f"every axis must be divisible by {divisor} for a "
                    f"{levels}-level model, got shape {tuple(fixed.shape)}"
                )

    def _codes_for_level(self, level_idx: int, lam: torch.Tensor | None):
        n = self.config.blocks_per_level
        cond = self.config.conditioning
        if cond == "cir_dm":
            return [self.mappings[level_idx][b](lam) for b in range(n)]
        if cond == "cir_cm":
            code = self.mappings(lam)
            return [code] * n
        return [None] * n

    # -- inference ----------------------------------------------------------

    def forward(
        self,
        fixed,
        moving,
        lambda_norm: float | None = None,
        levels: int | None = None,
    ):
        """Estimate the displacement field taking ``moving`` onto ``fixed``.

        ``lambda_norm`` is the regularization weight rescaled to [0, 1].
        ``levels`` truncates the pyramid for progressive training; the
        default runs all of them. Returns the field at the finest level run
        together with the per-level fields, each at its own resolution.
        """
        cfg = self.config
        total = cfg.levels
        if levels is None:
            levels = total
        if not (1 <= levels <= total):
            raise ConfigError(f"levels must be in [1, {total}], got {levels}")

        fixed = self._as_tensor(fixed)
        moving = self._as_tensor(moving)
        self._check_shapes(fixed, moving, total)

        if cfg.conditioning == "fixed":
            lam = None
        else:
            if lambda_norm is None:
                raise RangeError("this model variant requires lambda_norm")
            if not (0.0 <= lambda_norm <= 1.0):
                raise RangeError(
                    f"normalized lambda must lie in [0, 1], got {lambda_norm}"
                )
            lam = torch.tensor([float(lambda_norm)], dtype=fixed.dtype)

        # image pyramid, index 0 = coarsest level that will be run
        f_pyr = [fixed]
        m_pyr = [moving]
        for _ in range(total - 1):
            f_pyr.insert(0, downsample2(f_pyr[0], cfg.dims))
            m_pyr.insert(0, downsample2(m_pyr[0], cfg.dims))

        flow = None
        level_fields = []
        for idx in range(levels):
            f_l = f_pyr[idx]
            m_l = m_pyr[idx]
            if flow is None:
                warped = m_l
            else:
                flow = upsample_flow(flow)
                warped = warp_tensor(m_l.unsqueeze(0), flow)[0]
            parts = [f_l.unsqueeze(0), warped.unsqueeze(0)]
            if cfg.conditioning == "concat":
                parts.append(torch.full_like(parts[0], float(lambda_norm)))
            x = torch.cat(parts, dim=0).unsqueeze(0)
            codes = self._codes_for_level(idx, lam)
            residual = self.level_nets[idx](x, codes)[0]
            flow = residual if flow is None else flow + residual
            level_fields.append(flow)
        return flow, level_fields

    # -- bookkeeping ---------------------------------------------------------

    def conditioning_parameters(self):
        """Parameters that exist only to route the weight into the features."""
        params = []
        if self.mappings is not None:
            params.extend(self.mappings.parameters())
        for module in self.modules():
            if isinstance(module, ConditionalInstanceNorm):
                params.extend(module.proj.parameters())
        return params

    def parameter_count(self) -> dict:
        total = sum(p.numel() for p in self.parameters())
        conditioning = sum(p.numel() for p in self.conditioning_parameters())
        return {
            "total": total,
            "conditioning": conditioning,
            "trunk": total - conditioning,
        }


def build_variant(config: ModelConfig) -> ConditionalRegNet:
    return ConditionalRegNet(config)
