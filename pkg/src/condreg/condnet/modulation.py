"""Conditioning building blocks: mapping networks, conditional instance
normalization, and the pre-activation conditional registration block."""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..errors import ConfigError, RangeError

LEAKY_SLOPE = 0.2
CIN_EPS = 1e-5

_CONV_ND = {2: nn.Conv2d, 3: nn.Conv3d}


class MappingNetwork(nn.Module):
    """MLP mapping a normalized regularization weight to a latent code.

    ``n_layers`` linear layers of constant width; LeakyReLU(0.2) between
    layers, none after the last. Biases start at zero: LeakyReLU is
    positively homogeneous, so the initial code is exactly proportional to
    the input weight. Every coordinate of the code then carries the weight
    from the first step instead of a constant offset, which matters at short
    training budgets; the biases are free to grow and bend the curve later.
    """

    def __init__(self, latent_dim: int = 64, n_layers: int = 4, in_features: int = 1):
        super().__init__()
        if n_layers < 1:
            raise ConfigError("mapping network needs at least one layer")
        layers = []
        width = latent_dim
        prev = in_features
        for i in range(n_layers):
            lin = nn.Linear(prev, width)
            nn.init.zeros_(lin.bias)
            layers.append(lin)
            if i < n_layers - 1:
                layers.append(nn.LeakyReLU(LEAKY_SLOPE))
            prev = width
        self.net = nn.Sequential(*layers)
        self.latent_dim = latent_dim

    def forward(self, lambda_norm: torch.Tensor) -> torch.Tensor:
        return self.net(lambda_norm)


def map_latent(lambda_norm: float, net: MappingNetwork) -> torch.Tensor:
    """Deterministic latent code for a normalized weight in [0, 1]."""
    if not (0.0 <= lambda_norm <= 1.0):
        raise RangeError(
            f"normalized lambda must lie in [0, 1], got {lambda_norm}"
        )
    dtype = next(net.parameters()).dtype
    x = torch.tensor([lambda_norm], dtype=dtype)
    with torch.no_grad():
        return net(x)


def _spatial_stats(h: torch.Tensor):
    # per batch element and channel, over the spatial extent
    reduce_dims = tuple(range(2, h.ndim))
    mu = h.mean(dim=reduce_dims, keepdim=True)
    sigma = h.std(dim=reduce_dims, keepdim=True, unbiased=False)
    return mu, sigma


class ConditionalInstanceNorm(nn.Module):
    """Normalize each channel over space, then rescale with code-driven affine
    parameters. The projection starts at gamma=1, beta=0 so an untrained layer
    behaves as plain instance normalization regardless of the code."""

    def __init__(self, channels: int, latent_dim: int, eps: float = CIN_EPS):
        super().__init__()
        self.channels = channels
        self.eps = eps
        self.proj = nn.Linear(latent_dim, 2 * channels)
        nn.init.zeros_(self.proj.weight)
        with torch.no_grad():
            self.proj.bias[:channels] = 1.0
            self.proj.bias[channels:] = 0.0

    def modulation(self, code: torch.Tensor):
        out = self.proj(code)
        return out[..., : self.channels], out[..., self.channels :]

    def forward(self, h: torch.Tensor, code: torch.Tensor) -> torch.Tensor:
        gamma, beta = self.modulation(code)
        view = (1, self.channels) + (1,) * (h.ndim - 2)
        mu, sigma = _spatial_stats(h)
        normed = (h - mu) / (sigma + self.eps)
        return gamma.view(view) * normed + beta.view(view)


class PlainInstanceNorm(nn.Module):
    """Instance normalization with unconditioned learnable affine parameters.

    Used by the unconditioned model variants so every variant shares the same
    trunk structure; only the source of gamma/beta differs.
    """

    def __init__(self, channels: int, eps: float = CIN_EPS):
        super().__init__()
        self.channels = channels
        self.eps = eps
        self.gamma = nn.Parameter(torch.ones(channels))
        self.beta = nn.Parameter(torch.zeros(channels))

    def forward(self, h: torch.Tensor, code=None) -> torch.Tensor:
        view = (1, self.channels) + (1,) * (h.ndim - 2)
        mu, sigma = _spatial_stats(h)
        normed = (h - mu) / (sigma + self.eps)
        return self.gamma.view(view) * normed + self.beta.view(view)


class ConditionalBlock(nn.Module):
    """Pre-activation residual block: two (norm, LeakyReLU, conv) stages plus
    a skip connection. With all weights zero it is exactly the identity."""

    def __init__(self, channels: int, dims: int, latent_dim: int | None):
        super().__init__()
        conv_nd = _CONV_ND[dims]
        self.channels = channels
        if latent_dim is None:
            self.norm1 = PlainInstanceNorm(channels)
            self.norm2 = PlainInstanceNorm(channels)
        else:
            self.norm1 = ConditionalInstanceNorm(channels, latent_dim)
            self.norm2 = ConditionalInstanceNorm(channels, latent_dim)
        self.conv1 = conv_nd(channels, channels, 3, padding=1, bias=False)
        self.conv2 = conv_nd(channels, channels, 3, padding=1, bias=False)

    def forward(self, x: torch.Tensor, code: torch.Tensor | None = None) -> torch.Tensor:
        if x.shape[1] != self.channels:
            raise ConfigError(
                f"block expects {self.channels} channels, got {x.shape[1]}"
            )
        h = self.norm1(x, code)
        h = F.leaky_relu(h, LEAKY_SLOPE)
        h = self.conv1(h)
        h = self.norm2(h, code)
        h = F.leaky_relu(h, LEAKY_SLOPE)
        h = self.conv2(h)
        return x + h
