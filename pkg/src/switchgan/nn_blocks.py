"""Shared convolutional building blocks and weight initialization."""

from __future__ import annotations

import numpy as np
import torch
import torch.nn as nn


class ResidualBlock(nn.Module):
    """3x3 conv - IN - ReLU - 3x3 conv - IN, with an identity skip."""

    def __init__(self, channels: int):
        super().__init__()
        self.body = nn.Sequential(
            nn.Conv2d(channels, channels, 3, 1, 1),
            nn.InstanceNorm2d(channels, affine=True),
            nn.ReLU(inplace=True),
            nn.Conv2d(channels, channels, 3, 1, 1),
            nn.InstanceNorm2d(channels, affine=True),
        )

    def forward(self, x):
        return x + self.body(x)


class Encoder(nn.Module):
    """Image to latent map: 7x7 stem, strided downsampling, residual tail."""

    def __init__(self, in_channels: int, base_channels: int,
                 n_downsamples: int, n_res_blocks: int):
        super().__init__()
        layers: list[nn.Module] = [
            nn.Conv2d(in_channels, base_channels, 7, 1, 3),
            nn.InstanceNorm2d(base_channels, affine=True),
            nn.ReLU(inplace=True),
        ]
        c = base_channels
        for _ in range(n_downsamples):
            layers += [
                nn.Conv2d(c, c * 2, 4, 2, 1),
                nn.InstanceNorm2d(c * 2, affine=True),
                nn.ReLU(inplace=True),
            ]
            c *= 2
        layers += [ResidualBlock(c) for _ in range(n_res_blocks)]
        self.net = nn.Sequential(*layers)
        self.out_channels = c

    def forward(self, x):
        return self.net(x)


class Decoder(nn.Module):
    """Latent map to image: residual blocks, nearest-upsample convs, tanh."""

    def __init__(self, latent_channels: int, image_channels: int,
                 n_upsamples: int, n_res_blocks: int):
        super().__init__()
        layers: list[nn.Module] = [ResidualBlock(latent_channels) for _ in range(n_res_blocks)]
        c = latent_channels
        for _ in range(n_upsamples):
            layers += [
                nn.Upsample(scale_factor=2, mode="nearest"),
                nn.Conv2d(c, c // 2, 5, 1, 2),
                nn.InstanceNorm2d(c // 2, affine=True),
                nn.ReLU(inplace=True),
            ]
            c //= 2
        layers += [nn.Conv2d(c, image_channels, 7, 1, 3), nn.Tanh()]
        self.net = nn.Sequential(*layers)

    def forward(self, x):
        return self.net(x)


def init_parameters(module: nn.Module, rng: np.random.Generator, std: float = 0.02) -> None:
    """Seeded init: conv/linear weights ~ N(0, std^2), biases zero,
    normalization affine parameters at identity."""
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.Linear)):
            with torch.no_grad():
                w = rng.normal(0.0, std, size=tuple(m.weight.shape))
                m.weight.copy_(torch.from_numpy(w).to(m.weight.dtype))
                if m.bias is not None:
                    m.bias.zero_()
        elif isinstance(m, nn.InstanceNorm2d) and m.affine:
            with torch.no_grad():
                m.weight.fill_(1.0)
                m.bias.zero_()
