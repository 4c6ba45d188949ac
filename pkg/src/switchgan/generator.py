"""The translation generator: parallel attribute encoders, an optional shared
(content) encoder, and a single decoder.

Every attribute has its own encoder branch; the label bits select which
branches contribute, and the intensity vector scales each selected branch.
With the gate enabled, a shared encoder adds an attribute-free content path,
so an all-zero gate decodes to a pure content image.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch
import torch.nn as nn

from .attributes import IntensityVector, LabelVector
from .errors import GateDisabled, SchemaViolation, ShapeMismatch
from .nn_blocks import Decoder, Encoder, init_parameters
from .switching import FeatureBank


@dataclass(frozen=True)
class GeneratorConfig:
    image_size: int = 32
    image_channels: int = 3
    n_branches: int = 3
    base_channels: int = 32
    n_downsamples: int = 2
    n_res_blocks_encoder: int = 2
    n_res_blocks_decoder: int = 3
    gate_enabled: bool = True

    def __post_init__(self) -> None:
        if self.image_size % (2 ** self.n_downsamples) != 0:
            raise ShapeMismatch(
                f"image_size {self.image_size} not divisible by 2^{self.n_downsamples}")
        for name in ("image_size", "image_channels", "n_branches", "base_channels",
                     "n_downsamples"):
            if getattr(self, name) < 1:
                raise ShapeMismatch(f"{name} must be >= 1")
        if self.n_res_blocks_encoder < 0 or self.n_res_blocks_decoder < 0:
            raise ShapeMismatch("residual block counts must be >= 0")
        if self.n_branches > 16:
            warnings.warn(
                f"{self.n_branches} encoder branches: parameter count grows linearly "
                "with the attribute count", stacklevel=2)

    @property
    def latent_channels(self) -> int:
        return self.base_channels * (2 ** self.n_downsamples)

    @property
    def latent_size(self) -> int:
        return self.image_size // (2 ** self.n_downsamples)

    @classmethod
    def desk_scale(cls, n_branches: int, gate_enabled: bool = True, **kw) -> "GeneratorConfig":
        kw = {"image_size": 32, "base_channels": 32, **kw}
        return cls(n_branches=n_branches, gate_enabled=gate_enabled, **kw)

    @classmethod
    def paper_scale(cls, n_branches: int, gate_enabled: bool = True, **kw) -> "GeneratorConfig":
        kw = {"image_size": 128, "base_channels": 64, **kw}
        return cls(n_branches=n_branches, gate_enabled=gate_enabled, **kw)

    def to_json_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_json_dict(cls, obj: dict) -> "GeneratorConfig":
        return cls(**{k: obj[k] for k in cls.__dataclass_fields__})


def _as_bits_tensor(label, n: int, batch: int, dtype, device) -> torch.Tensor:
    """Normalize label input to a (batch, n) float tensor of bits."""
    if isinstance(label, LabelVector):
        arr = label.as_array()[None, :].repeat(batch, axis=0)
    elif isinstance(label, torch.Tensor):
        arr = label.detach().cpu().numpy().astype(np.float64)
    else:
        seq = list(label)
        if seq and isinstance(seq[0], LabelVector):
            arr = np.stack([l.as_array() for l in seq])
        else:
            arr = np.asarray(seq, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :].repeat(batch, axis=0)
    if arr.shape != (batch, n):
        raise SchemaViolation(f"labels have shape {arr.shape}, expected ({batch}, {n})")
    if not np.isin(arr, (0.0, 1.0)).all():
        raise SchemaViolation("label bits must be 0 or 1")
    return torch.as_tensor(arr, dtype=dtype, device=device)


def _as_alpha_array(alpha, n: int) -> np.ndarray:
    if alpha is None:
        return np.ones(n)
    if isinstance(alpha, IntensityVector):
        arr = alpha.as_array()
    else:
        arr = np.asarray(list(alpha), dtype=np.float64)
    if arr.shape != (n,):
        raise SchemaViolation(f"alpha has shape {arr.shape}, expected ({n},)")
    if (arr < 0).any() or (arr > 1).any():
        raise SchemaViolation("intensities must lie in [0, 1]")
    return arr


class Generator(nn.Module):
    """Attribute-switched encoder bank + optional shared encoder + decoder."""

    def __init__(self, config: GeneratorConfig, seed: int = 0,
                 dtype: torch.dtype = torch.float32):
        super().__init__()
        self.config = config
        self.branches = nn.ModuleList(
            Encoder(config.image_channels, config.base_channels,
                    config.n_downsamples, config.n_res_blocks_encoder)
            for _ in range(config.n_branches))
        self.shared = (
            Encoder(config.image_channels, config.base_channels,
                    config.n_downsamples, config.n_res_blocks_encoder)
            if config.gate_enabled else None)
        self.decoder = Decoder(config.latent_channels, config.image_channels,
                               config.n_downsamples, config.n_res_blocks_decoder)
        init_parameters(self, np.random.default_rng(seed))
        if dtype is not torch.float32:
            self.to(dtype)
        self._dtype = dtype

    @property
    def gate_enabled(self) -> bool:
        return self.config.gate_enabled

    def _check_input(self, x: torch.Tensor) -> tuple[torch.Tensor, bool]:
        single = x.dim() == 3
        if single:
            x = x.unsqueeze(0)
        if x.dim() != 4:
            raise ShapeMismatch(f"expected an image tensor, got {x.dim()}-d")
        c = self.config
        if x.shape[1:] != (c.image_channels, c.image_size, c.image_size):
            raise ShapeMismatch(
                f"input shape {tuple(x.shape[1:])} does not match configured "
                f"({c.image_channels}, {c.image_size}, {c.image_size})")
        return x, single

    def encode_attributes(self, x: torch.Tensor) -> FeatureBank:
        """Run every attribute encoder; returns the full branch bank."""
        x, _ = self._check_input(x)
        return FeatureBank([branch(x) for branch in self.branches])

    def content_features(self, x: torch.Tensor) -> torch.Tensor:
        if self.shared is None:
            raise GateDisabled("this generator was built without the gate module")
        x, _ = self._check_input(x)
        return self.shared(x)

    def _fused_latent(self, x: torch.Tensor, gate: torch.Tensor) -> torch.Tensor:
        """Shared-encoder output plus the switched branch sum.

        Branches whose gate column is entirely zero are never run; the fused
        sum accumulates in ascending branch order.
        """
        total = self.shared(x) if self.shared is not None else None
        for i, branch in enumerate(self.branches):
            coeff = gate[:, i]
            if torch.count_nonzero(coeff) == 0:
                continue
            term = branch(x) * coeff.view(-1, 1, 1, 1)
            total = term if total is None else total + term
        if total is None:
            b = x.shape[0]
            c = self.config
            total = x.new_zeros((b, c.latent_channels, c.latent_size, c.latent_size))
        return total

    def translate(self, x: torch.Tensor, label, alpha=None) -> torch.Tensor:
        """Decode the gated fusion of branch features for the target label.

        ``label`` is a LabelVector (applied to every sample), a sequence of
        LabelVectors, or a (batch, n) bit array; every row must have at least
        one active bit. ``alpha`` defaults to all-ones, the training-time
        setting; fractional entries scale the selected branches.
        """
        x, single = self._check_input(x)
        n = self.config.n_branches
        bits = _as_bits_tensor(label, n, x.shape[0], x.dtype, x.device)
        if (bits.sum(dim=1) == 0).any():
            raise SchemaViolation("translation label must have at least one non-zero bit")
        alpha_arr = _as_alpha_array(alpha, n)
        gate = bits * torch.as_tensor(alpha_arr, dtype=x.dtype, device=x.device)
        out = self.decoder(self._fused_latent(x, gate))
        return out.squeeze(0) if single else out

    def content_image(self, x: torch.Tensor) -> torch.Tensor:
        """Decode the shared encoder alone: the attribute-free rendering."""
        if self.shared is None:
            raise GateDisabled("content image requires the gate module")
        x, single = self._check_input(x)
        out = self.decoder(self.shared(x))
        return out.squeeze(0) if single else out

    def cycle(self, x: torch.Tensor, c_trg, c_org) -> torch.Tensor:
        """Translate to the target label and back to the original label."""
        return self.translate(self.translate(x, c_trg), c_org)

    def forward(self, x, label, alpha=None):
        return self.translate(x, label, alpha)
