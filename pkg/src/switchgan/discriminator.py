"""Conditional discriminator: shared trunk, attribute classifier head, and
parallel adversary heads fused by the feature switch.

The trunk downsamples the image; the classifier head scores every attribute
without any label input, while the adversary heads give one realness patch
map per attribute. The label bits select which heads count, so an image is
only judged against the real samples of its own domains.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from .attributes import LabelMode, LabelVector
from .errors import SchemaViolation, ShapeMismatch
from .nn_blocks import init_parameters
from .switching import feature_switch


@dataclass(frozen=True)
class DiscriminatorConfig:
    image_size: int = 32
    image_channels: int = 3
    n_branches: int = 3
    base_channels: int = 32
    n_trunk_layers: int = 4
    adv_head_layers: int = 1
    cls_mode: LabelMode = LabelMode.MULTI_HOT

    def __post_init__(self) -> None:
        object.__setattr__(self, "cls_mode", LabelMode(self.cls_mode))
        if self.image_size % (2 ** self.n_trunk_layers) != 0:
            raise ShapeMismatch(
                f"image_size {self.image_size} not divisible by 2^{self.n_trunk_layers}")
        for name in ("image_size", "image_channels", "n_branches", "base_channels",
                     "n_trunk_layers", "adv_head_layers"):
            if getattr(self, name) < 1:
                raise ShapeMismatch(f"{name} must be >= 1")

    @property
    def trunk_channels(self) -> int:
        return self.base_channels * (2 ** (self.n_trunk_layers - 1))

    @property
    def trunk_size(self) -> int:
        return self.image_size // (2 ** self.n_trunk_layers)

    @classmethod
    def desk_scale(cls, n_branches: int, cls_mode=LabelMode.MULTI_HOT, **kw):
        kw = {"image_size": 32, "base_channels": 32, "n_trunk_layers": 4, **kw}
        return cls(n_branches=n_branches, cls_mode=cls_mode, **kw)

    @classmethod
    def paper_scale(cls, n_branches: int, cls_mode=LabelMode.MULTI_HOT, **kw):
        kw = {"image_size": 128, "base_channels": 64, "n_trunk_layers": 6, **kw}
        return cls(n_branches=n_branches, cls_mode=cls_mode, **kw)

    def to_json_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["cls_mode"] = self.cls_mode.value
        return d

    @classmethod
    def from_json_dict(cls, obj: dict) -> "DiscriminatorConfig":
        return cls(**{k: obj[k] for k in cls.__dataclass_fields__})


class AdversaryHead(nn.Module):
    """Per-attribute realness head: feature convs, then a 1x1 prediction
    layer producing a one-channel patch map. ``features`` is the penultimate
    activation used by the conditional feature matching loss."""

    def __init__(self, channels: int, n_layers: int):
        super().__init__()
        blocks: list[nn.Module] = []
        for _ in range(n_layers):
            blocks += [nn.Conv2d(channels, channels, 3, 1, 1), nn.LeakyReLU(0.01)]
        self.feature_net = nn.Sequential(*blocks)
        self.predict = nn.Conv2d(channels, 1, 1, 1, 0)

    def features(self, h: torch.Tensor) -> torch.Tensor:
        return self.feature_net(h)

    def forward(self, h: torch.Tensor) -> torch.Tensor:
        return self.predict(self.feature_net(h))


class Discriminator(nn.Module):
    """Shared trunk with a classification head and switched adversary heads.

    The trunk uses strided convolutions with leaky ReLU and no normalization
    (gradient-penalty training must not couple samples through batch
    statistics).
    """

    def __init__(self, config: DiscriminatorConfig, seed: int = 0,
                 dtype: torch.dtype = torch.float32):
        super().__init__()
        self.config = config
        blocks = []
        c_in = config.image_channels
        c_out = config.base_channels
        for _ in range(config.n_trunk_layers):
            blocks.append(nn.Sequential(nn.Conv2d(c_in, c_out, 4, 2, 1), nn.LeakyReLU(0.01)))
            c_in, c_out = c_out, c_out * 2
        self.trunk = nn.ModuleList(blocks)
        if config.cls_mode is LabelMode.ONE_HOT:
            # one conv spanning the whole remaining spatial extent
            self.cls_head = nn.Conv2d(config.trunk_channels, config.n_branches,
                                      config.trunk_size, 1, 0)
        else:
            self.cls_head = nn.Conv2d(config.trunk_channels, config.n_branches, 1, 1, 0)
        self.adv_heads = nn.ModuleList(
            AdversaryHead(config.trunk_channels, config.adv_head_layers)
            for _ in range(config.n_branches))
        init_parameters(self, np.random.default_rng(seed))
        if dtype is not torch.float32:
            self.to(dtype)

    def _check_input(self, x: torch.Tensor) -> tuple[torch.Tensor, bool]:
        single = x.dim() == 3
        if single:
            x = x.unsqueeze(0)
        c = self.config
        if x.dim() != 4 or x.shape[1:] != (c.image_channels, c.image_size, c.image_size):
            raise ShapeMismatch(
                f"input shape {tuple(x.shape)} does not match configured "
                f"({c.image_channels}, {c.image_size}, {c.image_size})")
        return x, single

    def _bits(self, label, batch: int, dtype, device, allow_zero: bool) -> torch.Tensor:
        from .generator import _as_bits_tensor  # shared coercion rules

        bits = _as_bits_tensor(label, self.config.n_branches, batch, dtype, device)
        if not allow_zero and (bits.sum(dim=1) == 0).any():
            raise SchemaViolation("adversary label must have at least one non-zero bit")
        return bits

    def trunk_features(self, x: torch.Tensor) -> list[torch.Tensor]:
        """Every trunk layer's output, shallow to deep; the last entry feeds
        both heads."""
        x, _ = self._check_input(x)
        feats = []
        h = x
        for block in self.trunk:
            h = block(h)
            feats.append(h)
        return feats

    def trunk_out(self, x: torch.Tensor) -> torch.Tensor:
        """Final trunk activation only (cheaper entry point for callers that
        evaluate several heads on one input)."""
        x, _ = self._check_input(x)
        h = x
        for block in self.trunk:
            h = block(h)
        return h

    def classify_from(self, h: torch.Tensor) -> torch.Tensor:
        logits = self.cls_head(h)
        if self.config.cls_mode is LabelMode.MULTI_HOT:
            return logits.mean(dim=(2, 3))
        return logits.flatten(1)

    def classify(self, x: torch.Tensor) -> torch.Tensor:
        """Per-attribute logits; takes no label."""
        x, single = self._check_input(x)
        logits = self.classify_from(self.trunk_out(x))
        return logits.squeeze(0) if single else logits

    def _switched_heads(self, h: torch.Tensor, bits: torch.Tensor,
                        features_only: bool) -> torch.Tensor:
        """Fuse head outputs under the label switch, running only the heads
        whose gate column is not entirely zero."""
        outputs = []
        for i, head in enumerate(self.adv_heads):
            if torch.count_nonzero(bits[:, i]) == 0:
                outputs.append(None)
            else:
                outputs.append(head.features(h) if features_only else head(h))
        shape = next((o.shape for o in outputs if o is not None), None)
        if shape is None:
            b = h.shape[0]
            hs = self.config.trunk_size
            c = self.config.trunk_channels if features_only else 1
            return h.new_zeros((b, c, hs, hs))
        filled = [o if o is not None else h.new_zeros(shape) for o in outputs]
        return feature_switch(filled, bits)

    def adversary_score_from(self, h: torch.Tensor, label,
                             allow_zero: bool = True) -> torch.Tensor:
        bits = self._bits(label, h.shape[0], h.dtype, h.device, allow_zero)
        fused = self._switched_heads(h, bits, features_only=False)
        return fused.mean(dim=(1, 2, 3))

    def adversary_score_batch(self, x: torch.Tensor, label,
                              allow_zero: bool = True) -> torch.Tensor:
        """Per-sample realness: label-switched sum of head patch maps,
        spatially averaged. A zero label row scores exactly zero (no head is
        selected), which the loss layer relies on for unlabeled samples."""
        x, _ = self._check_input(x)
        return self.adversary_score_from(self.trunk_out(x), label, allow_zero)

    def adversary_score(self, x: torch.Tensor, label) -> torch.Tensor:
        """Scalar realness score under a non-zero label."""
        x, single = self._check_input(x)
        scores = self.adversary_score_batch(x, label, allow_zero=False)
        return scores.squeeze(0) if single else scores

    def adversary_features_from(self, h: torch.Tensor, label,
                                allow_zero: bool = True) -> torch.Tensor:
        bits = self._bits(label, h.shape[0], h.dtype, h.device, allow_zero)
        return self._switched_heads(h, bits, features_only=True)

    def adversary_features(self, x: torch.Tensor, label) -> torch.Tensor:
        """Label-switched fusion of the heads' penultimate activations."""
        x, single = self._check_input(x)
        bits = self._bits(label, x.shape[0], x.dtype, x.device, allow_zero=False)
        fused = self._switched_heads(self.trunk_out(x), bits, features_only=True)
        return fused.squeeze(0) if single else fused

    def adversary_features_batch(self, x: torch.Tensor, label) -> torch.Tensor:
        """Batched feature fusion that tolerates zero label rows (their fused
        features are exactly zero)."""
        x, _ = self._check_input(x)
        return self.adversary_features_from(self.trunk_out(x), label, allow_zero=True)
