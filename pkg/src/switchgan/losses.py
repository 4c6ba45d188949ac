"""Training objectives: adversarial terms (Wasserstein and hinge variants),
the domain-aware gradient penalty, reconstruction, classification, feature
matching, conditional feature matching, and the weighted totals.

Every function takes plain callables and tensors so test doubles can stand in
for the discriminator. L1 norms are mean-reduced (per-element average), which
keeps the loss weights resolution-independent; expectations are batch means.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Mapping, Sequence

import numpy as np
import torch
import torch.nn.functional as F

from .attributes import LabelMode
from .errors import MissingTerm, ShapeMismatch

ScoreFn = Callable[[torch.Tensor, torch.Tensor], torch.Tensor]


class AdvVariant(str, Enum):
    WGAN_GP = "wgan_gp"
    HINGE_GP = "hinge_gp"


@dataclass(frozen=True)
class LossWeights:
    lambda_cyc: float = 10.0
    lambda_self: float = 10.0
    lambda_c: float = 2.0
    lambda_cfm: float = 1.0
    lambda_fm: float = 0.0
    gp_coeff: float = 10.0
    adv_variant: AdvVariant = AdvVariant.HINGE_GP
    fm_layer_count: int = 4

    def __post_init__(self) -> None:
        object.__setattr__(self, "adv_variant", AdvVariant(self.adv_variant))
        for name in ("lambda_cyc", "lambda_self", "lambda_c", "lambda_cfm",
                     "lambda_fm", "gp_coeff"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be a finite non-negative real, got {v}")
        if self.fm_layer_count < 1:
            raise ValueError("fm_layer_count must be >= 1")

    @classmethod
    def one_hot_defaults(cls, **kw) -> "LossWeights":
        return cls(lambda_cyc=5.0, lambda_self=5.0, lambda_c=1.0, lambda_cfm=1.0, **kw)

    @classmethod
    def multi_hot_defaults(cls, **kw) -> "LossWeights":
        return cls(lambda_cyc=10.0, lambda_self=10.0, lambda_c=2.0, lambda_cfm=1.0, **kw)

    @classmethod
    def defaults_for(cls, mode: LabelMode, **kw) -> "LossWeights":
        if LabelMode(mode) is LabelMode.ONE_HOT:
            return cls.one_hot_defaults(**kw)
        return cls.multi_hot_defaults(**kw)

    def with_(self, **kw) -> "LossWeights":
        return replace(self, **kw)

    def to_json_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["adv_variant"] = self.adv_variant.value
        return d

    @classmethod
    def from_json_dict(cls, obj: dict) -> "LossWeights":
        return cls(**{k: obj[k] for k in cls.__dataclass_fields__})


def gradient_penalty(d_score: ScoreFn, x_real: torch.Tensor, x_fake: torch.Tensor,
                     c_trg, rng: np.random.Generator) -> torch.Tensor:
    """Unit-gradient-norm penalty on per-sample random interpolates.

    Each interpolate mixes a real and a fake image with u ~ Uniform[0, 1];
    the score is conditioned on the target label. Returns the bare penalty;
    the caller applies its coefficient.
    """
    if x_real.shape != x_fake.shape:
        raise ShapeMismatch(
            f"real {tuple(x_real.shape)} and fake {tuple(x_fake.shape)} shapes differ")
    b = x_real.shape[0]
    u = torch.as_tensor(rng.uniform(size=b), dtype=x_real.dtype, device=x_real.device)
    u = u.view(b, *([1] * (x_real.dim() - 1)))
    x_hat = (u * x_real.detach() + (1.0 - u) * x_fake.detach()).requires_grad_(True)
    scores = d_score(x_hat, c_trg)
    grads = torch.autograd.grad(scores.sum(), x_hat, create_graph=True)[0]
    norms = grads.flatten(1).norm(2, dim=1)
    return ((norms - 1.0) ** 2).mean()


def adv_d_loss(d_score: ScoreFn, x_real: torch.Tensor, c_org,
               x_fake: torch.Tensor, c_trg, weights: LossWeights,
               rng: np.random.Generator) -> tuple[torch.Tensor, torch.Tensor]:
    """Discriminator adversarial objective, gradient penalty included.

    WGAN_GP: E[D(fake)] - E[D(real)] + gp_coeff * GP. HINGE_GP replaces the
    main term with hinge margins. Returns (loss, bare penalty value).
    """
    d_real = d_score(x_real, c_org)
    if x_fake.requires_grad:
        x_fake = x_fake.detach()
    d_fake = d_score(x_fake, c_trg)
    if weights.adv_variant is AdvVariant.WGAN_GP:
        main = d_fake.mean() - d_real.mean()
    else:
        main = F.relu(1.0 - d_real).mean() + F.relu(1.0 + d_fake).mean()
    if weights.gp_coeff != 0.0:
        gp = gradient_penalty(d_score, x_real, x_fake, c_trg, rng)
    else:
        gp = torch.zeros((), dtype=x_real.dtype, device=x_real.device)
    return main + weights.gp_coeff * gp, gp


def adv_g_loss(d_score: ScoreFn, x_fake: torch.Tensor, c_trg) -> torch.Tensor:
    """Generator adversarial objective: negated mean realness of the fakes
    under their target labels (same form for both variants)."""
    return -d_score(x_fake, c_trg).mean()


def reconstruction_loss(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Mean absolute difference between two images (cycle and
    self-reconstruction both use this)."""
    if a.shape != b.shape:
        raise ShapeMismatch(f"shapes {tuple(a.shape)} and {tuple(b.shape)} differ")
    return (a - b).abs().mean()


def classification_loss(logits: torch.Tensor, target, mode: LabelMode) -> torch.Tensor:
    """Attribute classification: softmax cross-entropy against the hot index
    in one-hot mode, mean per-attribute sigmoid BCE in multi-hot mode."""
    from .generator import _as_bits_tensor

    if logits.dim() == 1:
        logits = logits.unsqueeze(0)
    bits = _as_bits_tensor(target, logits.shape[1], logits.shape[0],
                           logits.dtype, logits.device)
    if LabelMode(mode) is LabelMode.ONE_HOT:
        if not torch.all(bits.sum(dim=1) == 1):
            from .errors import SchemaViolation

            raise SchemaViolation("one-hot classification target must have exactly one bit")
        return F.cross_entropy(logits, bits.argmax(dim=1))
    return F.binary_cross_entropy_with_logits(logits, bits)


def fm_loss(trunk_features: Callable[[torch.Tensor], Sequence[torch.Tensor]],
            x: torch.Tensor, x_cycle: torch.Tensor, layer_count: int) -> torch.Tensor:
    """Multi-scale feature matching: for each of the first ``layer_count``
    trunk layers, L1 between the globally average-pooled feature vectors of
    the original and its cycle reconstruction, summed over layers."""
    feats_a = trunk_features(x)
    feats_b = trunk_features(x_cycle)
    if layer_count > len(feats_a):
        raise ShapeMismatch(
            f"requested {layer_count} feature layers, trunk has {len(feats_a)}")
    total = None
    for fa, fb in zip(feats_a[:layer_count], feats_b[:layer_count]):
        pa = fa.mean(dim=(2, 3))
        pb = fb.mean(dim=(2, 3))
        term = (pa - pb).abs().mean()
        total = term if total is None else total + term
    return total


def cfm_loss(adversary_features: Callable[[torch.Tensor, torch.Tensor], torch.Tensor],
             x: torch.Tensor, x_cycle: torch.Tensor, c_org) -> torch.Tensor:
    """Conditional feature matching: L1 between the switched adversary-head
    features of the original and its cycle reconstruction, both under the
    original label."""
    fa = adversary_features(x, c_org)
    fb = adversary_features(x_cycle, c_org)
    return (fa - fb).abs().mean()


_G_TERMS = (("cyc", "lambda_cyc"), ("self", "lambda_self"), ("cls_fake", "lambda_c"),
            ("cfm", "lambda_cfm"), ("fm", "lambda_fm"))


def total_g_loss(parts: Mapping[str, torch.Tensor], weights: LossWeights) -> torch.Tensor:
    """Weighted generator objective. Terms with a zero weight are skipped
    entirely; a non-zero weight whose part is missing raises MissingTerm."""
    if "adv_g" not in parts:
        raise MissingTerm("adv_g")
    total = parts["adv_g"]
    for key, weight_name in _G_TERMS:
        lam = getattr(weights, weight_name)
        if lam == 0.0:
            continue
        if key not in parts:
            raise MissingTerm(key)
        total = total + lam * parts[key]
    return total


def total_d_loss(parts: Mapping[str, torch.Tensor], weights: LossWeights) -> torch.Tensor:
    """Weighted discriminator objective: adversarial term (penalty included)
    plus the classification term on real images."""
    if "adv_d" not in parts:
        raise MissingTerm("adv_d")
    total = parts["adv_d"]
    if weights.lambda_c != 0.0:
        if "cls_real" not in parts:
            raise MissingTerm("cls_real")
        total = total + weights.lambda_c * parts["cls_real"]
    return total
