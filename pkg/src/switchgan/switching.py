"""The feature-switching operation: gate-weighted fusion of parallel branches.

Both the generator (branch encoders) and the discriminator (adversary heads)
fuse their parallel outputs through :func:`feature_switch`. The gate is a
real vector; binary gates select branches, fractional gates blend them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch

from .errors import LengthMismatch, ShapeMismatch


@dataclass
class FeatureBank:
    """Parallel branch outputs with identical shapes."""

    branches: list[torch.Tensor]

    def __post_init__(self) -> None:
        if not self.branches:
            raise ShapeMismatch("feature bank needs at least one branch")
        shape = self.branches[0].shape
        for i, b in enumerate(self.branches):
            if b.shape != shape:
                raise ShapeMismatch(
                    f"branch {i} has shape {tuple(b.shape)}, expected {tuple(shape)}")

    def __len__(self) -> int:
        return len(self.branches)


def _gate_tensor(gate, n: int, dtype: torch.dtype, device: torch.device) -> torch.Tensor:
    if isinstance(gate, torch.Tensor):
        g = gate
    else:
        g = torch.as_tensor(np.asarray(gate, dtype=np.float64))
    if g.dim() not in (1, 2):
        raise ShapeMismatch(f"gate must be a vector or a (batch, n) matrix, got {g.dim()}-d")
    if g.shape[-1] != n:
        raise LengthMismatch(f"gate length {g.shape[-1]} != branch count {n}")
    if g.dtype != dtype:
        g = g.to(dtype)
    if g.device != device:
        g = g.to(device)
    return g


def feature_switch(bank: FeatureBank | Sequence[torch.Tensor], gate) -> torch.Tensor:
    """Fuse parallel branches as the gate-weighted sum over branch index.

    ``gate`` is a length-n vector applied to every sample, or a (batch, n)
    matrix of per-sample coefficients (branches must then carry a leading
    batch dimension). Branches whose coefficients are all exactly zero are
    skipped, which leaves the result unchanged; accumulation runs in
    ascending branch order so results are reproducible bit-for-bit.
    """
    branches = list(bank.branches) if isinstance(bank, FeatureBank) else list(bank)
    if not branches:
        raise ShapeMismatch("feature switch needs at least one branch")
    shape = branches[0].shape
    for i, b in enumerate(branches):
        if b.shape != shape:
            raise ShapeMismatch(f"branch {i} has shape {tuple(b.shape)}, expected {tuple(shape)}")
    g = _gate_tensor(gate, len(branches), branches[0].dtype, branches[0].device)
    if g.dim() == 2 and g.shape[0] != shape[0]:
        raise ShapeMismatch(
            f"per-sample gate has batch {g.shape[0]}, branches have batch {shape[0]}")

    out: torch.Tensor | None = None
    for i, branch in enumerate(branches):
        coeff = g[..., i]
        if not coeff.requires_grad and torch.count_nonzero(coeff.detach()) == 0:
            continue
        if coeff.dim() == 1:
            coeff = coeff.view(-1, *([1] * (branch.dim() - 1)))
        term = branch * coeff
        out = term if out is None else out + term
    if out is None:
        return torch.zeros_like(branches[0])
    return out


@dataclass(frozen=True)
class GradCheckReport:
    """Outcome of a finite-difference gradient comparison."""

    max_rel_error: float
    tolerance: float
    passed: bool


def feature_switch_grad_check(branch_shapes: Sequence[Sequence[int]], gate,
                              step: float = 1e-5, tolerance: float = 1e-4,
                              seed: int = 0) -> GradCheckReport:
    """Compare analytic gradients of a scalar functional of the fused output
    against central finite differences.

    The functional is a fixed random projection of the fused tensor; both the
    branches and the gate are checked in double precision. Intended for small
    shapes only.
    """
    shapes = [tuple(int(d) for d in s) for s in branch_shapes]
    if not shapes or any(s != shapes[0] for s in shapes):
        raise ShapeMismatch("branch shapes must be non-empty and identical")
    rng = np.random.default_rng(seed)
    branches = [
        torch.tensor(rng.normal(size=shapes[0]), dtype=torch.float64, requires_grad=True)
        for _ in shapes
    ]
    gate_t = torch.tensor(np.asarray(gate, dtype=np.float64), requires_grad=True)
    weights = torch.tensor(rng.normal(size=shapes[0]), dtype=torch.float64)

    def functional(bs, g):
        return (feature_switch(bs, g) * weights).sum()

    value = functional(branches, gate_t)
    grads = torch.autograd.grad(value, branches + [gate_t])

    max_rel = 0.0
    leaves = [b.detach().clone() for b in branches] + [gate_t.detach().clone()]
    for leaf_idx, leaf in enumerate(leaves):
        flat = leaf.view(-1)
        analytic = grads[leaf_idx].view(-1)
        for j in range(flat.numel()):
            orig = flat[j].item()
            flat[j] = orig + step
            plus = functional(leaves[:-1], leaves[-1]).item()
            flat[j] = orig - step
            minus = functional(leaves[:-1], leaves[-1]).item()
            flat[j] = orig
            numeric = (plus - minus) / (2 * step)
            denom = max(abs(numeric), abs(analytic[j].item()), 1e-12)
            max_rel = max(max_rel, abs(numeric - analytic[j].item()) / denom)
    return GradCheckReport(max_rel_error=max_rel, tolerance=tolerance,
                           passed=max_rel < tolerance)
