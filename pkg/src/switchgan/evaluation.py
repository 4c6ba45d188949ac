"""Evaluation: translation accuracy over target domains, Fréchet distance
between embedded image sets, intensity sweeps, and a small trainable
classifier that doubles as the feature embedder.

Targets are partial attribute assignments. A one-hot task uses one target
per class; a multi-hot task uses one target per (attribute, value) pair,
resolved against each source image's own label, and scores only the asserted
attributes.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
import torch
import torch.nn as nn

from .attributes import (AttributeSchema, IntensityVector, LabelMode, LabelVector,
                         validate_label)
from .data import SampleRecord, batch_to_tensor, to_uint8
from .errors import (DimensionMismatch, GateDisabled, InsufficientSamples,
                     NumericalFailure, RangeError, SchemaViolation)
from .generator import Generator
from .nn_blocks import ResidualBlock, init_parameters


@dataclass(frozen=True)
class TargetSpec:
    """A partial assignment of attribute bits, e.g. smile:=1."""

    assignments: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "assignments",
                           tuple((int(i), int(v)) for i, v in self.assignments))
        if not self.assignments:
            raise SchemaViolation("a target must assert at least one attribute")

    def name(self, schema: AttributeSchema) -> str:
        return ",".join(f"{schema.names[i]}={v}" for i, v in self.assignments)

    def resolve(self, schema: AttributeSchema, source: LabelVector) -> LabelVector:
        """Target label for one source image: the source bits with the
        assignments applied (one-hot mode: the asserted class alone)."""
        if schema.mode is LabelMode.ONE_HOT:
            hot = [i for i, v in self.assignments if v == 1]
            if len(hot) != 1 or len(self.assignments) != 1:
                raise SchemaViolation("one-hot target must assert exactly one class")
            return LabelVector.one_hot(hot[0], schema.n)
        bits = list(source.bits)
        for i, v in self.assignments:
            bits[i] = v
        label = LabelVector.of(bits)
        return validate_label(schema, label, require_nonzero=True)

    def try_resolve(self, schema: AttributeSchema,
                    source: LabelVector) -> LabelVector | None:
        """Like resolve, but returns None when clearing an attribute would
        leave no active bit at all (the generator cannot express that)."""
        try:
            return self.resolve(schema, source)
        except SchemaViolation:
            return None

    def scored_indices(self) -> list[int]:
        return [i for i, _ in self.assignments]


def single_attribute_targets(schema: AttributeSchema) -> list[TargetSpec]:
    """Every single-attribute target: one per class (one-hot) or one per
    (attribute, value) pair (multi-hot)."""
    if schema.mode is LabelMode.ONE_HOT:
        return [TargetSpec(((i, 1),)) for i in range(schema.n)]
    out = []
    for i in range(schema.n):
        for v in (1, 0):
            out.append(TargetSpec(((i, v),)))
    return out


@dataclass
class EvalReport:
    accuracy: dict[str, float]
    mean_accuracy: float
    fid: dict[str, float]
    mean_fid: float
    baseline_fid: dict[str, float]
    counts: dict[str, int]
    config_digest: str

    def to_json_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "mean_accuracy": self.mean_accuracy,
            "fid": self.fid,
            "mean_fid": self.mean_fid,
            "baseline_fid": self.baseline_fid,
            "counts": self.counts,
            "config_digest": self.config_digest,
        }


def _translate_records(generator: Generator, records: Sequence[SampleRecord],
                       target: TargetSpec, schema: AttributeSchema,
                       batch_size: int = 64,
                       alpha: IntensityVector | None = None
                       ) -> tuple[np.ndarray, list[SampleRecord], list[LabelVector]]:
    """Translate every record whose target resolves (clearing a source's only
    attribute cannot be expressed and is skipped); returns the uint8 images,
    the kept records, and the resolved labels."""
    kept: list[SampleRecord] = []
    resolved: list[LabelVector] = []
    for rec in records:
        label = target.try_resolve(schema, rec.label)
        if label is not None:
            kept.append(rec)
            resolved.append(label)
    outs = []
    with torch.no_grad():
        for start in range(0, len(kept), batch_size):
            chunk = kept[start:start + batch_size]
            labels = resolved[start:start + batch_size]
            x = batch_to_tensor(np.stack([r.image for r in chunk]))
            outs.append(to_uint8(generator.translate(x, labels, alpha)))
    images = np.concatenate(outs) if outs else np.empty((0,), dtype=np.uint8)
    return images, kept, resolved


def translation_accuracy(generator: Generator, records: Sequence[SampleRecord],
                         targets: Sequence[TargetSpec], classifier,
                         schema: AttributeSchema,
                         batch_size: int = 64) -> tuple[dict[str, float], float, int]:
    """Translate every test image to every target at full intensity and score
    the classifier's decision on the targeted attributes.

    Returns (per-target accuracy, mean accuracy, total classified images).
    """
    per_target: dict[str, float] = {}
    total = 0
    for target in targets:
        translated, kept, resolved = _translate_records(generator, records, target,
                                                        schema, batch_size)
        if not kept:
            continue
        predicted = classifier.predict_bits(translated)
        total += len(translated)
        hits = 0
        for want, bits in zip(resolved, predicted):
            if schema.mode is LabelMode.ONE_HOT:
                hits += int(np.argmax(bits) == np.argmax(want.as_array()))
            else:
                hits += int(all(bits[i] == want.bits[i]
                                for i in target.scored_indices()))
        per_target[target.name(schema)] = hits / len(kept)
    mean = float(np.mean(list(per_target.values())))
    return per_target, mean, total


@dataclass(frozen=True)
class FeatureMoments:
    mean: np.ndarray
    cov: np.ndarray

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def feature_moments(images: np.ndarray, embedder: Callable[[np.ndarray], np.ndarray],
                    batch_size: int = 128) -> FeatureMoments:
    """Sample mean and unbiased covariance of embedded images."""
    if len(images) < 2:
        raise InsufficientSamples(f"need at least 2 images, got {len(images)}")
    feats = np.concatenate([np.asarray(embedder(images[i:i + batch_size]),
                                       dtype=np.float64)
                            for i in range(0, len(images), batch_size)])
    mean = feats.mean(axis=0)
    cov = np.cov(feats, rowvar=False)
    cov = np.atleast_2d(cov)
    cov = (cov + cov.T) / 2.0
    return FeatureMoments(mean=mean, cov=cov)


def _psd_sqrt_trace_of_product(cov1: np.ndarray, cov2: np.ndarray) -> float:
    """Tr((cov1 cov2)^(1/2)) via eigendecomposition of the symmetrized
    product sqrt(cov1) cov2 sqrt(cov1); tiny negative eigenvalues from
    round-off are clamped to zero."""
    def clamped_eigh(mat):
        try:
            vals, vecs = np.linalg.eigh(mat)
        except np.linalg.LinAlgError as e:
            raise NumericalFailure(f"eigendecomposition failed: {e}") from e
        trace = float(np.trace(mat))
        floor = -1e-8 * max(abs(trace), 1.0)
        if vals.min() < floor:
            raise NumericalFailure(
                f"matrix is not numerically PSD: min eigenvalue {vals.min():.3e}")
        return np.clip(vals, 0.0, None), vecs

    vals1, vecs1 = clamped_eigh(cov1)
    root1 = (vecs1 * np.sqrt(vals1)) @ vecs1.T
    inner = root1 @ cov2 @ root1
    inner = (inner + inner.T) / 2.0
    vals2, _ = clamped_eigh(inner)
    return float(np.sqrt(vals2).sum())


def fid(m1: FeatureMoments, m2: FeatureMoments) -> float:
    """Fréchet (Wasserstein-2) distance between Gaussian fits:
    ||mu1-mu2||^2 + Tr(C1 + C2 - 2 (C1 C2)^(1/2))."""
    if m1.dim != m2.dim:
        raise DimensionMismatch(f"feature dims differ: {m1.dim} vs {m2.dim}")
    delta = m1.mean - m2.mean
    value = float(delta @ delta)
    value += float(np.trace(m1.cov) + np.trace(m2.cov))
    value -= 2.0 * _psd_sqrt_trace_of_product(m1.cov, m2.cov)
    return value


def fid_protocol(generator: Generator, records: Sequence[SampleRecord],
                 targets: Sequence[TargetSpec],
                 real_by_target: Mapping[str, np.ndarray],
                 embedder: Callable[[np.ndarray], np.ndarray],
                 schema: AttributeSchema,
                 batch_size: int = 64) -> tuple[dict[str, float], float, dict[str, float]]:
    """Per-target FID of translated images against real images of the target
    domain, the mean over targets, and the source-set baseline FID."""
    per_target: dict[str, float] = {}
    baseline: dict[str, float] = {}
    source_images = np.stack([r.image for r in records])
    source_moments = feature_moments(source_images, embedder)
    for target in targets:
        name = target.name(schema)
        real = real_by_target[name]
        if len(real) < 2:
            raise InsufficientSamples(f"target {name} has {len(real)} real images")
        real_moments = feature_moments(real, embedder)
        translated, _, _ = _translate_records(generator, records, target, schema,
                                              batch_size)
        per_target[name] = fid(feature_moments(translated, embedder), real_moments)
        baseline[name] = fid(source_moments, real_moments)
    mean = float(np.mean(list(per_target.values())))
    return per_target, mean, baseline


def intensity_sweep(generator: Generator, image: np.ndarray, label: LabelVector,
                    alphas: Sequence[IntensityVector],
                    schema: AttributeSchema | None = None) -> tuple[np.ndarray, list[dict]]:
    """Row-major grid: the input, the content image, then one translation per
    intensity vector. Returns (grid image, per-cell metadata)."""
    if schema is not None:
        validate_label(schema, label, require_nonzero=True)
    x = batch_to_tensor(image[None])[0]
    cells = [to_uint8(x)]
    meta = [{"cell": "input"}]
    with torch.no_grad():
        cells.append(to_uint8(generator.content_image(x)))
        meta.append({"cell": "content"})
        for alpha in alphas:
            cells.append(to_uint8(generator.translate(x, label, alpha)))
            meta.append({"cell": "translate", "label": list(label.bits),
                         "alpha": list(alpha.alphas)})
    return np.concatenate(cells, axis=1), meta


@dataclass(frozen=True)
class ClassifierConfig:
    image_size: int = 32
    base_channels: int = 32
    n_downsamples: int = 2
    n_res_blocks: int = 2
    steps: int = 2000
    batch_size: int = 64
    lr: float = 1e-3
    seed: int = 0
    heldout_fraction: float = 0.1

    def __post_init__(self) -> None:
        if self.steps < 1 or self.batch_size < 1:
            raise RangeError("steps and batch_size must be >= 1")


class SmallClassifier(nn.Module):
    """Compact residual CNN: per-attribute logits plus a pooled feature
    embedding used for Fréchet distance computation."""

    def __init__(self, config: ClassifierConfig, schema: AttributeSchema,
                 seed: int = 0):
        super().__init__()
        self.config = config
        self.schema = schema
        c = config.base_channels
        layers: list[nn.Module] = [
            nn.Conv2d(3, c, 3, 1, 1), nn.InstanceNorm2d(c, affine=True), nn.ReLU(True)]
        for _ in range(config.n_downsamples):
            layers += [nn.Conv2d(c, c * 2, 4, 2, 1),
                       nn.InstanceNorm2d(c * 2, affine=True), nn.ReLU(True)]
            c *= 2
        layers += [ResidualBlock(c) for _ in range(config.n_res_blocks)]
        self.features_net = nn.Sequential(*layers)
        self.head = nn.Linear(c, schema.n)
        self.feature_dim = c
        init_parameters(self, np.random.default_rng(seed))
        self.heldout_accuracy: float | None = None

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.features_net(x).mean(dim=(2, 3)))

    def _tensor(self, images: np.ndarray) -> torch.Tensor:
        return batch_to_tensor(np.asarray(images))

    def predict_bits(self, images: np.ndarray) -> np.ndarray:
        with torch.no_grad():
            logits = self(self._tensor(images))
        if self.schema.mode is LabelMode.ONE_HOT:
            idx = logits.argmax(dim=1).numpy()
            bits = np.zeros((len(images), self.schema.n), dtype=np.int64)
            bits[np.arange(len(images)), idx] = 1
            return bits
        return (torch.sigmoid(logits) > 0.5).numpy().astype(np.int64)

    def embed(self, images: np.ndarray) -> np.ndarray:
        with torch.no_grad():
            feats = self.features_net(self._tensor(images)).mean(dim=(2, 3))
        return feats.numpy()


class PixelEmbedder:
    """Deterministic fallback embedder: images area-downsampled to 8x8 and
    flattened."""

    def __call__(self, images: np.ndarray) -> np.ndarray:
        x = batch_to_tensor(np.asarray(images))
        pooled = torch.nn.functional.adaptive_avg_pool2d(x, (8, 8))
        return pooled.flatten(1).numpy()


def train_small_classifier(records: Sequence[SampleRecord], schema: AttributeSchema,
                           config: ClassifierConfig | None = None) -> SmallClassifier:
    """Train the compact classifier with a held-out split; deterministic for
    a given config seed."""
    if config is None:
        config = ClassifierConfig(image_size=records[0].image.shape[0])
    rng = np.random.default_rng(config.seed)
    clf = SmallClassifier(config, schema, seed=config.seed)
    opt = torch.optim.Adam(clf.parameters(), lr=config.lr)
    images = np.stack([r.image for r in records])
    bits = np.stack([np.asarray(r.label.bits, dtype=np.float32) for r in records])

    order = rng.permutation(len(records))
    n_held = max(1, int(len(records) * config.heldout_fraction))
    held, trainset = order[:n_held], order[n_held:]
    if len(trainset) == 0:
        raise InsufficientSamples("no training samples left after the held-out split")

    for _ in range(config.steps):
        idx = trainset[rng.integers(0, len(trainset), size=config.batch_size)]
        x = batch_to_tensor(images[idx], augment=True, rng=rng)
        y = torch.from_numpy(bits[idx])
        logits = clf(x)
        if schema.mode is LabelMode.ONE_HOT:
            loss = nn.functional.cross_entropy(logits, y.argmax(dim=1))
        else:
            loss = nn.functional.binary_cross_entropy_with_logits(logits, y)
        opt.zero_grad(set_to_none=True)
        loss.backward()
        opt.step()

    preds = clf.predict_bits(images[held])
    truth = bits[held].astype(np.int64)
    if schema.mode is LabelMode.ONE_HOT:
        acc = float((preds.argmax(axis=1) == truth.argmax(axis=1)).mean())
    else:
        acc = float((preds == truth).all(axis=1).mean())
    clf.heldout_accuracy = acc
    return clf


def evaluate(generator: Generator, records: Sequence[SampleRecord],
             targets: Sequence[TargetSpec], classifier,
             real_by_target: Mapping[str, np.ndarray],
             embedder: Callable[[np.ndarray], np.ndarray],
             schema: AttributeSchema, config_info: dict | None = None) -> EvalReport:
    """Full metric pass: accuracy per target plus FID per target."""
    acc, mean_acc, total = translation_accuracy(generator, records, targets,
                                                classifier, schema)
    fids, mean_fid, baseline = fid_protocol(generator, records, targets,
                                            real_by_target, embedder, schema)
    digest = hashlib.sha256(
        json.dumps(config_info or {}, sort_keys=True).encode()).hexdigest()[:16]
    return EvalReport(
        accuracy=acc, mean_accuracy=mean_acc, fid=fids, mean_fid=mean_fid,
        baseline_fid=baseline,
        counts={"test_images": len(records), "targets": len(targets),
                "classified_images": total},
        config_digest=digest)


def real_images_by_target(records: Sequence[SampleRecord],
                          targets: Sequence[TargetSpec],
                          schema: AttributeSchema) -> dict[str, np.ndarray]:
    """Group real images by conformance to each target's assignments."""
    out: dict[str, np.ndarray] = {}
    for target in targets:
        keep = []
        for rec in records:
            if schema.mode is LabelMode.ONE_HOT:
                want = target.resolve(schema, rec.label)
                if rec.label == want:
                    keep.append(rec.image)
            else:
                if all(rec.label.bits[i] == v for i, v in target.assignments):
                    keep.append(rec.image)
        out[target.name(schema)] = np.stack(keep) if keep else np.empty((0,))
    return out
