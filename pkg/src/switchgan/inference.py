"""Shared translation pipeline for the CLI and the HTTP service.

Both front ends resolve attribute assignments against the checkpoint's
embedded schema and run the exact same preprocessing, generator call, and
resizing, so their outputs are identical bit for bit.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Mapping

import numpy as np
import torch
from PIL import Image

from .attributes import (AttributeSchema, IntensityVector, LabelVector,
                         validate_label)
from .errors import GateDisabled, SchemaViolation
from .data import preprocess, to_uint8
from .generator import Generator, GeneratorConfig
from .training import load_checkpoint


@dataclass
class ModelBundle:
    generator: Generator
    schema: AttributeSchema
    gen_config: GeneratorConfig
    checkpoint_digest: str

    @property
    def native_size(self) -> int:
        return self.gen_config.image_size

    @property
    def gate_enabled(self) -> bool:
        return self.gen_config.gate_enabled


def load_model_bundle(path) -> ModelBundle:
    state = load_checkpoint(path)
    state.generator.eval()
    with open(path, "rb") as fh:
        digest = hashlib.sha256(fh.read()).hexdigest()
    return ModelBundle(generator=state.generator, schema=state.schema,
                       gen_config=state.gen_config, checkpoint_digest=digest)


def resolve_assignment(schema: AttributeSchema, set_map: Mapping[str, int],
                       alpha_map: Mapping[str, float],
                       source_map: Mapping[str, int] | None = None
                       ) -> tuple[LabelVector, IntensityVector]:
    """Resolve name -> value maps into a full label and intensity vector.

    Unset attribute bits default to the source label's bit when one is given,
    else to 0; unset intensities default to 1. The resolved label must be
    valid and non-zero.
    """
    bits = [0] * schema.n
    if source_map:
        for name, value in source_map.items():
            bits[schema.index_of(name)] = int(value)
    for name, value in set_map.items():
        if int(value) not in (0, 1):
            raise SchemaViolation(f"attribute {name!r} must be set to 0 or 1")
        bits[schema.index_of(name)] = int(value)
    alphas = [1.0] * schema.n
    for name, value in alpha_map.items():
        idx = schema.index_of(name)
        value = float(value)
        if not 0.0 <= value <= 1.0:
            raise SchemaViolation(f"intensity for {name!r} must lie in [0, 1], "
                                  f"got {value}", code="alpha_range")
        alphas[idx] = value
    label = validate_label(schema, LabelVector.of(bits), require_nonzero=True)
    return label, IntensityVector.of(alphas)


def _run_pipeline(bundle: ModelBundle, image: Image.Image, forward) -> Image.Image:
    src = np.asarray(image.convert("RGB"))
    x = preprocess(src, bundle.native_size)
    with torch.no_grad():
        out = forward(x)
    result = Image.fromarray(to_uint8(out))
    if result.size != image.size:
        result = result.resize(image.size, Image.BILINEAR)
    return result


def translate_image(bundle: ModelBundle, image: Image.Image, label: LabelVector,
                    alpha: IntensityVector) -> Image.Image:
    """Translate a PIL image; the output is resized back to the input size."""
    return _run_pipeline(bundle, image,
                         lambda x: bundle.generator.translate(x, label, alpha))


def content_image(bundle: ModelBundle, image: Image.Image) -> Image.Image:
    """Attribute-free content rendering (gated checkpoints only)."""
    if not bundle.gate_enabled:
        raise GateDisabled("this checkpoint was trained without the gate module")
    return _run_pipeline(bundle, image, bundle.generator.content_image)
