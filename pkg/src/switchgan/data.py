"""Synthetic attribute-faces dataset with a rule-based oracle classifier,
attribute-list ingestion for real images, and preprocessing.

The synthetic family draws a cartoon face on a plain background. Each
attribute owns a spatially disjoint pixel region, so a rule reading that
region recovers the label exactly on clean data:

* ``hair_blond`` — a hair band across the top, blond or black; read back by
  the mean yellowness of the band interior.
* ``glasses`` — dark-rimmed rectangle spectacles around the eyes; read back
  by the dark-pixel density of the eye band.
* ``smile`` — a mouth arc curving up or down; read back by comparing the
  mean row of dark mouth pixels at the arc centre against the corners.

The one-hot task instead varies the background colour over four classes and
is read back by the corner patches.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .attributes import AttributeSchema, LabelMode, LabelVector, validate_label
from .errors import InvalidSpec, MissingImage, ParseError, SchemaViolation

FACES_SCHEMA = AttributeSchema(("hair_blond", "glasses", "smile"), LabelMode.MULTI_HOT)
BACKGROUNDS_SCHEMA = AttributeSchema(("bg_red", "bg_green", "bg_blue", "bg_yellow"),
                                     LabelMode.ONE_HOT)

BG_COLORS = np.array([[200, 64, 64], [64, 180, 84], [72, 92, 208], [228, 216, 88]],
                     dtype=np.float64)

_FACE_BG = (126, 144, 164)
_SKIN = (222, 172, 138)
_BLOND = (236, 204, 88)
_BLACK_HAIR = (26, 22, 18)
_EYE = (32, 28, 26)
_RIM = (28, 26, 30)
_MOUTH = (142, 48, 48)


@dataclass(frozen=True)
class SynthSpec:
    count: int
    image_size: int = 32
    seed: int = 0
    task: str = "faces"  # "faces" (n=3 multi-hot) or "backgrounds" (n=4 one-hot)

    def __post_init__(self) -> None:
        if self.count < 1:
            raise InvalidSpec(f"count must be >= 1, got {self.count}")
        if self.image_size < 16:
            raise InvalidSpec(f"image_size must be >= 16, got {self.image_size}")
        if self.task not in ("faces", "backgrounds"):
            raise InvalidSpec(f"unknown task {self.task!r}")

    @property
    def schema(self) -> AttributeSchema:
        return FACES_SCHEMA if self.task == "faces" else BACKGROUNDS_SCHEMA


@dataclass
class SampleRecord:
    image: np.ndarray  # (H, W, 3) uint8
    label: LabelVector
    id: str


def _luminance(img: np.ndarray) -> np.ndarray:
    f = img.astype(np.float64)
    return 0.299 * f[..., 0] + 0.587 * f[..., 1] + 0.114 * f[..., 2]


def _fill_ellipse(img, cx, cy, rx, ry, color):
    s = img.shape[0]
    ys, xs = np.mgrid[0:s, 0:s]
    mask = ((xs - cx) / rx) ** 2 + ((ys - cy) / ry) ** 2 <= 1.0
    img[mask] = color


def _fill_rect(img, r0, r1, c0, c1, color):
    img[max(r0, 0):r1, max(c0, 0):c1] = color


def _rect_outline(img, r0, r1, c0, c1, thickness, color):
    _fill_rect(img, r0, r0 + thickness, c0, c1, color)
    _fill_rect(img, r1 - thickness, r1, c0, c1, color)
    _fill_rect(img, r0, r1, c0, c0 + thickness, color)
    _fill_rect(img, r0, r1, c1 - thickness, c1, color)


def _draw_mouth_arc(img, s, smile: bool):
    c0, c1 = round(0.35 * s), round(0.65 * s)
    r_end = 0.71 * s
    r_mid = 0.80 * s
    if not smile:
        r_end, r_mid = r_mid, r_end
    cm = (c0 + c1 - 1) / 2.0
    half = (c1 - c0) / 2.0
    th = max(1, round(0.06 * s))
    for c in range(c0, c1):
        t = (c - cm) / half
        r = r_mid + (r_end - r_mid) * t * t
        top = int(round(r - th / 2.0))
        img[max(top, 0):top + th, c] = _MOUTH


def _jitter_color(rng, base, spread):
    delta = rng.integers(-spread, spread + 1, size=3)
    return tuple(int(np.clip(b + d, 0, 255)) for b, d in zip(base, delta))


def render_face(image_size: int, label: LabelVector, rng: np.random.Generator,
                background=None) -> np.ndarray:
    """Draw one cartoon face. Jitter moves the face ellipse and eye dots a
    little but never touches the fixed attribute regions."""
    s = image_size
    img = np.zeros((s, s, 3), dtype=np.uint8)
    img[:] = background if background is not None else _FACE_BG

    jx = rng.uniform(-0.012, 0.012) * s
    jy = rng.uniform(-0.012, 0.012) * s
    rx = (0.33 + rng.uniform(-0.01, 0.01)) * s
    ry = (0.32 + rng.uniform(-0.01, 0.01)) * s
    skin = _jitter_color(rng, _SKIN, 10)
    _fill_ellipse(img, 0.5 * s + jx, 0.56 * s + jy, rx, ry, skin)

    hair_blond, glasses, smile = (label.bits if len(label) == 3 else (0, 0, 0))

    hair = _jitter_color(rng, _BLOND if hair_blond else _BLACK_HAIR, 5)
    _fill_rect(img, round(0.04 * s), round(0.235 * s), round(0.10 * s),
               round(0.90 * s), hair)

    eye_r = max(1, round(0.04 * s))
    for ex in (0.35, 0.65):
        cx = ex * s + rng.uniform(-0.006, 0.006) * s
        cy = 0.455 * s + rng.uniform(-0.006, 0.006) * s
        _fill_ellipse(img, cx, cy, eye_r, eye_r, _EYE)

    if glasses:
        th = max(1, round(0.05 * s))
        r0, r1 = round(0.38 * s), round(0.54 * s)
        _rect_outline(img, r0, r1, round(0.24 * s), round(0.46 * s), th, _RIM)
        _rect_outline(img, r0, r1, round(0.54 * s), round(0.76 * s), th, _RIM)
        mid = round(0.45 * s)
        _fill_rect(img, mid, mid + th, round(0.46 * s), round(0.54 * s), _RIM)

    _draw_mouth_arc(img, s, bool(smile))
    return img


def render_background_sample(image_size: int, class_index: int,
                             rng: np.random.Generator) -> np.ndarray:
    neutral = LabelVector.of([0, 0, 1])
    color = tuple(int(v) for v in BG_COLORS[class_index])
    return render_face(image_size, neutral, rng, background=color)


# classification thresholds; margins on clean data are wide (see tests)
_HAIR_YELLOWNESS_THRESHOLD = 130.0
_GLASSES_DARK_LUMINANCE = 90.0
_GLASSES_DARK_FRACTION = 0.15
_MOUTH_DARK_LUMINANCE = 120.0
_MOUTH_MOMENT_THRESHOLD = 0.25


def _hair_region(s):
    return slice(round(0.07 * s), round(0.20 * s)), slice(round(0.30 * s), round(0.70 * s))


def _glasses_region(s):
    return slice(round(0.37 * s), round(0.55 * s)), slice(round(0.22 * s), round(0.78 * s))


def _glasses_probe_mask(s: int) -> np.ndarray:
    """Boolean mask over the glasses region with the eye-dot disks (plus
    their jitter range) cut out, so bare eyes never count as rim pixels."""
    rs, cs = _glasses_region(s)
    rows = np.arange(rs.start, rs.stop)
    cols = np.arange(cs.start, cs.stop)
    ys, xs = np.meshgrid(rows, cols, indexing="ij")
    keep = np.ones(ys.shape, dtype=bool)
    excl = max(1, round(0.04 * s)) + 0.01 * s + 1.0
    for ex in (0.35, 0.65):
        keep &= (xs - ex * s) ** 2 + (ys - 0.455 * s) ** 2 > excl ** 2
    return keep


def _mouth_region(s):
    return slice(round(0.66 * s), round(0.86 * s)), slice(round(0.32 * s), round(0.68 * s))


def classify_face(image: np.ndarray) -> LabelVector:
    """Rule-based label recovery for the faces task. Total on any input:
    images without the expected structure classify as all-zero."""
    s = image.shape[0]
    f = image.astype(np.float64)

    rs, cs = _hair_region(s)
    band = f[rs, cs]
    yellowness = band[..., 0].mean() + band[..., 1].mean() - 2.0 * band[..., 2].mean()
    hair_blond = int(yellowness > _HAIR_YELLOWNESS_THRESHOLD)

    rs, cs = _glasses_region(s)
    lum = _luminance(image[rs, cs])
    probe = lum[_glasses_probe_mask(s)]
    glasses = int((probe < _GLASSES_DARK_LUMINANCE).mean() > _GLASSES_DARK_FRACTION)

    rs, cs = _mouth_region(s)
    lum = _luminance(image[rs, cs])
    dark_rows, dark_cols = np.nonzero(lum < _MOUTH_DARK_LUMINANCE)
    smile = 0
    if dark_rows.size:
        width = lum.shape[1]
        centre = (dark_cols >= width / 3.0) & (dark_cols < 2.0 * width / 3.0)
        outer = ~centre
        if centre.any() and outer.any():
            # an up-curving arc dips at the centre: centre dark pixels sit
            # lower (larger row index) than the corner pixels
            smile = int(dark_rows[centre].mean() - dark_rows[outer].mean()
                        > _MOUTH_MOMENT_THRESHOLD)
    return LabelVector.of([hair_blond, glasses, smile])


def classify_background(image: np.ndarray) -> LabelVector:
    s = image.shape[0]
    k = max(2, round(0.10 * s))
    corners = np.concatenate([
        image[:k, :k].reshape(-1, 3), image[:k, -k:].reshape(-1, 3),
        image[-k:, :k].reshape(-1, 3), image[-k:, -k:].reshape(-1, 3),
    ]).astype(np.float64)
    mean = corners.mean(axis=0)
    dists = np.linalg.norm(BG_COLORS - mean, axis=1)
    return LabelVector.one_hot(int(np.argmin(dists)), len(BG_COLORS))


def oracle_classify(image: np.ndarray, schema: AttributeSchema) -> LabelVector:
    """Deterministic label reader for the synthetic family."""
    if schema.names == FACES_SCHEMA.names:
        return classify_face(image)
    if schema.names == BACKGROUNDS_SCHEMA.names:
        return classify_background(image)
    raise SchemaViolation(f"no oracle rules for schema {schema.names}")


class OracleClassifier:
    """Batch wrapper around :func:`oracle_classify` matching the evaluation
    classifier interface."""

    def __init__(self, schema: AttributeSchema):
        self.schema = schema

    def predict_bits(self, images: np.ndarray) -> np.ndarray:
        return np.stack([np.asarray(oracle_classify(img, self.schema).bits)
                         for img in images])


def synth_generate(spec: SynthSpec) -> tuple[list[SampleRecord], dict]:
    """Deterministically generate the synthetic dataset for a spec."""
    rng = np.random.default_rng(spec.seed)
    schema = spec.schema
    records = []
    for i in range(spec.count):
        if spec.task == "faces":
            bits = rng.integers(0, 2, size=schema.n)
            label = LabelVector.of(bits)
            img = render_face(spec.image_size, label, rng)
        else:
            k = int(rng.integers(0, schema.n))
            label = LabelVector.one_hot(k, schema.n)
            img = render_background_sample(spec.image_size, k, rng)
        records.append(SampleRecord(image=img, label=label, id=f"synth_{i:06d}"))
    manifest = {
        "schema": schema.to_json_dict(),
        "image_size": spec.image_size,
        "task": spec.task,
        "seed": spec.seed,
        "records": [{"id": r.id, "file": f"images/{r.id}.png",
                     "label": list(r.label.bits)} for r in records],
    }
    return records, manifest


def save_dataset(records: list[SampleRecord], manifest: dict, out_dir) -> None:
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    for rec, entry in zip(records, manifest["records"]):
        Image.fromarray(rec.image).save(out / entry["file"])
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=1)


def load_dataset(data_dir) -> tuple[AttributeSchema, list[SampleRecord], dict]:
    data = Path(data_dir)
    try:
        with open(data / "manifest.json") as fh:
            manifest = json.load(fh)
    except FileNotFoundError as e:
        raise MissingImage(f"no manifest.json under {data}") from e
    schema = AttributeSchema.from_json_dict(manifest["schema"])
    records = []
    for entry in manifest["records"]:
        path = data / entry["file"]
        if not path.exists():
            raise MissingImage(str(path))
        img = np.asarray(Image.open(path).convert("RGB"))
        records.append(SampleRecord(image=img, label=LabelVector.of(entry["label"]),
                                    id=entry["id"]))
    return schema, records, manifest


def load_attribute_list(list_path, image_dir, schema_names) -> list[SampleRecord]:
    """Ingest the standard attribute-list format: a count line, a header of
    attribute names, then one row per image of ``filename ±1 ±1 ...``.
    Keeps only the requested columns, in the requested order; +1 maps to 1
    and -1 to 0."""
    with open(list_path) as fh:
        lines = fh.read().splitlines()
    if len(lines) < 2:
        raise ParseError("attribute list needs a count line and a header line")
    try:
        declared = int(lines[0].strip())
    except ValueError as e:
        raise ParseError(f"bad count line: {lines[0]!r}") from e
    header = lines[1].split()
    columns = []
    for name in schema_names:
        if name not in header:
            raise ParseError(f"attribute {name!r} not in header {header}")
        columns.append(header.index(name))

    rows = [ln for ln in lines[2:] if ln.strip()]
    if len(rows) != declared:
        raise ParseError(f"count line says {declared} rows, found {len(rows)}")
    records = []
    for ln in rows:
        parts = ln.split()
        if len(parts) != len(header) + 1:
            raise ParseError(f"malformed row: {ln!r}")
        fname = parts[0]
        for v in parts[1:]:
            if v not in ("1", "-1"):
                raise ParseError(f"attribute value must be 1 or -1, got {v!r} in {ln!r}")
        bits = [1 if parts[1 + col] == "1" else 0 for col in columns]
        path = os.path.join(image_dir, fname)
        if not os.path.exists(path):
            raise MissingImage(path)
        img = np.asarray(Image.open(path).convert("RGB"))
        records.append(SampleRecord(image=img, label=LabelVector.of(bits), id=fname))
    return records


def preprocess(image: np.ndarray, image_size: int, augment: bool = False,
               rng: np.random.Generator | None = None) -> torch.Tensor:
    """Centre-crop to square, resize bilinearly, scale to [-1, 1], and
    optionally mirror with probability one half."""
    h, w = image.shape[:2]
    side = min(h, w)
    top = (h - side) // 2
    left = (w - side) // 2
    img = image[top:top + side, left:left + side]
    if side != image_size:
        img = np.asarray(Image.fromarray(img).resize((image_size, image_size),
                                                     Image.BILINEAR))
    if augment:
        if rng is None:
            raise ValueError("augment=True needs an rng")
        if rng.random() < 0.5:
            img = img[:, ::-1]
    img = np.ascontiguousarray(img)
    if not img.flags.writeable:
        img = img.copy()
    t = torch.from_numpy(img).to(torch.float32)
    t = t.permute(2, 0, 1) * (2.0 / 255.0) - 1.0
    return t


def to_uint8(t: torch.Tensor) -> np.ndarray:
    """Invert :func:`preprocess` scaling back to (H, W, 3) uint8 pixels."""
    arr = t.detach().cpu()
    if arr.dim() == 4:
        arr = arr.permute(0, 2, 3, 1)
    else:
        arr = arr.permute(1, 2, 0)
    arr = ((arr + 1.0) * (255.0 / 2.0)).round().clamp(0, 255)
    return arr.numpy().astype(np.uint8)


def batch_to_tensor(images: np.ndarray, augment: bool = False,
                    rng: np.random.Generator | None = None) -> torch.Tensor:
    """Fast batched version of :func:`preprocess` for same-size images."""
    imgs = np.ascontiguousarray(images)
    if not imgs.flags.writeable:
        imgs = imgs.copy()
    if augment:
        if rng is None:
            raise ValueError("augment=True needs an rng")
        flips = rng.random(size=len(imgs)) < 0.5
        imgs = imgs.copy()
        imgs[flips] = imgs[flips, :, ::-1]
    t = torch.from_numpy(imgs).to(torch.float32)
    return t.permute(0, 3, 1, 2) * (2.0 / 255.0) - 1.0
