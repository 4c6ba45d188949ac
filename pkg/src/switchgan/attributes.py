"""Attribute schemas, binary label vectors, and intensity vectors.

The attribute vocabulary is shared by every other module: datasets carry
labels under a schema, the generator and discriminator read label bits as
branch switches, and intensity vectors scale those switches at test time.
Everything here is a plain value type; random sampling takes a caller-owned
``numpy.random.Generator``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyBatch, LengthMismatch, SchemaViolation


class LabelMode(str, Enum):
    """How label bits relate to each other.

    ONE_HOT labels name mutually exclusive classes (exactly one bit set);
    MULTI_HOT labels are independently combinable attributes.
    """

    ONE_HOT = "one_hot"
    MULTI_HOT = "multi_hot"


@dataclass(frozen=True)
class AttributeSchema:
    """Names and combination rules for the attribute set.

    ``exclusivity_groups`` lists index sets in which at most one attribute
    may be active (e.g. contradictory hair colours). In ONE_HOT mode the
    whole index set implicitly forms a single exactly-one group, so explicit
    groups are rejected there.
    """

    names: tuple[str, ...]
    mode: LabelMode = LabelMode.MULTI_HOT
    exclusivity_groups: tuple[tuple[int, ...], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "mode", LabelMode(self.mode))
        object.__setattr__(
            self, "exclusivity_groups",
            tuple(tuple(int(i) for i in g) for g in self.exclusivity_groups))
        if len(self.names) < 1:
            raise SchemaViolation("schema needs at least one attribute")
        if len(set(self.names)) != len(self.names) or any(not n for n in self.names):
            raise SchemaViolation("attribute names must be distinct and non-empty")
        if self.mode is LabelMode.ONE_HOT and self.exclusivity_groups:
            raise SchemaViolation("one-hot mode already implies a single exclusivity group")
        seen: set[int] = set()
        for group in self.exclusivity_groups:
            for idx in group:
                if not 0 <= idx < self.n:
                    raise SchemaViolation(f"exclusivity index {idx} out of range for n={self.n}")
                if idx in seen:
                    raise SchemaViolation(f"attribute index {idx} appears in more than one group")
                seen.add(idx)

    @property
    def n(self) -> int:
        return len(self.names)

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise SchemaViolation(
                f"unknown attribute {name!r}; valid attributes: {', '.join(self.names)}"
            ) from None

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "names": list(self.names),
            "mode": self.mode.value,
            "exclusivity_groups": [list(g) for g in self.exclusivity_groups],
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "AttributeSchema":
        schema = cls(
            names=tuple(obj["names"]),
            mode=LabelMode(obj["mode"]),
            exclusivity_groups=tuple(tuple(g) for g in obj.get("exclusivity_groups", [])),
        )
        if "n" in obj and int(obj["n"]) != schema.n:
            raise SchemaViolation(f"schema n={obj['n']} disagrees with {schema.n} names")
        return schema


@dataclass(frozen=True)
class LabelVector:
    """A binary attribute switch vector."""

    bits: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "bits", tuple(int(b) for b in self.bits))
        if any(b not in (0, 1) for b in self.bits):
            raise SchemaViolation(f"label bits must be 0 or 1, got {self.bits}")

    @classmethod
    def of(cls, bits: Iterable[int]) -> "LabelVector":
        return cls(tuple(bits))

    @classmethod
    def one_hot(cls, index: int, n: int) -> "LabelVector":
        return cls(tuple(1 if i == index else 0 for i in range(n)))

    def __len__(self) -> int:
        return len(self.bits)

    def __iter__(self):
        return iter(self.bits)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.bits, dtype=np.float64)

    @property
    def is_zero(self) -> bool:
        return not any(self.bits)


@dataclass(frozen=True)
class IntensityVector:
    """Per-attribute translation intensities in [0, 1]."""

    alphas: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        for a in self.alphas:
            if not 0.0 <= a <= 1.0:
                raise SchemaViolation(f"intensity {a} outside [0, 1]")

    @classmethod
    def of(cls, alphas: Iterable[float]) -> "IntensityVector":
        return cls(tuple(alphas))

    @classmethod
    def ones(cls, n: int) -> "IntensityVector":
        return cls((1.0,) * n)

    @classmethod
    def zeros(cls, n: int) -> "IntensityVector":
        return cls((0.0,) * n)

    def __len__(self) -> int:
        return len(self.alphas)

    def __iter__(self):
        return iter(self.alphas)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.alphas, dtype=np.float64)


def validate_label(schema: AttributeSchema, label: LabelVector,
                   require_nonzero: bool = False) -> LabelVector:
    """Check ``label`` against the schema and return it unchanged.

    Raises SchemaViolation on wrong length, a one-hot vector without exactly
    one bit, more than one active bit in an exclusivity group, or an all-zero
    vector when ``require_nonzero`` is set.
    """
    if len(label) != schema.n:
        raise SchemaViolation(f"label length {len(label)} != schema n {schema.n}")
    total = sum(label.bits)
    if schema.mode is LabelMode.ONE_HOT:
        if total != 1:
            raise SchemaViolation(f"one-hot label must have exactly one bit set, got {label.bits}")
    else:
        for group in schema.exclusivity_groups:
            if sum(label.bits[i] for i in group) > 1:
                raise SchemaViolation(
                    f"attributes {[schema.names[i] for i in group]} are mutually exclusive")
        if require_nonzero and total == 0:
            raise SchemaViolation("label must have at least one non-zero bit",
                                  code="label_zero")
    return label


def sample_target_labels(schema: AttributeSchema,
                         batch_org_labels: Sequence[LabelVector],
                         rng: np.random.Generator) -> list[LabelVector]:
    """Draw random translation targets for a batch of original labels.

    ONE_HOT: each target is drawn uniformly over the n classes, independently
    per sample. MULTI_HOT: targets are a uniformly random permutation of the
    batch's own labels, which keeps targets on the real label manifold; any
    all-zero target is repaired by setting one uniformly chosen bit (a single
    bit cannot violate an at-most-one exclusivity group). Every returned
    label passes ``validate_label(..., require_nonzero=True)``.
    """
    if len(batch_org_labels) == 0:
        raise EmptyBatch("cannot sample targets for an empty batch")
    for label in batch_org_labels:
        validate_label(schema, label)
    if schema.mode is LabelMode.ONE_HOT:
        classes = rng.integers(0, schema.n, size=len(batch_org_labels))
        targets = [LabelVector.one_hot(int(k), schema.n) for k in classes]
    else:
        order = rng.permutation(len(batch_org_labels))
        targets = []
        for src in order:
            label = batch_org_labels[int(src)]
            if label.is_zero:
                forced = int(rng.integers(0, schema.n))
                label = LabelVector.one_hot(forced, schema.n)
            targets.append(label)
    for t in targets:
        validate_label(schema, t, require_nonzero=True)
    return targets


def effective_gate(label: LabelVector, alpha: IntensityVector) -> np.ndarray:
    """Per-branch fusion coefficients: entry i is ``alpha_i * bit_i``."""
    if len(label) != len(alpha):
        raise LengthMismatch(f"label length {len(label)} != alpha length {len(alpha)}")
    return label.as_array() * alpha.as_array()
