"""Shared domain types: volumes, segment maps, schemas, subject records.

All types are immutable after construction (numpy buffers are frozen via
the writeable flag) and therefore safe to share across worker threads.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .errors import PairingError, ValidationError

MIN_EDGE = 8  # smallest usable height/width in pixels

_NAME_RE = re.compile(r"^[a-z][a-z0-9_]*$")


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Volume:
    """A frames x height x width grayscale raster, the unit of classification."""

    id: str
    pixels: np.ndarray  # uint8, shape (frames, height, width)

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.dtype != np.uint8:
            raise ValidationError(f"volume {self.id!r}: pixels must be uint8, got {px.dtype}")
        if px.ndim != 3:
            raise ValidationError(f"volume {self.id!r}: pixels must be 3-D, got {px.ndim}-D")
        frames, height, width = px.shape
        if frames < 1:
            raise ValidationError(f"volume {self.id!r}: needs at least 1 frame")
        if height < MIN_EDGE or width < MIN_EDGE:
            raise ValidationError(
                f"volume {self.id!r}: height and width must be >= {MIN_EDGE}, got {height}x{width}"
            )
        object.__setattr__(self, "pixels", _freeze(px))

    @property
    def frames(self) -> int:
        return self.pixels.shape[0]

    @property
    def height(self) -> int:
        return self.pixels.shape[1]

    @property
    def width(self) -> int:
        return self.pixels.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.pixels.shape


@dataclass(frozen=True)
class SegmentMap:
    """Per-pixel structure labels for a volume of identical dims; 0 = background."""

    id: str
    labels: np.ndarray  # uint8, shape (frames, height, width)

    def __post_init__(self):
        lab = np.asarray(self.labels)
        if lab.dtype != np.uint8:
            raise ValidationError(f"segmap {self.id!r}: labels must be uint8, got {lab.dtype}")
        if lab.ndim != 3:
            raise ValidationError(f"segmap {self.id!r}: labels must be 3-D, got {lab.ndim}-D")
        frames, height, width = lab.shape
        if frames < 1 or height < MIN_EDGE or width < MIN_EDGE:
            raise ValidationError(f"segmap {self.id!r}: bad dims {lab.shape}")
        object.__setattr__(self, "labels", _freeze(lab))

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.labels.shape

    def present_labels(self) -> set[int]:
        return {int(v) for v in np.unique(self.labels) if v != 0}

    def validate_against(self, schema: "SegmentSchema") -> None:
        unknown = self.present_labels() - set(schema.label_ids())
        if unknown:
            ident = ", ".join(f"label {v}" for v in sorted(unknown))
            raise ValidationError(f"segmap {self.id!r}: unknown {ident}")


def ensure_paired(volume: Volume, segmap: SegmentMap) -> None:
    """Every volume/segment-map pairing must agree on dims; never silent."""
    if volume.shape != segmap.shape:
        raise PairingError(
            f"volume {volume.id!r} {volume.shape} does not match segmap {segmap.id!r} {segmap.shape}"
        )


@dataclass(frozen=True)
class SegmentSchema:
    """Ordered (label id, name) pairs naming the morphological structures."""

    entries: tuple[tuple[int, str], ...]

    def __post_init__(self):
        entries = tuple((int(i), str(n)) for i, n in self.entries)
        if not entries:
            raise ValidationError("schema must declare at least one label")
        ids = [i for i, _ in entries]
        names = [n for _, n in entries]
        if ids != list(range(1, len(ids) + 1)):
            raise ValidationError(f"label ids must be contiguous from 1, got {ids}")
        if len(set(names)) != len(names):
            raise ValidationError("label names must be distinct")
        for n in names:
            if not _NAME_RE.match(n):
                raise ValidationError(f"label name {n!r} is not lowercase snake_case")
        object.__setattr__(self, "entries", entries)

    def label_ids(self) -> list[int]:
        return [i for i, _ in self.entries]

    def name_of(self, label_id: int) -> str:
        for i, n in self.entries:
            if i == label_id:
                return n
        raise ValidationError(f"label {label_id} not in schema")

    def id_of(self, name: str) -> int:
        for i, n in self.entries:
            if n == name:
                return i
        raise ValidationError(f"name {name!r} not in schema")

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class SegmentSelection:
    """A nonempty subset of schema labels chosen for replacement."""

    labels: frozenset[int]

    def __post_init__(self):
        labels = frozenset(int(v) for v in self.labels)
        if not labels:
            raise ValidationError("segment selection must be nonempty")
        if any(v < 1 for v in labels):
            raise ValidationError(f"segment selection has invalid ids: {sorted(labels)}")
        object.__setattr__(self, "labels", labels)

    def validate_against(self, schema: SegmentSchema) -> None:
        unknown = self.labels - set(schema.label_ids())
        if unknown:
            raise ValidationError(f"selection labels {sorted(unknown)} not in schema")

    @property
    def bitmask(self) -> int:
        return sum(1 << (v - 1) for v in self.labels)

    def sorted_labels(self) -> list[int]:
        return sorted(self.labels)

    def names(self, schema: SegmentSchema) -> list[str]:
        return [schema.name_of(v) for v in self.sorted_labels()]


def combinations(schema: SegmentSchema) -> list[SegmentSelection]:
    """All nonempty label subsets, ordered by ascending bitmask.

    Label 1 is the least-significant bit, so the first selection is {1}
    and the last is the full label set. Deterministic by construction.
    """
    ids = schema.label_ids()
    out = []
    for mask in range(1, 1 << len(ids)):
        labels = frozenset(ids[b] for b in range(len(ids)) if mask & (1 << b))
        out.append(SegmentSelection(labels))
    return out


def label_from_probability(probability: float) -> int:
    """Prediction tie rule: label 1 iff probability > 0.5, a tie maps to 0."""
    return 1 if probability > 0.5 else 0


@dataclass(frozen=True)
class SubjectRecord:
    """Subject id + demographics + cached prediction, the unit of cohort filtering."""

    id: str
    demographics: dict = field(default_factory=dict)
    predicted_label: int = 0
    probability: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.probability <= 1.0:
            raise ValidationError(
                f"subject {self.id!r}: probability {self.probability} outside [0, 1]"
            )
        expected = label_from_probability(self.probability)
        if self.predicted_label != expected:
            raise ValidationError(
                f"subject {self.id!r}: predicted_label {self.predicted_label} "
                f"inconsistent with probability {self.probability}"
            )

    def value(self, variable: str):
        """Demographic value or None when missing."""
        v = self.demographics.get(variable)
        if v is None:
            return None
        if isinstance(v, float) and np.isnan(v):
            return None
        return v
