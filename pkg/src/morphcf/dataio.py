"""Bit-exact dataset persistence.

File formats (all little-endian, fixed layout):

* volume files:      magic ``MVOL``, version byte 0x01, frames/height/width
                     as unsigned 16-bit, then raw pixels frame-major row-major.
* segment-map files: identical layout with magic ``MSEG``.
* demographics:      UTF-8 CSV with header; columns ``id``, one per declared
                     variable, ``predicted_label``, ``probability``.
* manifest.json:     schema, variable declarations, subject file table and
                     generator constants (documented in the README).

Readers reject trailing bytes: file length must match the header-implied
length exactly. Writes go to a temp path in the same directory and are
renamed into place, so no partial write is ever visible.
"""
from __future__ import annotations

import csv
import hashlib
import json
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import (
    SegmentMap,
    SegmentSchema,
    SubjectRecord,
    Volume,
    ensure_paired,
)
from .errors import (
    BadDimensionsError,
    BadMagicError,
    ManifestError,
    TrailingDataError,
    TruncatedFileError,
    ValidationError,
)

VOLUME_MAGIC = b"MVOL"
SEGMAP_MAGIC = b"MSEG"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<HHH")  # frames, height, width

RESERVED_COLUMNS = ("id", "predicted_label", "probability")


def _write_raster(path, magic: bytes, arr: np.ndarray) -> None:
    frames, height, width = arr.shape
    if max(frames, height, width) > 0xFFFF:
        raise ValidationError(f"dims {arr.shape} exceed the 16-bit file format")
    payload = magic + bytes([FORMAT_VERSION]) + _HEADER.pack(frames, height, width)
    payload += arr.tobytes(order="C")
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(payload)
    os.replace(tmp, path)


def _read_raster(path, magic: bytes) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 4 or data[:4] != magic:
        raise BadMagicError(f"{path}: expected magic {magic.decode()}, got {data[:4]!r}")
    if len(data) < 11:
        raise TruncatedFileError(f"{path}: header truncated at {len(data)} bytes")
    version = data[4]
    if version != FORMAT_VERSION:
        raise BadDimensionsError(f"{path}: unsupported version {version}")
    frames, height, width = _HEADER.unpack_from(data, 5)
    if frames == 0 or height == 0 or width == 0:
        raise BadDimensionsError(f"{path}: zero dimension in header {frames}x{height}x{width}")
    expected = 11 + frames * height * width
    if len(data) < expected:
        raise TruncatedFileError(f"{path}: expected {expected} bytes, got {len(data)}")
    if len(data) > expected:
        raise TrailingDataError(f"{path}: {len(data) - expected} trailing byte(s)")
    return np.frombuffer(data, np.uint8, offset=11).reshape(frames, height, width)


def write_volume(volume: Volume, path) -> None:
    _write_raster(path, VOLUME_MAGIC, volume.pixels)


def read_volume(path, id: str | None = None) -> Volume:
    arr = _read_raster(path, VOLUME_MAGIC)
    return Volume(id=id if id is not None else Path(path).stem, pixels=arr)


def write_segmap(segmap: SegmentMap, path) -> None:
    _write_raster(path, SEGMAP_MAGIC, segmap.labels)


def read_segmap(path, id: str | None = None) -> SegmentMap:
    arr = _read_raster(path, SEGMAP_MAGIC)
    return SegmentMap(id=id if id is not None else Path(path).stem, labels=arr)


@dataclass(frozen=True)
class VariableDecl:
    name: str
    kind: str  # "numeric" | "categorical"
    unit: str | None = None

    def __post_init__(self):
        if self.kind not in ("numeric", "categorical"):
            raise ValidationError(f"variable {self.name!r}: unknown kind {self.kind!r}")


@dataclass(frozen=True)
class DatasetManifest:
    schema: SegmentSchema
    variables: tuple[VariableDecl, ...]
    subjects: tuple[tuple[str, str, str], ...]  # (id, volume path, segmap path)
    constants: dict = field(default_factory=dict)

    def variable(self, name: str) -> VariableDecl:
        for v in self.variables:
            if v.name == name:
                return v
        raise ValidationError(f"unknown variable {name!r}")

    def to_json_dict(self) -> dict:
        return {
            "format": "morphcf-dataset",
            "version": FORMAT_VERSION,
            "schema": [{"id": i, "name": n} for i, n in self.schema.entries],
            "variables": [
                {"name": v.name, "kind": v.kind, **({"unit": v.unit} if v.unit else {})}
                for v in self.variables
            ],
            "subjects": [
                {"id": sid, "volume": vol, "segmap": seg} for sid, vol, seg in self.subjects
            ],
            "constants": self.constants,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "DatasetManifest":
        if doc.get("format") != "morphcf-dataset":
            raise ValidationError(f"not a dataset manifest: format={doc.get('format')!r}")
        schema = SegmentSchema(tuple((e["id"], e["name"]) for e in doc["schema"]))
        variables = tuple(
            VariableDecl(v["name"], v["kind"], v.get("unit")) for v in doc["variables"]
        )
        subjects = tuple((s["id"], s["volume"], s["segmap"]) for s in doc["subjects"])
        return cls(schema, variables, subjects, doc.get("constants", {}))


def write_manifest(manifest: DatasetManifest, path) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(manifest.to_json_dict(), indent=2) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def load_demographics(csv_path, manifest: DatasetManifest) -> list[SubjectRecord]:
    """Parse the demographics table into SubjectRecords, one per row.

    Numeric parsing is locale-independent (dot decimal separator); empty
    cells are missing values. Raises on missing columns, unparsable
    numbers, out-of-range probabilities and duplicate ids.
    """
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        required = ["id"] + [v.name for v in manifest.variables] + [
            "predicted_label",
            "probability",
        ]
        missing = [c for c in required if c not in header]
        if missing:
            raise ValidationError(f"{csv_path}: missing column(s) {', '.join(missing)}")
        records = []
        seen = set()
        for lineno, row in enumerate(reader, start=2):
            sid = row["id"]
            if sid in seen:
                raise ValidationError(f"{csv_path}: duplicate id {sid!r}")
            seen.add(sid)
            demo = {}
            for decl in manifest.variables:
                cell = row[decl.name]
                if cell is None or cell == "":
                    continue
                if decl.kind == "numeric":
                    try:
                        demo[decl.name] = float(cell)
                    except ValueError:
                        raise ValidationError(
                            f"{csv_path}:{lineno}: unparsable number {cell!r} for {decl.name!r}"
                        ) from None
                else:
                    demo[decl.name] = cell
            try:
                probability = float(row["probability"])
                predicted = int(row["predicted_label"])
            except ValueError as exc:
                raise ValidationError(f"{csv_path}:{lineno}: {exc}") from None
            if not 0.0 <= probability <= 1.0:
                raise ValidationError(
                    f"{csv_path}:{lineno}: probability {probability} outside [0, 1]"
                )
            records.append(
                SubjectRecord(
                    id=sid,
                    demographics=demo,
                    predicted_label=predicted,
                    probability=probability,
                )
            )
    return records


def write_demographics(records: list[SubjectRecord], variables, csv_path) -> None:
    """Inverse of load_demographics; floats use repr so round-trips are exact."""
    names = [v.name for v in variables]
    path = Path(csv_path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", *names, "predicted_label", "probability"])
        for rec in records:
            cells = [rec.id]
            for name in names:
                v = rec.value(name)
                if v is None:
                    cells.append("")
                elif isinstance(v, float) and v.is_integer():
                    cells.append(str(int(v)))
                else:
                    cells.append(repr(v) if isinstance(v, float) else str(v))
            cells.append(str(rec.predicted_label))
            cells.append(repr(rec.probability))
            writer.writerow(cells)
    os.replace(tmp, path)


class Dataset:
    """A fully validated, in-memory dataset.

    Loading is all-or-nothing: every referenced file must exist, parse,
    match its paired volume dims and use only schema labels. Failures are
    collected and reported together in a single ManifestError.
    """

    def __init__(self, root, manifest, volumes, segmaps, records, ground_truth, digest):
        self.root = Path(root)
        self.manifest = manifest
        self.volumes: dict[str, Volume] = volumes
        self.segmaps: dict[str, SegmentMap] = segmaps
        self.records: list[SubjectRecord] = records
        self.records_by_id = {r.id: r for r in records}
        self.ground_truth: dict[str, dict] = ground_truth
        self.digest: str = digest

    @property
    def schema(self) -> SegmentSchema:
        return self.manifest.schema

    @property
    def subject_ids(self) -> list[str]:
        return [sid for sid, _, _ in self.manifest.subjects]

    def record(self, subject_id: str) -> SubjectRecord:
        try:
            return self.records_by_id[subject_id]
        except KeyError:
            raise ValidationError(f"unknown subject id {subject_id!r}") from None

    @classmethod
    def load(cls, root) -> "Dataset":
        root = Path(root)
        failures = []
        manifest_path = root / "manifest.json"
        try:
            manifest = DatasetManifest.from_json_dict(
                json.loads(manifest_path.read_text(encoding="utf-8"))
            )
        except (OSError, ValueError, KeyError, ValidationError) as exc:
            raise ManifestError([f"manifest.json: {exc}"]) from exc

        ids = [sid for sid, _, _ in manifest.subjects]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            failures.append(f"duplicate subject id(s): {', '.join(dupes)}")

        hasher = hashlib.sha256()
        hasher.update(manifest_path.read_bytes())

        volumes, segmaps = {}, {}
        for sid, vol_rel, seg_rel in manifest.subjects:
            vol, seg = None, None
            try:
                vol = read_volume(root / vol_rel, id=sid)
                hasher.update((root / vol_rel).read_bytes())
            except Exception as exc:
                failures.append(f"{vol_rel}: {exc}")
            try:
                seg = read_segmap(root / seg_rel, id=sid)
                hasher.update((root / seg_rel).read_bytes())
            except Exception as exc:
                failures.append(f"{seg_rel}: {exc}")
            if vol is not None and seg is not None:
                try:
                    ensure_paired(vol, seg)
                    seg.validate_against(manifest.schema)
                except ValidationError as exc:
                    failures.append(str(exc))
                volumes[sid] = vol
                segmaps[sid] = seg

        records = []
        demo_path = root / "demographics.csv"
        try:
            records = load_demographics(demo_path, manifest)
            hasher.update(demo_path.read_bytes())
        except (OSError, ValidationError) as exc:
            failures.append(f"demographics.csv: {exc}")
        known = set(ids)
        for rec in records:
            if rec.id not in known:
                failures.append(f"demographics.csv: row id {rec.id!r} matches no subject")

        ground_truth = {}
        gt_path = root / "ground_truth.csv"
        if gt_path.exists():
            try:
                with open(gt_path, newline="", encoding="utf-8") as fh:
                    for row in csv.DictReader(fh):
                        ground_truth[row["id"]] = {
                            "true_label": int(row["true_label"]),
                            "thickness": float(row["thickness"]),
                            "noise_draw": float(row["noise_draw"]),
                        }
                hasher.update(gt_path.read_bytes())
            except (KeyError, ValueError, OSError) as exc:
                failures.append(f"ground_truth.csv: {exc}")

        if failures:
            raise ManifestError(failures)
        return cls(root, manifest, volumes, segmaps, records, ground_truth, hasher.hexdigest())


def digest_of_tree(root) -> str:
    """Order-stable content digest over a dataset or run directory."""
    root = Path(root)
    hasher = hashlib.sha256()
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        hasher.update(str(path.relative_to(root)).encode())
        hasher.update(path.read_bytes())
    return hasher.hexdigest()
