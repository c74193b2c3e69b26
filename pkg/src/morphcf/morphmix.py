"""Segment transplantation between volumes.

Selected structures are masked out of a target and replaced with the
corresponding structures of a source, aligned by centroid and copied via
flood fill. All pixels outside the modified region stay bit-identical to
the target, which is what makes a prediction flip attributable to the
replaced segments.

Conventions the underlying idea leaves open, fixed here:

* labels are processed in ascending order; later labels overwrite earlier
  ones where stamps overlap;
* centroids round half-away-from-zero per axis;
* erased-but-uncovered target pixels take the mean intensity of the
  8-connected outer boundary ring of the erased segment (computed on the
  unmodified target frame), or the frame mean if the ring is empty;
* a label with no source pixels in a frame is skipped for that frame and
  recorded in provenance rather than raising;
* frames of a video are aligned and processed independently.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .core import SegmentMap, SegmentSelection, Volume, ensure_paired
from .errors import ValidationError

_FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class RecombinationSpec:
    """One (target, source, segment subset) transplant request."""

    target_id: str
    source_id: str
    selection: SegmentSelection

    def __post_init__(self):
        if self.target_id == self.source_id:
            raise ValidationError(f"target and source are both {self.target_id!r}")


@dataclass
class Provenance:
    target_id: str
    source_id: str
    selection: SegmentSelection
    skipped: list = field(default_factory=list)  # (frame, label) with empty source segment
    dropped_writes: int = 0  # out-of-bounds copy attempts


@dataclass
class RecombinedImage:
    pixels: np.ndarray  # uint8, target dims
    expected_segmap: SegmentMap  # analytically known post-transplant labels
    provenance: Provenance
    modified: np.ndarray  # bool, the region allowed to differ from the target

    def as_volume(self, volume_id: str | None = None) -> Volume:
        vid = volume_id or f"{self.provenance.target_id}~{self.provenance.source_id}~{self.provenance.selection.bitmask}"
        return Volume(id=vid, pixels=self.pixels)


def _round_half_away(x: float) -> int:
    return int(math.floor(x + 0.5)) if x >= 0 else int(math.ceil(x - 0.5))


def centroid(mask) -> tuple[int, int]:
    """Integer centroid of a pixel set; each axis rounds half-away-from-zero.

    Accepts a 2-D boolean mask or an iterable of (row, col) pairs.
    """
    if isinstance(mask, np.ndarray) and mask.dtype == bool:
        coords = np.argwhere(mask)
    else:
        coords = np.asarray(sorted(mask), dtype=np.int64)
        if coords.ndim == 1:
            coords = coords.reshape(-1, 2)
    if coords.size == 0:
        raise ValidationError("centroid of an empty pixel set")
    mean_r, mean_c = coords.mean(axis=0)
    return _round_half_away(float(mean_r)), _round_half_away(float(mean_c))


def flood_fill_from(seed: tuple[int, int], mask: np.ndarray) -> np.ndarray:
    """All mask pixels 4-connected to the seed."""
    if not mask[seed]:
        raise ValidationError(f"flood-fill seed {seed} is outside the mask")
    seed_img = np.zeros_like(mask)
    seed_img[seed] = True
    return ndimage.binary_propagation(seed_img, mask=mask, structure=_FOUR_CONNECTED)


def _seed_for_component(comp: np.ndarray) -> tuple[int, int]:
    """Component pixel nearest the component centroid (Euclidean, ties row-major).

    The seed is always inside the component, so flood fill works even for
    annuli whose centroid falls in the enclosed cavity.
    """
    cr, cc = centroid(comp)
    coords = np.argwhere(comp)  # argwhere scans row-major, so ties resolve themselves
    d2 = (coords[:, 0] - cr) ** 2 + (coords[:, 1] - cc) ** 2
    r, c = coords[int(np.argmin(d2))]
    return int(r), int(c)


def _ring_fill_value(tgt_mask: np.ndarray, original_frame: np.ndarray) -> int:
    ring = ndimage.binary_dilation(tgt_mask, structure=_EIGHT_CONNECTED) & ~tgt_mask
    if ring.any():
        return _round_half_away(float(original_frame[ring].mean()))
    return _round_half_away(float(original_frame.mean()))


def recombine(target: Volume, target_map: SegmentMap,
              source: Volume, source_map: SegmentMap,
              selection: SegmentSelection) -> RecombinedImage:
    """Transplant the selected segments of the source into the target.

    Per frame, for each selected label in ascending order: align the
    source segment's centroid with the target segment's, erase the target
    segment to its boundary-ring fill value, then flood-fill each source
    component from its centroid-nearest pixel and copy the visited pixels
    into the target at the aligned offset. Out-of-bounds writes are
    dropped and counted; a frame-empty source segment skips that label.

    Pure function: identical inputs give identical outputs.
    """
    ensure_paired(target, target_map)
    ensure_paired(source, source_map)
    if target.frames != source.frames:
        raise ValidationError(
            f"frame count mismatch: target {target.frames}, source {source.frames}"
        )
    if target.shape[1:] != source.shape[1:]:
        raise ValidationError(
            f"dimension mismatch: target {target.shape}, source {source.shape}"
        )

    height, width = target.height, target.width
    prov = Provenance(target.id, source.id, selection)
    work = target.pixels.copy()
    expected = target_map.labels.copy()
    modified = np.zeros(target.shape, dtype=bool)

    for f in range(target.frames):
        frame_tgt_map = target_map.labels[f]
        frame_src_map = source_map.labels[f]
        original_frame = target.pixels[f]
        for label in selection.sorted_labels():
            tgt_mask = frame_tgt_map == label
            src_mask = frame_src_map == label
            if not src_mask.any():
                prov.skipped.append((f, label))
                continue
            src_centroid = centroid(src_mask)
            if tgt_mask.any():
                anchor = centroid(tgt_mask)
            else:
                anchor = (height // 2, width // 2)  # frame center
            dr, dc = anchor[0] - src_centroid[0], anchor[1] - src_centroid[1]

            # Erase whatever still carries this label; the fill value comes
            # from the untouched target frame so earlier transplants cannot
            # contaminate it.
            if tgt_mask.any():
                fill = _ring_fill_value(tgt_mask, original_frame)
                erase_mask = expected[f] == label
                work[f][erase_mask] = fill
                modified[f] |= tgt_mask
            expected[f][expected[f] == label] = 0

            components, n_comp = ndimage.label(src_mask, structure=_FOUR_CONNECTED)
            for ci in range(1, n_comp + 1):
                comp = components == ci
                visited = flood_fill_from(_seed_for_component(comp), comp)
                rows, cols = np.nonzero(visited)
                dest_r, dest_c = rows + dr, cols + dc
                ok = (dest_r >= 0) & (dest_r < height) & (dest_c >= 0) & (dest_c < width)
                prov.dropped_writes += int((~ok).sum())
                work[f][dest_r[ok], dest_c[ok]] = source.pixels[f][rows[ok], cols[ok]]
                expected[f][dest_r[ok], dest_c[ok]] = label
                modified[f][dest_r[ok], dest_c[ok]] = True

    exp_map = SegmentMap(id=f"{target.id}~{source.id}~{selection.bitmask}", labels=expected)
    return RecombinedImage(pixels=work, expected_segmap=exp_map, provenance=prov, modified=modified)
