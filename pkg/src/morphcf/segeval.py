"""Fidelity scoring of recombined images by re-segmentation.

A recombined image carries the analytically known post-transplant segment
map. Running a segmenter over the recombined pixels and comparing its
output against that expectation (Dice per label per frame) quantifies how
recognizable the transplanted structures remain.
"""
from __future__ import annotations

import io as _io
from dataclasses import dataclass

import numpy as np

from .morphmix import RecombinedImage


def _as_mask(pixels) -> np.ndarray | None:
    if isinstance(pixels, np.ndarray):
        return pixels.astype(bool)
    return None


def dice(a, b) -> float:
    """Overlap score 2|A&B| / (|A|+|B|); 1.0 when both sets are empty. Symmetric.

    Accepts boolean arrays of equal shape or iterables of pixel coordinates.
    """
    mask_a, mask_b = _as_mask(a), _as_mask(b)
    if mask_a is not None and mask_b is not None:
        na, nb = int(mask_a.sum()), int(mask_b.sum())
        inter = int((mask_a & mask_b).sum())
    else:
        set_a, set_b = set(map(tuple, a)), set(map(tuple, b))
        na, nb = len(set_a), len(set_b)
        inter = len(set_a & set_b)
    if na + nb == 0:
        return 1.0
    return 2.0 * inter / (na + nb)


@dataclass
class LabelFidelity:
    label: int
    dice: float  # mean over frames
    expected_px: int
    observed_px: int
    intersection_px: int


@dataclass
class FidelityReport:
    per_label: dict[int, LabelFidelity]
    mean_dice: float

    def to_csv(self) -> str:
        buf = _io.StringIO()
        buf.write("label,dice,expected_px,observed_px,intersection_px\n")
        for lab in sorted(self.per_label):
            s = self.per_label[lab]
            buf.write(f"{lab},{s.dice:.6f},{s.expected_px},{s.observed_px},{s.intersection_px}\n")
        return buf.getvalue()


def evaluate(recombined: RecombinedImage, segmenter, labels=None) -> FidelityReport:
    """Re-segment a recombined image and score it against its expected map.

    Dice is computed per label per frame and averaged over frames; pixel
    counts are summed over frames. Deterministic whenever the segmenter is.
    """
    observed = segmenter(recombined.as_volume())
    expected = recombined.expected_segmap
    if labels is None:
        present = set(np.unique(expected.labels)) | set(np.unique(observed.labels))
        labels = sorted(int(v) for v in present if v != 0)
    per_label = {}
    frames = expected.labels.shape[0]
    for lab in labels:
        scores = []
        n_exp = n_obs = n_int = 0
        for f in range(frames):
            exp_mask = expected.labels[f] == lab
            obs_mask = observed.labels[f] == lab
            scores.append(dice(exp_mask, obs_mask))
            n_exp += int(exp_mask.sum())
            n_obs += int(obs_mask.sum())
            n_int += int((exp_mask & obs_mask).sum())
        per_label[lab] = LabelFidelity(
            label=lab,
            dice=float(np.mean(scores)) if scores else 1.0,
            expected_px=n_exp,
            observed_px=n_obs,
            intersection_px=n_int,
        )
    mean = float(np.mean([s.dice for s in per_label.values()])) if per_label else 1.0
    return FidelityReport(per_label=per_label, mean_dice=mean)


def aggregate_reports(reports: list[FidelityReport]) -> FidelityReport:
    """Mean Dice and summed pixel counts over many recombinations."""
    labels = sorted({lab for r in reports for lab in r.per_label})
    per_label = {}
    for lab in labels:
        scores = [r.per_label[lab].dice for r in reports if lab in r.per_label]
        per_label[lab] = LabelFidelity(
            label=lab,
            dice=float(np.mean(scores)),
            expected_px=sum(r.per_label[lab].expected_px for r in reports if lab in r.per_label),
            observed_px=sum(r.per_label[lab].observed_px for r in reports if lab in r.per_label),
            intersection_px=sum(
                r.per_label[lab].intersection_px for r in reports if lab in r.per_label
            ),
        )
    mean = float(np.mean([s.dice for s in per_label.values()])) if per_label else 1.0
    return FidelityReport(per_label=per_label, mean_dice=mean)
