"""Desk-scale cardiac-like phantoms with known ground truth.

Stands in for real MRI data, a trained classifier and a learned
segmentation model, none of which are reproducible at desk scale:

* phantoms: concentric LV cavity + myocardium annulus, an RV disk to the
  left, a chest-wall ring, flat intensity bands plus Gaussian pixel noise;
* a closed-form classifier whose decision rule (myocardium thickness
  estimated from segment pixel areas) is exactly known, so test suites can
  prove which segments can and cannot flip it;
* an intensity-band segmenter used to re-identify structures in
  recombined images.

Everything is a pure function of (inputs, seed); per-subject streams are
seeded by (seed, subject index) so parallel generation stays deterministic.

Intensity band centers are spaced so that the nominal ±10 bands never
overlap (the RV/cavity centers sit at 160/190); with the default noise
sigma of 10 the band gaps keep nearest-center misclassification rare
enough for the largest-component cleanup to recover the structures.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .core import SegmentMap, SegmentSchema, SubjectRecord, Volume, label_from_probability
from .dataio import (
    Dataset,
    DatasetManifest,
    VariableDecl,
    write_demographics,
    write_manifest,
    write_segmap,
    write_volume,
)
from .errors import ValidationError

SCHEMA = SegmentSchema(((1, "lv_cavity"), (2, "lv_myocardium"), (3, "rv_cavity")))

# Flat intensity per structure; keys 0b/0c are background and chest wall,
# both mapping to label 0.
BAND_CENTERS = {
    "background": 40,
    "lv_myocardium": 90,
    "chest_wall": 120,
    "rv_cavity": 160,
    "lv_cavity": 190,
}
# Ascending intensity order with the label each band maps to.
_BANDS_ASCENDING = (
    (40, 0),  # background
    (90, 2),  # lv_myocardium
    (120, 0),  # chest_wall
    (160, 3),  # rv_cavity
    (190, 1),  # lv_cavity
)

ALPHA = 2.0  # logistic slope per pixel of thickness
TAU_C = 5.0  # classifier thickness threshold, pixels at 128x128
TAU_G = 5.0  # generative thickness threshold, pixels at 128x128
GT_NOISE_SIGMA = 0.15  # sigma of the ground-truth noise draw, pixels
NOISE_SIGMA = 10.0  # default pixel noise sigma

_FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)

VARIABLES = (
    VariableDecl("age", "numeric", "years"),
    VariableDecl("sex", "categorical"),
    VariableDecl("bmi", "numeric", "kg/m2"),
)


@dataclass(frozen=True)
class PhantomParams:
    """Sampled geometry + intensity recipe for one phantom subject."""

    lv_center: tuple[int, int]
    lv_cavity_radius: float
    myocardium_thickness: float
    rv_offset: tuple[int, int]
    rv_radius: float
    bands: dict = field(default_factory=lambda: dict(BAND_CENTERS))
    noise_sigma: float = NOISE_SIGMA
    noise_seed: int = 0


@dataclass(frozen=True)
class GroundTruth:
    true_label: int
    thickness_threshold: float
    noise_draw: float
    thickness: float


def _disk(height, width, center, radius):
    rr, cc = np.ogrid[:height, :width]
    return (rr - center[0]) ** 2 + (cc - center[1]) ** 2 <= radius * radius


def _check_margins(params: PhantomParams, height: int, width: int, scale: float) -> None:
    # Structures must fit inside the frame with a 2-pixel margin; the
    # chest ring bounds everything else by construction.
    chest_outer = 56.0 * scale
    fc = (height // 2, width // 2)
    if chest_outer + 2 > min(fc[0], fc[1], height - fc[0], width - fc[1]):
        raise ValidationError(f"chest ring radius {chest_outer:.1f} does not fit {height}x{width}")
    chest_inner = chest_outer - 6.0 * scale
    lv_extent = math.hypot(params.lv_center[0] - fc[0], params.lv_center[1] - fc[1])
    lv_extent += params.lv_cavity_radius + params.myocardium_thickness
    rv_center = (params.lv_center[0] + params.rv_offset[0], params.lv_center[1] + params.rv_offset[1])
    rv_extent = math.hypot(rv_center[0] - fc[0], rv_center[1] - fc[1]) + params.rv_radius
    if max(lv_extent, rv_extent) + 2 > chest_inner:
        raise ValidationError("phantom structures do not fit inside the chest ring")


def sample_params(rng: np.random.Generator, height=128, width=128,
                  noise_sigma=NOISE_SIGMA, noise_seed=0) -> PhantomParams:
    """Draw one subject's phantom geometry.

    The RV disk is offset so that segment transplants between any two
    sampled subjects can never overlap the LV structures: the RV centroid
    sits 23 + rv_radius pixels left of the LV center while the largest
    possible LV outer radius is 16 (at the default scale).
    """
    scale = min(height, width) / 128.0
    fc = (height // 2, width // 2)
    lv_center = (
        fc[0] + int(rng.integers(-3, 4)),
        fc[1] + int(rng.integers(-3, 4)),
    )
    r_cav = float(rng.uniform(8.5, 10.0)) * scale
    t_myo = float(rng.uniform(4.0, 6.0)) * scale
    r_rv = float(rng.uniform(5.0, 8.0)) * scale
    rv_offset = (int(rng.integers(-2, 3)), -int(round(23.0 * scale + r_rv)))
    params = PhantomParams(
        lv_center=lv_center,
        lv_cavity_radius=r_cav,
        myocardium_thickness=t_myo,
        rv_offset=rv_offset,
        rv_radius=r_rv,
        noise_sigma=noise_sigma,
        noise_seed=noise_seed,
    )
    _check_margins(params, height, width, scale)
    return params


def render_phantom(params: PhantomParams, subject_id: str, frames=1,
                   height=128, width=128) -> tuple[Volume, SegmentMap]:
    """Rasterize a phantom volume and its ground-truth segment map."""
    scale = min(height, width) / 128.0
    _check_margins(params, height, width, scale)
    fc = (height // 2, width // 2)
    bands = params.bands

    base = np.full((height, width), bands["background"], dtype=np.float64)
    chest_outer = _disk(height, width, fc, 56.0 * scale)
    chest_inner = _disk(height, width, fc, 50.0 * scale)
    base[chest_outer & ~chest_inner] = bands["chest_wall"]

    r_out = params.lv_cavity_radius + params.myocardium_thickness
    lv_outer = _disk(height, width, params.lv_center, r_out)
    lv_cavity = _disk(height, width, params.lv_center, params.lv_cavity_radius)
    rv_center = (params.lv_center[0] + params.rv_offset[0], params.lv_center[1] + params.rv_offset[1])
    rv = _disk(height, width, rv_center, params.rv_radius)

    base[lv_outer & ~lv_cavity] = bands["lv_myocardium"]
    base[lv_cavity] = bands["lv_cavity"]
    base[rv] = bands["rv_cavity"]

    labels_frame = np.zeros((height, width), dtype=np.uint8)
    labels_frame[lv_outer & ~lv_cavity] = 2
    labels_frame[lv_cavity] = 1
    labels_frame[rv] = 3

    rng = np.random.default_rng(np.random.SeedSequence([int(params.noise_seed) & 0xFFFFFFFF]))
    pixels = np.empty((frames, height, width), dtype=np.uint8)
    for f in range(frames):
        if params.noise_sigma > 0:
            noisy = base + rng.normal(0.0, params.noise_sigma, size=base.shape)
        else:
            noisy = base
        pixels[f] = np.clip(np.rint(noisy), 0, 255).astype(np.uint8)
    labels = np.broadcast_to(labels_frame, (frames, height, width)).copy()
    return Volume(id=subject_id, pixels=pixels), SegmentMap(id=subject_id, labels=labels)


def thickness_estimate(segmap: SegmentMap) -> float:
    """Mean myocardium thickness from frame-0 segment pixel areas.

    Models cavity and cavity+myocardium as circles: the difference of
    their equivalent radii is the annulus thickness. Ignores the RV
    (label 3) entirely, which makes the classifier provably invariant to
    any change outside labels 1 and 2.
    """
    frame = segmap.labels[0]
    a_cav = int(np.count_nonzero(frame == 1))
    a_myo = int(np.count_nonzero(frame == 2))
    if a_cav == 0 or a_myo == 0:
        missing = [str(lab) for lab, area in ((1, a_cav), (2, a_myo)) if area == 0]
        raise ValidationError(f"segmap {segmap.id!r}: missing label(s) {', '.join(missing)}")
    return math.sqrt((a_cav + a_myo) / math.pi) - math.sqrt(a_cav / math.pi)


def thickness_probability(thickness: float, alpha=ALPHA, tau_c=TAU_C) -> float:
    """Logistic disease probability for a thickness estimate; 0.5 at tau_c."""
    x = alpha * (thickness - tau_c)
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def synthetic_classifier(volume: Volume, segmap: SegmentMap,
                         alpha=ALPHA, tau_c=TAU_C) -> tuple[int, float]:
    """Closed-form stand-in disease classifier: (label, probability)."""
    p = thickness_probability(thickness_estimate(segmap), alpha=alpha, tau_c=tau_c)
    return label_from_probability(p), p


def _largest_component(mask: np.ndarray) -> np.ndarray:
    comp, n = ndimage.label(mask, structure=_FOUR_CONNECTED)
    if n == 0:
        return np.zeros_like(mask)
    sizes = np.bincount(comp.ravel())
    sizes[0] = 0
    return comp == int(np.argmax(sizes))  # ties: first component in scan order


def _fill_single_pixel_holes(labels: np.ndarray, lab: int) -> None:
    is_lab = labels == lab
    up = np.zeros_like(is_lab)
    down = np.zeros_like(is_lab)
    left = np.zeros_like(is_lab)
    right = np.zeros_like(is_lab)
    up[1:, :] = is_lab[:-1, :]
    down[:-1, :] = is_lab[1:, :]
    left[:, 1:] = is_lab[:, :-1]
    right[:, :-1] = is_lab[:, 1:]
    holes = ~is_lab & up & down & left & right
    labels[holes] = lab


def synthetic_segmenter(volume: Volume, bands=None) -> SegmentMap:
    """Re-identify structures by intensity.

    Per frame: classify each pixel to the nearest band center (ties go to
    the lower center), keep the largest 4-connected component per label,
    then fill single-pixel holes. Degenerate inputs simply produce empty
    labels, never errors.
    """
    if bands is None:
        centers = np.array([c for c, _ in _BANDS_ASCENDING], dtype=np.float64)
        band_labels = np.array([lab for _, lab in _BANDS_ASCENDING], dtype=np.uint8)
    else:
        items = sorted((float(c), _label_for_band(name)) for name, c in bands.items())
        centers = np.array([c for c, _ in items])
        band_labels = np.array([lab for _, lab in items], dtype=np.uint8)

    out = np.zeros(volume.shape, dtype=np.uint8)
    for f in range(volume.frames):
        frame = volume.pixels[f].astype(np.float64)
        nearest = np.argmin(np.abs(frame[..., None] - centers[None, None, :]), axis=-1)
        classified = band_labels[nearest]
        cleaned = np.zeros_like(classified)
        for lab in (1, 2, 3):
            keep = _largest_component(classified == lab)
            cleaned[keep] = lab
        for lab in (1, 2, 3):
            _fill_single_pixel_holes(cleaned, lab)
        out[f] = cleaned
    return SegmentMap(id=volume.id, labels=out)


def _label_for_band(name: str) -> int:
    try:
        return {"background": 0, "chest_wall": 0}.get(name) or SCHEMA.id_of(name)
    except ValidationError:
        raise ValidationError(f"unknown band name {name!r}") from None


def _subject_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, index]))


def generate_dataset(n: int, seed: int, out_dir, frames=1, height=128, width=128,
                     noise_sigma=NOISE_SIGMA) -> DatasetManifest:
    """Write a complete n-subject phantom dataset to out_dir.

    Fully deterministic for a given (n, seed, frames, height, width,
    noise_sigma): subject streams are seeded by (seed, index), so the
    output bytes are identical run to run.
    """
    if n < 2:
        raise ValidationError(f"need at least 2 subjects, got {n}")
    out = Path(out_dir)
    (out / "volumes").mkdir(parents=True, exist_ok=True)
    (out / "segmaps").mkdir(parents=True, exist_ok=True)

    scale = min(height, width) / 128.0
    alpha = ALPHA / scale
    tau_c = TAU_C * scale
    tau_g = TAU_G * scale
    gt_sigma = GT_NOISE_SIGMA * scale

    subjects = []
    records = []
    gt_rows = []
    for i in range(n):
        sid = f"s{i:04d}"
        rng = _subject_rng(seed, i)
        noise_seed = int(rng.integers(0, 2**32))
        params = sample_params(rng, height, width, noise_sigma=noise_sigma, noise_seed=noise_seed)
        volume, segmap = render_phantom(params, sid, frames=frames, height=height, width=width)

        noise_draw = float(rng.normal(0.0, gt_sigma))
        true_label = 1 if params.myocardium_thickness + noise_draw > tau_g else 0
        gt_rows.append((sid, true_label, params.myocardium_thickness, noise_draw))

        age = int(np.clip(round(rng.normal(62, 9)), 35, 88))
        sex = "female" if rng.random() < 0.5 else "male"
        bmi = float(np.clip(round(rng.normal(27, 4), 1), 16.0, 45.0))
        label, prob = synthetic_classifier(volume, segmap, alpha=alpha, tau_c=tau_c)
        records.append(
            SubjectRecord(
                id=sid,
                demographics={"age": age, "sex": sex, "bmi": bmi},
                predicted_label=label,
                probability=prob,
            )
        )

        vol_rel = f"volumes/{sid}.mvol"
        seg_rel = f"segmaps/{sid}.mseg"
        write_volume(volume, out / vol_rel)
        write_segmap(segmap, out / seg_rel)
        subjects.append((sid, vol_rel, seg_rel))

    manifest = DatasetManifest(
        schema=SCHEMA,
        variables=VARIABLES,
        subjects=tuple(subjects),
        constants={
            "alpha": alpha,
            "tau_c": tau_c,
            "tau_g": tau_g,
            "gt_noise_sigma": gt_sigma,
            "noise_sigma": noise_sigma,
            "bands": dict(BAND_CENTERS),
            "seed": int(seed),
        },
    )
    with open(out / "ground_truth.csv", "w", newline="", encoding="utf-8") as fh:
        fh.write("id,true_label,thickness,noise_draw\n")
        for sid, lab, thick, draw in gt_rows:
            fh.write(f"{sid},{lab},{thick!r},{draw!r}\n")
    write_demographics(records, VARIABLES, out / "demographics.csv")
    write_manifest(manifest, out / "manifest.json")
    return manifest


def load_generated(out_dir) -> Dataset:
    return Dataset.load(out_dir)
