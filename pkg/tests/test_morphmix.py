import numpy as np
import pytest

from conftest import make_phantom
from morphcf import synth
from morphcf.core import SegmentMap, SegmentSelection, Volume, combinations
from morphcf.errors import ValidationError
from morphcf.morphmix import (
    RecombinationSpec,
    centroid,
    flood_fill_from,
    recombine,
)
from morphcf.segeval import dice

ALL_SELECTIONS = combinations(synth.SCHEMA)


def blank(h=64, w=64, frames=1, value=0):
    return np.full((frames, h, w), value, np.uint8)


def disk_mask(h, w, center, radius):
    rr, cc = np.ogrid[:h, :w]
    return (rr - center[0]) ** 2 + (cc - center[1]) ** 2 <= radius * radius


def test_centroid_single_pixel():
    assert centroid({(3, 4)}) == (3, 4)


def test_centroid_rounds_half_away_from_zero():
    assert centroid({(0, 0), (0, 1), (1, 0), (1, 1)}) == (1, 1)


def test_centroid_exact_mean():
    assert centroid({(r, c) for r in range(3) for c in range(3)}) == (1, 1)


def test_centroid_empty_mask():
    with pytest.raises(ValidationError):
        centroid(np.zeros((4, 4), bool))


def test_spec_rejects_self():
    with pytest.raises(ValidationError):
        RecombinationSpec("a", "a", SegmentSelection(frozenset({1})))


def test_flood_fill_covers_component():
    mask = np.zeros((8, 8), bool)
    mask[1:4, 1:4] = True
    mask[6, 6] = True  # disconnected pixel must not be reached
    filled = flood_fill_from((2, 2), mask)
    assert filled[1:4, 1:4].all()
    assert not filled[6, 6]
    with pytest.raises(ValidationError):
        flood_fill_from((0, 0), mask)


def test_identity_recombination():
    volume, segmap = make_phantom(21)
    for sel in ALL_SELECTIONS:
        out = recombine(volume, segmap, volume, segmap, sel)
        assert np.array_equal(out.pixels, volume.pixels), sel.labels
        assert np.array_equal(out.expected_segmap.labels, segmap.labels), sel.labels
        assert out.provenance.dropped_writes == 0
        assert out.provenance.skipped == []


def test_congruent_translation():
    h = w = 100
    t_disk = disk_mask(h, w, (40, 40), 5)
    s_disk = disk_mask(h, w, (70, 70), 5)
    t_px, t_lab = blank(h, w), blank(h, w)
    t_px[0][t_disk] = 200
    t_lab[0][t_disk] = 1
    s_px, s_lab = blank(h, w), blank(h, w)
    s_px[0][s_disk] = 123
    s_lab[0][s_disk] = 1
    out = recombine(Volume("t", t_px), SegmentMap("t", t_lab),
                    Volume("s", s_px), SegmentMap("s", s_lab),
                    SegmentSelection(frozenset({1})))
    assert dice(out.expected_segmap.labels[0] == 1, t_disk) == 1.0
    assert (out.pixels[0][t_disk] == 123).all()


def test_thickness_transfers_with_selection_12():
    tv, tm = make_phantom(31)
    sv, sm = make_phantom(32, subject_id="q")
    out = recombine(tv, tm, sv, sm, SegmentSelection(frozenset({1, 2})))
    t_src = synth.thickness_estimate(sm)
    t_rec = synth.thickness_estimate(out.expected_segmap)
    assert abs(t_rec - t_src) <= 0.5


def test_frame_count_mismatch():
    v1, m1 = make_phantom(41, frames=1)
    v2, m2 = make_phantom(42, subject_id="q", frames=2)
    with pytest.raises(ValidationError, match="frame count"):
        recombine(v1, m1, v2, m2, SegmentSelection(frozenset({1})))


def test_dimension_mismatch():
    v1 = Volume("a", blank(32, 32))
    m1 = SegmentMap("a", blank(32, 32))
    v2 = Volume("b", blank(48, 48))
    m2 = SegmentMap("b", blank(48, 48))
    with pytest.raises(ValidationError, match="dimension"):
        recombine(v1, m1, v2, m2, SegmentSelection(frozenset({1})))


def test_skip_on_empty_source_segment():
    tv, tm = make_phantom(51)
    sv, sm = make_phantom(52, subject_id="q")
    labels = sm.labels.copy()
    labels[labels == 3] = 0  # source lost its RV
    sm = SegmentMap("q", labels)
    out = recombine(tv, tm, sv, sm, SegmentSelection(frozenset({2, 3})))
    assert out.provenance.skipped == [(0, 3)]
    # the skipped label's target pixels stay untouched
    rv_mask = tm.labels[0] == 3
    assert np.array_equal(out.pixels[0][rv_mask], tv.pixels[0][rv_mask])
    assert (out.expected_segmap.labels[0][rv_mask] == 3).all()


def test_empty_target_segment_centers_on_frame():
    h = w = 64
    t_px, t_lab = blank(h, w), blank(h, w)  # target has no label 1 anywhere
    s_disk = disk_mask(h, w, (10, 10), 4)
    s_px, s_lab = blank(h, w), blank(h, w)
    s_px[0][s_disk] = 99
    s_lab[0][s_disk] = 1
    out = recombine(Volume("t", t_px), SegmentMap("t", t_lab),
                    Volume("s", s_px), SegmentMap("s", s_lab),
                    SegmentSelection(frozenset({1})))
    stamped = out.expected_segmap.labels[0] == 1
    assert centroid(stamped) == (h // 2, w // 2)
    assert stamped.sum() == s_disk.sum()


def test_out_of_bounds_writes_dropped():
    h = w = 64
    t_px, t_lab = blank(h, w), blank(h, w)
    t_disk = disk_mask(h, w, (2, 2), 4)  # target structure hugs the corner
    t_px[0][t_disk] = 200
    t_lab[0][t_disk] = 1
    s_px, s_lab = blank(h, w), blank(h, w)
    s_disk = disk_mask(h, w, (32, 32), 8)  # bigger source, must spill out
    s_px[0][s_disk] = 100
    s_lab[0][s_disk] = 1
    out = recombine(Volume("t", t_px), SegmentMap("t", t_lab),
                    Volume("s", s_px), SegmentMap("s", s_lab),
                    SegmentSelection(frozenset({1})))
    assert out.provenance.dropped_writes > 0
    stamped = int((out.expected_segmap.labels == 1).sum())
    assert stamped == int(s_disk.sum()) - out.provenance.dropped_writes


def test_erase_fill_is_boundary_ring_mean():
    h = w = 64
    t_px = blank(h, w, value=37)
    t_lab = blank(h, w)
    t_disk = disk_mask(h, w, (30, 30), 6)
    t_px[0][t_disk] = 200
    t_lab[0][t_disk] = 1
    # tiny far-away source segment leaves most of the erased disk uncovered
    s_px, s_lab = blank(h, w), blank(h, w)
    s_px[0, 10, 10] = 55
    s_lab[0, 10, 10] = 1
    out = recombine(Volume("t", t_px), SegmentMap("t", t_lab),
                    Volume("s", s_px), SegmentMap("s", s_lab),
                    SegmentSelection(frozenset({1})))
    uncovered = t_disk.copy()
    uncovered[30, 30] = False  # the stamped single pixel lands on the centroid
    assert (out.pixels[0][uncovered] == 37).all()  # ring mean: uniform 37 background
    assert out.pixels[0, 30, 30] == 55
    assert (out.expected_segmap.labels[0][uncovered] == 0).all()


def test_annulus_transfer_exact():
    # the myocardium is an annulus whose centroid falls in the cavity;
    # per-component centroid-nearest seeds keep flood fill inside it
    tv, tm = make_phantom(61)
    sv, sm = make_phantom(62, subject_id="q")
    out = recombine(tv, tm, sv, sm, SegmentSelection(frozenset({2})))
    src_mask = sm.labels[0] == 2
    d = (centroid(tm.labels[0] == 2)[0] - centroid(src_mask)[0],
         centroid(tm.labels[0] == 2)[1] - centroid(src_mask)[1])
    rows, cols = np.nonzero(src_mask)
    expected = np.zeros_like(src_mask)
    expected[rows + d[0], cols + d[1]] = True
    assert dice(out.expected_segmap.labels[0] == 2, expected) == 1.0


def test_later_label_overwrites_earlier_on_overlap():
    h = w = 64
    t_px, t_lab = blank(h, w), blank(h, w)
    # single-pixel targets one step apart force the two source disks to
    # land almost on top of each other
    t_lab[0, 30, 30] = 1
    t_lab[0, 31, 31] = 2
    s_px, s_lab = blank(h, w), blank(h, w)
    s_lab[0][disk_mask(h, w, (10, 10), 4)] = 1
    s_lab[0][disk_mask(h, w, (50, 50), 4)] = 2
    s_px[0][s_lab[0] == 1] = 111
    s_px[0][s_lab[0] == 2] = 222
    out = recombine(Volume("t", t_px), SegmentMap("t", t_lab),
                    Volume("s", s_px), SegmentMap("s", s_lab),
                    SegmentSelection(frozenset({1, 2})))
    stamp1 = np.zeros((h, w), bool)
    r, c = np.nonzero(s_lab[0] == 1)
    stamp1[r + 20, c + 20] = True  # d1 = (30,30) - (10,10)
    stamp2 = np.zeros((h, w), bool)
    r, c = np.nonzero(s_lab[0] == 2)
    stamp2[r - 19, c - 19] = True  # d2 = (31,31) - (50,50)
    overlap = stamp1 & stamp2
    assert overlap.any()
    assert (out.expected_segmap.labels[0][overlap] == 2).all()
    assert (out.pixels[0][overlap] == 222).all()
    # monotone coverage: label-1 count = |S_1| - dropped - overwritten by label 2
    assert int((out.expected_segmap.labels[0] == 1).sum()) == int(stamp1.sum() - overlap.sum())


def test_sparsity_outside_modified_region():
    rng = np.random.default_rng(123)
    phantoms = [make_phantom(700 + i, subject_id=f"s{i}") for i in range(8)]
    for _ in range(25):
        i, j = rng.choice(len(phantoms), size=2, replace=False)
        sel = ALL_SELECTIONS[rng.integers(0, len(ALL_SELECTIONS))]
        (tv, tm), (sv, sm) = phantoms[i], phantoms[j]
        out = recombine(tv, tm, sv, sm, sel)
        outside = ~out.modified
        assert np.array_equal(out.pixels[outside], tv.pixels[outside])


def test_recombine_deterministic():
    tv, tm = make_phantom(81)
    sv, sm = make_phantom(82, subject_id="q")
    sel = SegmentSelection(frozenset({1, 2, 3}))
    a = recombine(tv, tm, sv, sm, sel)
    b = recombine(tv, tm, sv, sm, sel)
    assert np.array_equal(a.pixels, b.pixels)
    assert np.array_equal(a.expected_segmap.labels, b.expected_segmap.labels)


def test_multiframe_frames_processed_independently():
    tv, tm = make_phantom(91, frames=3)
    sv, sm = make_phantom(92, subject_id="q", frames=3)
    out = recombine(tv, tm, sv, sm, SegmentSelection(frozenset({1})))
    single = recombine(
        Volume("t0", tv.pixels[1:2].copy()), SegmentMap("t0", tm.labels[1:2].copy()),
        Volume("s0", sv.pixels[1:2].copy()), SegmentMap("s0", sm.labels[1:2].copy()),
        SegmentSelection(frozenset({1})),
    )
    assert np.array_equal(out.pixels[1], single.pixels[0])
    assert np.array_equal(out.expected_segmap.labels[1], single.expected_segmap.labels[0])
