"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line. Runs headless through the library and the CLI only.

Run with: pytest tests/test_acceptance.py -v -s
"""
import dataclasses
import functools
import time

import numpy as np

from conftest import make_phantom
from morphcf import engine, synth
from morphcf.cli import main as cli_main
from morphcf.cohort import FilterClause, apply_filters
from morphcf.core import SegmentSelection, combinations
from morphcf.dataio import Dataset, digest_of_tree
from morphcf.morphmix import recombine
from morphcf.segeval import evaluate
from morphcf.synth import SCHEMA

ALL_SELECTIONS = combinations(SCHEMA)


def criterion(name):
    def decorate(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"\n[ACCEPTANCE] {name}: FAIL")
                raise
            print(f"\n[ACCEPTANCE] {name}: PASS")

        return wrapper

    return decorate


@criterion("combinatorics: 21x79x2x7 = 23226 and real 5x8x7 run = 280 in < 5 s")
def test_combinatorics(dataset, gateway, cohorts):
    assert engine.expected_count(21, 79, 2, 7) == 23226
    ones, zeros = cohorts
    t0 = time.perf_counter()
    artifact = engine.run(ones[:5], zeros[:8], ALL_SELECTIONS, gateway, dataset, jobs=1)
    elapsed = time.perf_counter() - t0
    assert len(artifact.results) == 280
    keys = [(r.spec.target_id, r.spec.source_id, r.spec.selection.bitmask)
            for r in artifact.results]
    assert keys == sorted(keys) and len(set(keys)) == 280
    assert elapsed < 5.0, f"single-threaded 5x8x7 took {elapsed:.2f}s"


@criterion("summary arithmetic: (520,2798) -> 0.157 and (0,3318) -> 0.000")
def test_proportion_arithmetic():
    sel = SegmentSelection(frozenset({1}))
    assert engine.summary_rows_from_counts(sel, 520, 2798).proportion == 0.157
    assert engine.summary_rows_from_counts(sel, 0, 3318).proportion == 0.000


@criterion("sparsity: 200 random specs leave all pixels outside the modified region bit-identical")
def test_sparsity_invariant():
    phantoms = [make_phantom(5000 + i, subject_id=f"s{i}") for i in range(12)]
    rng = np.random.default_rng(42)
    violations = 0
    for _ in range(200):
        i, j = rng.choice(len(phantoms), size=2, replace=False)
        sel = ALL_SELECTIONS[rng.integers(0, len(ALL_SELECTIONS))]
        (tv, tm), (sv, sm) = phantoms[i], phantoms[j]
        out = recombine(tv, tm, sv, sm, sel)
        outside = ~out.modified
        if not np.array_equal(out.pixels[outside], tv.pixels[outside]):
            violations += 1
    assert violations == 0


@criterion("identity: recombine(x, x, sel) is bit-identical for every sel over 20 phantoms")
def test_identity_invariant():
    for i in range(20):
        volume, segmap = make_phantom(6000 + i)
        for sel in ALL_SELECTIONS:
            out = recombine(volume, segmap, volume, segmap, sel)
            assert np.array_equal(out.pixels, volume.pixels)


@criterion("known-negative segment: RV-only run yields exactly 0 counterfactuals")
def test_known_negative_segment(dataset, gateway, cohorts):
    ones, zeros = cohorts
    artifact = engine.run(ones, zeros, [SegmentSelection(frozenset({3}))],
                          gateway, dataset, jobs=4)
    assert len(artifact.results) == len(ones) * len(zeros)
    counterfactuals = sum(r.is_counterfactual for r in artifact.results)
    assert counterfactuals == 0
    row = engine.summarize(artifact)[0]
    assert row.counterfactuals == 0 and row.proportion == 0.0


@criterion("known-positive segment: LV cavity+myocardium run flips >= 70% in < 60 s")
def test_known_positive_segment(dataset, gateway, cohorts):
    ones, zeros = cohorts
    assert len(ones) >= 40 and len(zeros) >= 40
    t0 = time.perf_counter()
    artifact = engine.run(ones[:40], zeros[:40],
                          [SegmentSelection(frozenset({1, 2}))], gateway, dataset)
    elapsed = time.perf_counter() - t0
    flips = sum(r.is_counterfactual for r in artifact.results)
    assert len(artifact.results) == 1600
    assert flips / len(artifact.results) >= 0.70, f"flip rate {flips / 1600:.3f}"
    assert elapsed < 60.0, f"40x40 run took {elapsed:.1f}s"


@criterion("re-segmentation fidelity: mean per-label Dice >= 0.90 at noise; 1.0 noiseless")
def test_resegmentation_fidelity():
    phantoms = [make_phantom(7000 + i, subject_id=f"s{i}") for i in range(20)]
    rng = np.random.default_rng(77)
    per_label = {1: [], 2: [], 3: []}
    for _ in range(50):
        i, j = rng.choice(len(phantoms), size=2, replace=False)
        sel = ALL_SELECTIONS[rng.integers(0, len(ALL_SELECTIONS))]
        (tv, tm), (sv, sm) = phantoms[i], phantoms[j]
        report = evaluate(recombine(tv, tm, sv, sm, sel), synth.synthetic_segmenter,
                          labels=[1, 2, 3])
        for lab in (1, 2, 3):
            per_label[lab].append(report.per_label[lab].dice)
    for lab in (1, 2, 3):
        mean = float(np.mean(per_label[lab]))
        assert mean >= 0.90, f"label {lab} mean Dice {mean:.4f}"

    # noiseless congruent pair scores exactly 1.0
    rng = np.random.default_rng(np.random.SeedSequence([8000]))
    params = synth.sample_params(rng, noise_sigma=0.0, noise_seed=0)
    shifted = dataclasses.replace(params, lv_center=(params.lv_center[0] + 5,
                                                     params.lv_center[1] - 4))
    tv, tm = synth.render_phantom(params, "t")
    sv, sm = synth.render_phantom(shifted, "s")
    report = evaluate(recombine(tv, tm, sv, sm, SegmentSelection(frozenset({1, 2, 3}))),
                      synth.synthetic_segmenter, labels=[1, 2, 3])
    assert report.mean_dice == 1.0


@criterion("filter correctness: 1000 records x 100 clause sets match brute force")
def test_filter_correctness(dataset, gateway, cohorts):
    rng = np.random.default_rng(11)
    records = []
    from morphcf.core import SubjectRecord

    for i in range(1000):
        demo = {"age": float(rng.integers(35, 90))}
        if rng.random() < 0.92:
            demo["bmi"] = float(np.round(rng.uniform(16, 45), 1))
        demo["sex"] = "female" if rng.random() < 0.5 else "male"
        p = float(rng.uniform(0, 1))
        records.append(SubjectRecord(id=f"r{i:04d}", demographics=demo,
                                     probability=p, predicted_label=int(p > 0.5)))

    def random_clauses():
        clauses = []
        for _ in range(int(rng.integers(1, 4))):
            which = rng.integers(0, 3)
            if which == 0:
                lo = float(rng.uniform(35, 85))
                clauses.append(FilterClause("age", lo=lo, hi=lo + float(rng.uniform(0, 30))))
            elif which == 1:
                lo = float(rng.uniform(16, 40))
                clauses.append(FilterClause("bmi", lo=lo, hi=lo + float(rng.uniform(0, 15))))
            else:
                clauses.append(FilterClause("sex", values=frozenset(
                    [["female", "male"][rng.integers(0, 2)]])))
        return clauses

    for _ in range(100):
        clauses = random_clauses()
        state = apply_filters(records, clauses)
        surviving = records
        for k, clause in enumerate(clauses, start=1):  # brute-force double loop
            surviving = [r for r in surviving if clause.matches(r)]
            assert state.layer_counts[k] == len(surviving)
        assert state.subset == [r.id for r in surviving]
        for a, b in zip(state.layer_counts, state.layer_counts[1:]):
            assert b <= a

    # subgroup summaries against an independent linear scan
    ones, zeros = cohorts
    artifact = engine.run(ones[:5], zeros[:8], ALL_SELECTIONS, gateway, dataset)
    for _ in range(100):
        lo = float(rng.uniform(35, 80))
        clause = FilterClause("age", lo=lo, hi=lo + float(rng.uniform(0, 25)))
        rows = engine.subgroup_summarize(artifact, clause, dataset)
        for row in rows:
            cf = unchanged = 0
            for r in artifact.results:
                if r.spec.selection != row.selection or r.skipped:
                    continue
                age = dataset.record(r.spec.source_id).value("age")
                if age is None or not clause.lo <= age <= clause.hi:
                    continue
                if r.is_counterfactual:
                    cf += 1
                else:
                    unchanged += 1
            assert (row.counterfactuals, row.unchanged) == (cf, unchanged)


@criterion("determinism: gen/recombine/summarize byte-identical across reruns and 1 vs 4 workers")
def test_determinism(tmp_path, capsys):
    assert cli_main(["gen", "--subjects", "20", "--seed", "13",
                     "--out", str(tmp_path / "d1")]) == 0
    assert cli_main(["gen", "--subjects", "20", "--seed", "13",
                     "--out", str(tmp_path / "d2")]) == 0
    assert digest_of_tree(tmp_path / "d1") == digest_of_tree(tmp_path / "d2")

    ds = Dataset.load(tmp_path / "d1")
    ones = [r.id for r in ds.records if r.predicted_label == 1]
    zeros = [r.id for r in ds.records if r.predicted_label == 0]
    (tmp_path / "targets.txt").write_text("\n".join(ones[:4]) + "\n")
    (tmp_path / "sources.txt").write_text("\n".join(zeros[:5]) + "\n")

    outputs = []
    for tag, jobs in (("r1", "1"), ("r2", "4"), ("r3", "1"), ("r4", "4")):
        run_dir = tmp_path / tag
        assert cli_main([
            "recombine", "--dataset", str(tmp_path / "d1"),
            "--targets", str(tmp_path / "targets.txt"),
            "--sources", str(tmp_path / "sources.txt"),
            "--segments", "all", "--out", str(run_dir), "--jobs", jobs,
        ]) == 0
        outputs.append(((run_dir / "results.jsonl").read_bytes(),
                        (run_dir / "summary.csv").read_bytes()))
    assert all(o == outputs[0] for o in outputs[1:])

    capsys.readouterr()
    assert cli_main(["summarize", "--run", str(tmp_path / "r1")]) == 0
    first = capsys.readouterr().out
    assert cli_main(["summarize", "--run", str(tmp_path / "r2")]) == 0
    second = capsys.readouterr().out
    assert first == second
