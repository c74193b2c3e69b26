"""Batch recombination runs and counterfactual bookkeeping.

A run takes disjoint target and source cohorts with opposite predicted
labels, recombines every (target, source, selection) triple, re-classifies
the results and tallies which selections flip predictions. Results are
kept in canonical order (sorted target id, sorted source id, ascending
selection bitmask) so artifacts are identical regardless of worker count.

Recombined pixel volumes are not persisted by default; a spec is cheap to
re-evaluate deterministically, while storing tens of thousands of volumes
is not. A flag stores them for inspection.
"""
from __future__ import annotations

import hashlib
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .cohort import FilterClause
from .core import SegmentSelection, Volume
from .dataio import Dataset, write_segmap, write_volume
from .errors import ValidationError
from .gateway import Prediction, PredictionGateway
from .morphmix import RecombinationSpec, RecombinedImage, recombine

RUN_FORMAT = "morphcf-run"


def expected_count(n_targets: int, n_sources: int, n_directions: int, n_selections: int) -> int:
    """How many recombined images a full crossed run produces."""
    return n_targets * n_sources * n_directions * n_selections


@dataclass(frozen=True)
class RecombinedResult:
    spec: RecombinationSpec
    prediction: Prediction
    target_prediction: Prediction
    is_counterfactual: bool
    skipped: bool  # some selected label had no source pixels in some frame
    skipped_labels: tuple = ()
    dropped_writes: int = 0

    def __post_init__(self):
        if self.is_counterfactual != (self.prediction.label != self.target_prediction.label):
            raise ValidationError("is_counterfactual inconsistent with predictions")


@dataclass
class RunArtifact:
    run_id: str
    created: str
    dataset_digest: str
    dataset_path: str
    model_id: str
    target_ids: list[str]
    source_ids: list[str]
    selections: list[SegmentSelection]
    results: list[RecombinedResult]
    store_volumes: bool = False

    @property
    def skipped_count(self) -> int:
        return sum(1 for r in self.results if r.skipped)


@dataclass
class SummaryRow:
    selection: SegmentSelection
    counterfactuals: int
    unchanged: int
    skipped: int
    proportion: float | None  # cf / (cf + unchanged) rounded to 3 decimals; None if empty

    def segments_name(self, schema) -> str:
        return "+".join(self.selection.names(schema))


def _proportion(cf: int, unchanged: int) -> float | None:
    if cf + unchanged == 0:
        return None
    return round(cf / (cf + unchanged), 3)


def _check_cohorts(targets, sources, dataset: Dataset, gateway: PredictionGateway):
    overlap = sorted(set(targets) & set(sources))
    if overlap:
        raise ValidationError(f"targets and sources overlap: {', '.join(overlap)}")
    if not targets or not sources:
        raise ValidationError("targets and sources must both be nonempty")
    for sid in list(targets) + list(sources):
        if sid not in dataset.volumes:
            raise ValidationError(f"unknown subject id {sid!r}")

    target_preds = {
        sid: gateway.predict(dataset.volumes[sid], dataset.segmaps[sid]) for sid in targets
    }
    source_preds = {
        sid: gateway.predict(dataset.volumes[sid], dataset.segmaps[sid]) for sid in sources
    }
    t_labels = {p.label for p in target_preds.values()}
    if len(t_labels) != 1:
        bad = sorted(sid for sid, p in target_preds.items()
                     if p.label != target_preds[sorted(targets)[0]].label)
        raise ValidationError(f"targets have mixed predicted labels (e.g. {', '.join(bad[:5])})")
    target_label = t_labels.pop()
    bad_sources = sorted(sid for sid, p in source_preds.items() if p.label == target_label)
    if bad_sources:
        raise ValidationError(
            f"sources must have the opposite predicted label; offenders: {', '.join(bad_sources[:5])}"
        )
    return target_preds, source_preds


def _evaluate_spec(dataset: Dataset, gateway: PredictionGateway,
                   spec: RecombinationSpec, target_pred: Prediction) -> RecombinedResult:
    image = recombine(
        dataset.volumes[spec.target_id], dataset.segmaps[spec.target_id],
        dataset.volumes[spec.source_id], dataset.segmaps[spec.source_id],
        spec.selection,
    )
    pred = gateway.predict(image.as_volume(), image.expected_segmap)
    return RecombinedResult(
        spec=spec,
        prediction=pred,
        target_prediction=target_pred,
        is_counterfactual=pred.label != target_pred.label,
        skipped=bool(image.provenance.skipped),
        skipped_labels=tuple(image.provenance.skipped),
        dropped_writes=image.provenance.dropped_writes,
    )


def rebuild_recombination(dataset: Dataset, spec: RecombinationSpec) -> RecombinedImage:
    """Recompute a run's recombined image from its spec (deterministic)."""
    return recombine(
        dataset.volumes[spec.target_id], dataset.segmaps[spec.target_id],
        dataset.volumes[spec.source_id], dataset.segmaps[spec.source_id],
        spec.selection,
    )


def run(targets, sources, selections, gateway: PredictionGateway, dataset: Dataset,
        jobs: int | None = None, store_volumes: bool = False,
        progress=None) -> RunArtifact:
    """Evaluate every (target, source, selection) triple in canonical order."""
    target_ids = sorted(dict.fromkeys(targets))
    source_ids = sorted(dict.fromkeys(sources))
    selections = sorted({s if isinstance(s, SegmentSelection) else SegmentSelection(frozenset(s))
                         for s in selections}, key=lambda s: s.bitmask)
    if not selections:
        raise ValidationError("at least one segment selection is required")
    for sel in selections:
        sel.validate_against(dataset.schema)
    target_preds, _ = _check_cohorts(target_ids, source_ids, dataset, gateway)

    specs = [
        RecombinationSpec(t, s, sel)
        for t in target_ids
        for s in source_ids
        for sel in selections
    ]
    results: list[RecombinedResult | None] = [None] * len(specs)

    def work(i: int) -> None:
        results[i] = _evaluate_spec(dataset, gateway, specs[i], target_preds[specs[i].target_id])
        if progress:
            progress(i, len(specs))

    if jobs is None:
        jobs = os.cpu_count() or 1
    if jobs <= 1:
        for i in range(len(specs)):
            work(i)
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            for fut in [pool.submit(work, i) for i in range(len(specs))]:
                fut.result()  # re-raise worker failures; run aborts

    key = hashlib.sha256()
    key.update(dataset.digest.encode())
    key.update(gateway.model_id.encode())
    key.update(json.dumps([target_ids, source_ids,
                           [s.sorted_labels() for s in selections]]).encode())
    stamp = time.strftime("%Y%m%dT%H%M%SZ", time.gmtime())
    run_id = f"{key.hexdigest()[:12]}-{stamp}"

    return RunArtifact(
        run_id=run_id,
        created=time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        dataset_digest=dataset.digest,
        dataset_path=str(dataset.root),
        model_id=gateway.model_id,
        target_ids=target_ids,
        source_ids=source_ids,
        selections=selections,
        results=[r for r in results if r is not None],
        store_volumes=store_volumes,
    )


def summarize(artifact: RunArtifact) -> list[SummaryRow]:
    """One row per selection in bitmask order. Skipped results are excluded
    from the proportion and reported separately."""
    return _summarize_results(artifact.selections, artifact.results)


def run_both_directions(group_a, group_b, selections, gateway: PredictionGateway,
                        dataset: Dataset, jobs: int | None = None) -> tuple[RunArtifact, RunArtifact]:
    """Two artifacts: group_a as targets with group_b as sources, then swapped."""
    forward = run(group_a, group_b, selections, gateway, dataset, jobs=jobs)
    backward = run(group_b, group_a, selections, gateway, dataset, jobs=jobs)
    return forward, backward


def combine_summaries(artifacts: list[RunArtifact]) -> list[SummaryRow]:
    """Per-selection counts concatenated across artifacts (e.g. the two
    directions of a bidirectional run); proportions recomputed."""
    selections = sorted({sel for a in artifacts for sel in a.selections},
                        key=lambda s: s.bitmask)
    results = [r for a in artifacts for r in a.results]
    return _summarize_results(selections, results)


def subgroup_summarize(artifact: RunArtifact, clause: FilterClause,
                       dataset: Dataset) -> list[SummaryRow]:
    """Summaries over the result subset whose source subject matches the clause."""
    if all(clause.variable != v.name for v in dataset.manifest.variables):
        raise ValidationError(f"unknown variable {clause.variable!r}")
    subset = [r for r in artifact.results if clause.matches(dataset.record(r.spec.source_id))]
    return _summarize_results(artifact.selections, subset)


def _summarize_results(selections, results) -> list[SummaryRow]:
    rows = []
    for sel in sorted(selections, key=lambda s: s.bitmask):
        cf = unchanged = skipped = 0
        for r in results:
            if r.spec.selection != sel:
                continue
            if r.skipped:
                skipped += 1
            elif r.is_counterfactual:
                cf += 1
            else:
                unchanged += 1
        rows.append(SummaryRow(sel, cf, unchanged, skipped, _proportion(cf, unchanged)))
    return rows


def summary_rows_from_counts(selection: SegmentSelection, counterfactuals: int,
                             unchanged: int, skipped: int = 0) -> SummaryRow:
    """Build a row from externally supplied counts (summary arithmetic only)."""
    return SummaryRow(selection, counterfactuals, unchanged, skipped,
                      _proportion(counterfactuals, unchanged))


def summary_csv(rows: list[SummaryRow], schema) -> str:
    lines = ["segments,counterfactuals,unchanged,proportion"]
    for row in rows:
        prop = "" if row.proportion is None else f"{row.proportion:.3f}"
        lines.append(f"{row.segments_name(schema)},{row.counterfactuals},{row.unchanged},{prop}")
    return "\n".join(lines) + "\n"


# --- persistence -----------------------------------------------------------

def write_run(artifact: RunArtifact, run_dir, dataset: Dataset) -> None:
    """Persist a run: run.json (metadata, carries the unique run id),
    results.jsonl and summary.csv (both byte-deterministic given the same
    dataset and parameters), plus recombined volumes when requested.

    Run directories are immutable once written; re-running belongs in a
    fresh directory under a new run id."""
    run_dir = Path(run_dir)
    if (run_dir / "run.json").exists():
        raise ValidationError(f"{run_dir} already holds a run; artifacts are immutable")
    run_dir.mkdir(parents=True, exist_ok=True)

    meta = {
        "format": RUN_FORMAT,
        "version": 1,
        "run_id": artifact.run_id,
        "created": artifact.created,
        "dataset_digest": artifact.dataset_digest,
        "dataset_path": artifact.dataset_path,
        "model_id": artifact.model_id,
        "targets": artifact.target_ids,
        "sources": artifact.source_ids,
        "selections": [s.sorted_labels() for s in artifact.selections],
        "result_count": len(artifact.results),
        "skipped_count": artifact.skipped_count,
        "store_volumes": artifact.store_volumes,
    }
    lines = []
    for r in artifact.results:
        lines.append(json.dumps({
            "target": r.spec.target_id,
            "source": r.spec.source_id,
            "selection": r.spec.selection.sorted_labels(),
            "bitmask": r.spec.selection.bitmask,
            "probability": r.prediction.probability,
            "label": r.prediction.label,
            "target_probability": r.target_prediction.probability,
            "target_label": r.target_prediction.label,
            "is_counterfactual": r.is_counterfactual,
            "skipped": r.skipped,
            "skipped_labels": [list(x) for x in r.skipped_labels],
            "dropped_writes": r.dropped_writes,
        }, separators=(",", ":")))

    tmp = run_dir / "results.jsonl.tmp"
    tmp.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    os.replace(tmp, run_dir / "results.jsonl")
    tmp = run_dir / "summary.csv.tmp"
    tmp.write_text(summary_csv(summarize(artifact), dataset.schema), encoding="utf-8")
    os.replace(tmp, run_dir / "summary.csv")
    tmp = run_dir / "run.json.tmp"
    tmp.write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    os.replace(tmp, run_dir / "run.json")

    if artifact.store_volumes:
        vol_dir = run_dir / "volumes"
        vol_dir.mkdir(exist_ok=True)
        for i, r in enumerate(artifact.results):
            image = rebuild_recombination(dataset, r.spec)
            write_volume(Volume(id=f"{i:06d}", pixels=image.pixels), vol_dir / f"{i:06d}.mvol")
            write_segmap(image.expected_segmap, vol_dir / f"{i:06d}.mseg")


def read_run(run_dir, dataset: Dataset) -> RunArtifact:
    """Load a persisted run; predictions are reconstructed from the rows."""
    run_dir = Path(run_dir)
    meta = json.loads((run_dir / "run.json").read_text(encoding="utf-8"))
    if meta.get("format") != RUN_FORMAT:
        raise ValidationError(f"{run_dir}: not a run directory")
    if meta["dataset_digest"] != dataset.digest:
        raise ValidationError(
            f"{run_dir}: run was produced from a different dataset "
            f"({meta['dataset_digest'][:12]} != {dataset.digest[:12]})"
        )
    results: list[RecombinedResult] = []
    text = (run_dir / "results.jsonl").read_text(encoding="utf-8")
    for line in text.splitlines():
        doc = json.loads(line)
        spec = RecombinationSpec(doc["target"], doc["source"],
                                 SegmentSelection(frozenset(doc["selection"])))
        results.append(RecombinedResult(
            spec=spec,
            prediction=Prediction(doc["label"], doc["probability"], meta["model_id"]),
            target_prediction=Prediction(doc["target_label"], doc["target_probability"],
                                         meta["model_id"]),
            is_counterfactual=doc["is_counterfactual"],
            skipped=doc["skipped"],
            skipped_labels=tuple(tuple(x) for x in doc["skipped_labels"]),
            dropped_writes=doc["dropped_writes"],
        ))
    if len(results) != meta["result_count"]:
        raise ValidationError(
            f"{run_dir}: results.jsonl has {len(results)} rows, "
            f"run.json declares {meta['result_count']}"
        )
    return RunArtifact(
        run_id=meta["run_id"],
        created=meta["created"],
        dataset_digest=meta["dataset_digest"],
        dataset_path=meta["dataset_path"],
        model_id=meta["model_id"],
        target_ids=list(meta["targets"]),
        source_ids=list(meta["sources"]),
        selections=[SegmentSelection(frozenset(s)) for s in meta["selections"]],
        results=results,
        store_volumes=meta.get("store_volumes", False),
    )
