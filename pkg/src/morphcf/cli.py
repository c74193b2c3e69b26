"""Batch entry points: gen, predict, recombine, summarize, eval-seg, serve.

Every subcommand is a thin wrapper over the library: outputs are
byte-identical to calling the corresponding functions directly. Errors
print one machine-parsable line (``error: <category>: <message>``) and
exit nonzero: 2 validation, 3 I/O, 4 model transport.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import engine, synth
from .cohort import FilterClause
from .dataio import Dataset, write_demographics
from .errors import (
    FileFormatError,
    ManifestError,
    MorphcfError,
    TransportError,
    ValidationError,
)
from .gateway import PredictionGateway, parse_model_spec
from .segeval import aggregate_reports, evaluate

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_TRANSPORT = 4


def _gateway_for(dataset: Dataset, model_spec: str) -> PredictionGateway:
    config = parse_model_spec(model_spec)
    constants = dataset.manifest.constants
    return PredictionGateway(config, alpha=constants.get("alpha", synth.ALPHA),
                             tau_c=constants.get("tau_c", synth.TAU_C))


def _read_id_file(path) -> list[str]:
    ids = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            ids.append(line)
    if not ids:
        raise ValidationError(f"{path}: no ids")
    return ids


def _parse_selections(spec: str, schema) -> list:
    from .core import SegmentSelection, combinations

    if spec == "all":
        return combinations(schema)
    names = [s.strip() for s in spec.split(",") if s.strip()]
    labels = frozenset(schema.id_of(n) for n in names)
    return [SegmentSelection(labels)]


def _parse_by(arg: str) -> FilterClause:
    if "=" not in arg:
        raise ValidationError(f"--by expects VAR=LO:HI or VAR=VALUE, got {arg!r}")
    variable, _, rest = arg.partition("=")
    if ":" in rest:
        lo, _, hi = rest.partition(":")
        try:
            return FilterClause(variable, lo=float(lo), hi=float(hi))
        except ValueError:
            raise ValidationError(f"--by range {rest!r} is not numeric") from None
    return FilterClause(variable, values=frozenset([rest]))


def cmd_gen(args) -> int:
    synth.generate_dataset(args.subjects, args.seed, args.out, frames=args.frames,
                           height=args.height, width=args.width,
                           noise_sigma=args.noise_sigma)
    print(f"generated {args.subjects} subjects in {args.out}")
    return EXIT_OK


def cmd_predict(args) -> int:
    dataset = Dataset.load(args.dataset)
    with _gateway_for(dataset, args.model) as gateway:
        preds = gateway.predict_batch(
            [(dataset.volumes[r.id], dataset.segmaps[r.id]) for r in dataset.records]
        )
    from .core import SubjectRecord

    updated = [
        SubjectRecord(id=r.id, demographics=r.demographics,
                      predicted_label=p.label, probability=p.probability)
        for r, p in zip(dataset.records, preds)
    ]
    write_demographics(updated, dataset.manifest.variables,
                       Path(args.dataset) / "demographics.csv")
    print(f"predicted {len(updated)} subjects with {gateway.model_id}")
    return EXIT_OK


def cmd_recombine(args) -> int:
    dataset = Dataset.load(args.dataset)
    targets = _read_id_file(args.targets)
    sources = _read_id_file(args.sources)
    selections = _parse_selections(args.segments, dataset.schema)
    with _gateway_for(dataset, args.model) as gateway:
        artifact = engine.run(targets, sources, selections, gateway, dataset,
                              jobs=args.jobs, store_volumes=args.store_volumes)
    engine.write_run(artifact, args.out, dataset)
    print(f"run {artifact.run_id}: {len(artifact.results)} results, "
          f"{artifact.skipped_count} skipped -> {args.out}")
    return EXIT_OK


def cmd_summarize(args) -> int:
    run_dir = Path(args.run)
    dataset = Dataset.load(args.dataset) if args.dataset else _dataset_of_run(run_dir)
    artifact = engine.read_run(run_dir, dataset)
    if args.by:
        clause = _parse_by(args.by)
        rows = engine.subgroup_summarize(artifact, clause, dataset)
    else:
        rows = engine.summarize(artifact)
    csv_text = engine.summary_csv(rows, dataset.schema)
    if args.out:
        Path(args.out).write_text(csv_text, encoding="utf-8")
    sys.stdout.write(csv_text)
    return EXIT_OK


def _dataset_of_run(run_dir: Path) -> Dataset:
    import json

    meta = json.loads((run_dir / "run.json").read_text(encoding="utf-8"))
    return Dataset.load(meta["dataset_path"])


def cmd_eval_seg(args) -> int:
    run_dir = Path(args.run)
    dataset = Dataset.load(args.dataset) if args.dataset else _dataset_of_run(run_dir)
    artifact = engine.read_run(run_dir, dataset)
    if not artifact.results:
        raise ValidationError("run has no results to sample")
    k = min(args.sample, len(artifact.results))
    rng = np.random.default_rng(args.seed)
    picks = rng.choice(len(artifact.results), size=k, replace=False)
    reports = []
    for i in sorted(int(x) for x in picks):
        image = engine.rebuild_recombination(dataset, artifact.results[i].spec)
        reports.append(evaluate(image, synth.synthetic_segmenter,
                                labels=dataset.schema.label_ids()))
    combined = aggregate_reports(reports)
    csv_text = combined.to_csv()
    if args.out:
        Path(args.out).write_text(csv_text, encoding="utf-8")
    sys.stdout.write(csv_text)
    print(f"mean dice {combined.mean_dice:.4f} over {k} recombinations", file=sys.stderr)
    return EXIT_OK


def cmd_serve(args) -> int:
    from .service import serve

    serve(args.dataset, port=args.port, host=args.host)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="morphcf",
        description="Counterfactual explanations via morphological segment transplants",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic phantom dataset")
    p.add_argument("--subjects", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--frames", type=int, default=1)
    p.add_argument("--height", type=int, default=128)
    p.add_argument("--width", type=int, default=128)
    p.add_argument("--noise-sigma", type=float, default=synth.NOISE_SIGMA)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("predict", help="fill predictions into the demographics table")
    p.add_argument("--dataset", required=True)
    p.add_argument("--model", default="synthetic",
                   help="synthetic, cmd:<command>, or http(s)://<url>")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("recombine", help="run the counterfactual engine")
    p.add_argument("--dataset", required=True)
    p.add_argument("--targets", required=True, help="file of target ids, one per line")
    p.add_argument("--sources", required=True, help="file of source ids, one per line")
    p.add_argument("--segments", required=True,
                   help="comma-separated segment names, or 'all' for every combination")
    p.add_argument("--out", required=True, help="run directory to create")
    p.add_argument("--model", default="synthetic")
    p.add_argument("--store-volumes", action="store_true")
    p.add_argument("--jobs", type=int, default=None,
                   help="worker threads (default: available parallelism)")
    p.set_defaults(func=cmd_recombine)

    p = sub.add_parser("summarize", help="write the per-selection summary table")
    p.add_argument("--run", required=True)
    p.add_argument("--dataset", default=None, help="override the dataset recorded in the run")
    p.add_argument("--by", default=None, help="subgroup clause, VAR=LO:HI or VAR=VALUE")
    p.add_argument("--out", default=None, help="also write the CSV here")
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("eval-seg", help="re-segmentation fidelity over sampled recombinations")
    p.add_argument("--run", required=True)
    p.add_argument("--dataset", default=None)
    p.add_argument("--sample", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval_seg)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--dataset", default=None,
                   help="dataset directory (default: $MORPHCF_DATASET)")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TransportError as exc:
        print(f"error: transport: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except (FileFormatError, ManifestError, OSError) as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValidationError, MorphcfError) as exc:
        print(f"error: validation: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
