"""HTTP facade over dataset browsing, filtering, runs and summaries.

Sessionless: every response carries the dataset digest so stale clients
can detect a reload. Reads are pure; recombination runs execute one at a
time on a background worker and are observed by polling.
"""
from __future__ import annotations

import hashlib
import os
import queue
import threading
import time
import traceback
from contextlib import asynccontextmanager
from pathlib import Path

from fastapi import FastAPI, HTTPException, Response
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from . import engine
from .cohort import FilterClause, apply_filters, category_counts, histogram
from .core import SegmentSelection
from .dataio import Dataset
from .errors import ValidationError
from .gateway import PredictionGateway
from .render import render_frame_png

PAGE_LIMIT = 50  # display bound of the selector; results pages are capped here

DATASET_ENV = "MORPHCF_DATASET"


class FilterRequest(BaseModel):
    clauses: list[dict] = []


class RunRequest(BaseModel):
    targets: list[str]
    sources: list[str]
    selections: list[list[int]]
    store_volumes: bool = False


class _RunState:
    def __init__(self, run_id: str, request: RunRequest):
        self.run_id = run_id
        self.request = request
        self.status = "pending"  # pending | running | complete | failed
        self.error: str | None = None
        self.artifact: engine.RunArtifact | None = None


def _http_400(field: str, message: str):
    return HTTPException(status_code=400, detail={"field": field, "message": message})


def create_app(dataset_dir=None, runs_dir=None) -> FastAPI:
    dataset_dir = dataset_dir or os.environ.get(DATASET_ENV)
    if not dataset_dir:
        raise ValidationError(f"no dataset: pass dataset_dir or set {DATASET_ENV}")
    dataset = Dataset.load(dataset_dir)
    constants = dataset.manifest.constants
    gateway = PredictionGateway(
        alpha=constants.get("alpha", 2.0), tau_c=constants.get("tau_c", 4.5)
    )
    runs_root = Path(runs_dir) if runs_dir else Path(dataset_dir) / "runs"

    runs: dict[str, _RunState] = {}
    run_queue: queue.Queue = queue.Queue()
    runs_lock = threading.Lock()

    def worker():
        while True:
            state = run_queue.get()
            if state is None:
                return
            state.status = "running"
            try:
                artifact = engine.run(
                    state.request.targets,
                    state.request.sources,
                    [SegmentSelection(frozenset(s)) for s in state.request.selections],
                    gateway,
                    dataset,
                    store_volumes=state.request.store_volumes,
                )
                artifact.run_id = state.run_id
                engine.write_run(artifact, runs_root / state.run_id, dataset)
                state.artifact = artifact
                state.status = "complete"
            except Exception as exc:  # surface the failure via polling
                state.error = f"{type(exc).__name__}: {exc}"
                state.status = "failed"
                traceback.print_exc()

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        thread = threading.Thread(target=worker, daemon=True)
        thread.start()
        yield
        run_queue.put(None)

    app = FastAPI(title="morphcf", lifespan=lifespan)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.dataset = dataset

    def envelope(payload: dict) -> dict:
        return {"dataset_digest": dataset.digest, **payload}

    @app.get("/api/schema")
    def get_schema():
        return envelope({
            "labels": [{"id": i, "name": n} for i, n in dataset.schema.entries],
            "variables": [
                {"name": v.name, "kind": v.kind, "unit": v.unit}
                for v in dataset.manifest.variables
            ],
        })

    @app.get("/api/subjects")
    def get_subjects():
        subjects = []
        for rec in dataset.records:
            vol = dataset.volumes[rec.id]
            subjects.append({
                "id": rec.id,
                "demographics": rec.demographics,
                "predicted_label": rec.predicted_label,
                "probability": rec.probability,
                "frames": vol.frames,
                "height": vol.height,
                "width": vol.width,
            })
        return envelope({"subjects": subjects})

    @app.get("/api/subjects/{subject_id}/frames/{frame}")
    def get_frame(subject_id: str, frame: int, overlay: int = 0):
        if subject_id not in dataset.volumes:
            raise HTTPException(status_code=404, detail=f"unknown subject {subject_id!r}")
        volume = dataset.volumes[subject_id]
        if not 0 <= frame < volume.frames:
            raise HTTPException(status_code=404, detail=f"frame {frame} out of range")
        labels = dataset.segmaps[subject_id].labels[frame] if overlay else None
        png = render_frame_png(volume.pixels[frame], labels)
        return Response(content=png, media_type="image/png",
                        headers={"X-Dataset-Digest": dataset.digest})

    @app.post("/api/filters")
    def post_filters(req: FilterRequest):
        try:
            clauses = [FilterClause.from_json_dict(c) for c in req.clauses]
            state = apply_filters(dataset.records, clauses,
                                  declared=dataset.manifest.variables)
        except ValidationError as exc:
            raise _http_400("clauses", str(exc)) from None
        return envelope({
            "layers": [
                {"clause": None if i == 0 else state.clauses[i - 1].to_json_dict(),
                 "count": count}
                for i, count in enumerate(state.layer_counts)
            ],
            "subset": state.subset,
        })

    @app.get("/api/histogram/{variable}")
    def get_histogram(variable: str, bins: int = 10):
        decl = None
        for v in dataset.manifest.variables:
            if v.name == variable:
                decl = v
        if decl is None:
            raise HTTPException(status_code=404, detail=f"unknown variable {variable!r}")
        if decl.kind == "categorical":
            return envelope({
                "kind": "categorical",
                "counts": [{"value": v, "count": c}
                           for v, c in category_counts(dataset.records, variable)],
            })
        result = histogram(dataset.records, variable, bins)
        return envelope({
            "kind": "numeric",
            "bins": [{"lo": lo, "hi": hi, "count": c} for lo, hi, c in result.bins],
            "missing": result.missing,
        })

    @app.post("/api/runs")
    def post_run(req: RunRequest):
        overlap = sorted(set(req.targets) & set(req.sources))
        if overlap:
            raise _http_400("targets", f"targets and sources overlap: {', '.join(overlap)}")
        if not req.selections or any(not s for s in req.selections):
            raise _http_400("selections", "selections must be nonempty label lists")
        try:
            for s in req.selections:
                SegmentSelection(frozenset(s)).validate_against(dataset.schema)
        except ValidationError as exc:
            raise _http_400("selections", str(exc)) from None
        for sid in req.targets + req.sources:
            if sid not in dataset.volumes:
                raise _http_400("targets", f"unknown subject id {sid!r}")

        digest = hashlib.sha256(
            repr((sorted(req.targets), sorted(req.sources), sorted(map(tuple, req.selections)),
                  dataset.digest)).encode()
        ).hexdigest()[:12]
        run_id = f"{digest}-{time.strftime('%Y%m%dT%H%M%SZ', time.gmtime())}-{len(runs)}"
        state = _RunState(run_id, req)
        with runs_lock:
            if run_id in runs:
                raise HTTPException(status_code=409, detail=f"run id {run_id} collides")
            runs[run_id] = state
        run_queue.put(state)
        return envelope({"run_id": run_id, "status": state.status})

    def _get_run(run_id: str) -> _RunState:
        with runs_lock:
            state = runs.get(run_id)
        if state is None:
            raise HTTPException(status_code=404, detail=f"unknown run {run_id!r}")
        return state

    @app.get("/api/runs/{run_id}")
    def get_run(run_id: str):
        state = _get_run(run_id)
        doc = {"run_id": run_id, "status": state.status}
        if state.error:
            doc["error"] = state.error
        if state.artifact is not None:
            doc["result_count"] = len(state.artifact.results)
            doc["skipped_count"] = state.artifact.skipped_count
            doc["model_id"] = state.artifact.model_id
        return envelope(doc)

    @app.get("/api/runs/{run_id}/summary")
    def get_summary(run_id: str):
        state = _get_run(run_id)
        if state.artifact is None:
            raise HTTPException(status_code=409, detail=f"run {run_id} is {state.status}")
        rows = engine.summarize(state.artifact)
        return envelope({
            "rows": [
                {
                    "segments": row.segments_name(dataset.schema),
                    "selection": row.selection.sorted_labels(),
                    "counterfactuals": row.counterfactuals,
                    "unchanged": row.unchanged,
                    "skipped": row.skipped,
                    "proportion": row.proportion,
                }
                for row in rows
            ]
        })

    @app.get("/api/runs/{run_id}/results")
    def get_results(run_id: str, offset: int = 0, limit: int = PAGE_LIMIT):
        state = _get_run(run_id)
        if state.artifact is None:
            raise HTTPException(status_code=409, detail=f"run {run_id} is {state.status}")
        limit = max(1, min(limit, PAGE_LIMIT))
        offset = max(0, offset)
        page = state.artifact.results[offset:offset + limit]
        return envelope({
            "total": len(state.artifact.results),
            "offset": offset,
            "limit": limit,
            "results": [
                {
                    "index": offset + i,
                    "target": r.spec.target_id,
                    "source": r.spec.source_id,
                    "selection": r.spec.selection.sorted_labels(),
                    "probability": r.prediction.probability,
                    "label": r.prediction.label,
                    "target_label": r.target_prediction.label,
                    "is_counterfactual": r.is_counterfactual,
                    "skipped": r.skipped,
                }
                for i, r in enumerate(page)
            ],
        })

    @app.get("/api/runs/{run_id}/recombined/{index}/frames/{frame}")
    def get_recombined_frame(run_id: str, index: int, frame: int, overlay: int = 0):
        state = _get_run(run_id)
        if state.artifact is None:
            raise HTTPException(status_code=409, detail=f"run {run_id} is {state.status}")
        if not 0 <= index < len(state.artifact.results):
            raise HTTPException(status_code=404, detail=f"result {index} out of range")
        image = engine.rebuild_recombination(dataset, state.artifact.results[index].spec)
        if not 0 <= frame < image.pixels.shape[0]:
            raise HTTPException(status_code=404, detail=f"frame {frame} out of range")
        labels = image.expected_segmap.labels[frame] if overlay else None
        png = render_frame_png(image.pixels[frame], labels)
        return Response(content=png, media_type="image/png",
                        headers={"X-Dataset-Digest": dataset.digest})

    return app


def serve(dataset_dir, port: int = 8000, host: str = "127.0.0.1"):
    import uvicorn

    app = create_app(dataset_dir)
    uvicorn.run(app, host=host, port=port)
