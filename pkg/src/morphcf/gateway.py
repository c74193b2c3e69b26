"""Uniform prediction interface over built-in and external models.

External models speak a newline-delimited JSON protocol, one message per
volume:

    request:  {"id": str, "frames": int, "height": int, "width": int,
               "pixels": base64 of the raw uint8 buffer, frame-major
               row-major}
    response: {"id": str, "probability": float in [0, 1]}

Responses are matched by id, so they may arrive out of order within a
batch. Only the probability crosses the wire; the 0/1 label is always
derived locally by the shared tie rule (label 1 iff probability > 0.5).

Predictions are cached under a digest of the pixel buffer plus the model
id (plus the segment-map buffer when the backend consumes it), so
recombined images can never collide with originals.
"""
from __future__ import annotations

import base64
import hashlib
import json
import queue
import shlex
import subprocess
import threading
import time
from dataclasses import dataclass

from .core import SegmentMap, Volume, label_from_probability
from .errors import (
    MalformedResponseError,
    ProbabilityRangeError,
    TransportError,
    TransportTimeoutError,
    ValidationError,
)
from .synth import ALPHA, TAU_C, synthetic_classifier


@dataclass(frozen=True)
class Prediction:
    label: int
    probability: float
    model_id: str

    def __post_init__(self):
        if not 0.0 <= self.probability <= 1.0:
            raise ValidationError(f"probability {self.probability} outside [0, 1]")
        if self.label != label_from_probability(self.probability):
            raise ValidationError("label inconsistent with probability tie rule")


@dataclass(frozen=True)
class ExternalModelConfig:
    transport: str  # "subprocess" | "http"
    endpoint: str  # command line or URL
    timeout: float = 30.0
    batch_size: int = 1

    def __post_init__(self):
        if self.transport not in ("subprocess", "http"):
            raise ValidationError(f"unknown transport {self.transport!r}")
        if self.timeout <= 0:
            raise ValidationError("timeout must be > 0")
        if self.batch_size < 1:
            raise ValidationError("batch size must be >= 1")


def parse_model_spec(spec: str) -> ExternalModelConfig | None:
    """CLI model spec: ``synthetic``, ``cmd:<command line>`` or ``http(s)://<url>``."""
    if spec == "synthetic":
        return None
    if spec.startswith("cmd:"):
        return ExternalModelConfig("subprocess", spec[4:])
    if spec.startswith(("http://", "https://")):
        return ExternalModelConfig("http", spec)
    raise ValidationError(f"unknown model spec {spec!r}; use synthetic, cmd:... or http(s)://...")


def encode_request(volume: Volume) -> dict:
    return {
        "id": volume.id,
        "frames": volume.frames,
        "height": volume.height,
        "width": volume.width,
        "pixels": base64.b64encode(volume.pixels.tobytes(order="C")).decode("ascii"),
    }


def _parse_response(line: str, expect_id: str) -> float:
    try:
        doc = json.loads(line)
    except ValueError:
        raise MalformedResponseError(f"unparsable response for {expect_id!r}: {line[:120]!r}",
                                     volume_id=expect_id) from None
    if not isinstance(doc, dict) or "id" not in doc or "probability" not in doc:
        raise MalformedResponseError(f"response missing id/probability for {expect_id!r}",
                                     volume_id=expect_id)
    try:
        probability = float(doc["probability"])
    except (TypeError, ValueError):
        raise MalformedResponseError(
            f"non-numeric probability for {doc.get('id')!r}", volume_id=str(doc.get("id"))
        ) from None
    if not 0.0 <= probability <= 1.0:
        raise ProbabilityRangeError(
            f"probability {probability} outside [0, 1] for {doc['id']!r}",
            volume_id=str(doc["id"]),
        )
    return probability


class _SubprocessTransport:
    """One long-lived worker process; requests serialized per connection."""

    def __init__(self, config: ExternalModelConfig):
        self.config = config
        self._proc = None
        self._lines: queue.Queue = queue.Queue()
        self._lock = threading.Lock()

    def _ensure_started(self):
        if self._proc is not None and self._proc.poll() is None:
            return
        self._proc = subprocess.Popen(
            shlex.split(self.config.endpoint),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
        reader = threading.Thread(target=self._pump, args=(self._proc.stdout,), daemon=True)
        reader.start()

    def _pump(self, stream):
        for line in stream:
            self._lines.put(line)

    def request_many(self, requests: list[dict]) -> dict[str, float]:
        with self._lock:
            self._ensure_started()
            try:
                for req in requests:
                    self._proc.stdin.write(json.dumps(req) + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                raise TransportError(f"model process died: {exc}",
                                     volume_id=requests[0]["id"]) from exc
            pending = {req["id"] for req in requests}
            out: dict[str, float] = {}
            deadline = time.monotonic() + self.config.timeout
            while pending:
                try:
                    line = self._lines.get(timeout=min(0.1, self.config.timeout))
                except queue.Empty:
                    missing = sorted(pending)[0]
                    if self._proc.poll() is not None:
                        raise TransportError(
                            f"model process exited with code {self._proc.returncode}",
                            volume_id=missing,
                        ) from None
                    if time.monotonic() < deadline:
                        continue
                    raise TransportTimeoutError(
                        f"no response within {self.config.timeout}s for {missing!r}",
                        volume_id=missing,
                    ) from None
                probability = _parse_response(line, sorted(pending)[0])
                doc_id = json.loads(line)["id"]
                if doc_id not in pending:
                    raise MalformedResponseError(f"unexpected response id {doc_id!r}",
                                                 volume_id=str(doc_id))
                out[doc_id] = probability
                pending.discard(doc_id)
            return out

    def close(self):
        if self._proc is not None and self._proc.poll() is None:
            try:
                self._proc.stdin.close()
                self._proc.wait(timeout=5)
            except Exception:
                self._proc.kill()
        self._proc = None


class _HttpTransport:
    def __init__(self, config: ExternalModelConfig):
        self.config = config

    def request_many(self, requests: list[dict]) -> dict[str, float]:
        import requests as _requests

        out = {}
        for req in requests:
            try:
                resp = _requests.post(self.config.endpoint, json=req,
                                      timeout=self.config.timeout)
            except _requests.Timeout:
                raise TransportTimeoutError(
                    f"no response within {self.config.timeout}s for {req['id']!r}",
                    volume_id=req["id"],
                ) from None
            except _requests.RequestException as exc:
                raise TransportError(f"request failed for {req['id']!r}: {exc}",
                                     volume_id=req["id"]) from exc
            if resp.status_code != 200:
                raise MalformedResponseError(
                    f"status {resp.status_code} for {req['id']!r}", volume_id=req["id"]
                )
            probability = _parse_response(resp.text, req["id"])
            doc_id = json.loads(resp.text)["id"]
            if doc_id != req["id"]:
                raise MalformedResponseError(
                    f"response id {doc_id!r} does not match request {req['id']!r}",
                    volume_id=req["id"],
                )
            out[req["id"]] = probability
        return out

    def close(self):
        pass


class PredictionGateway:
    """Shareable prediction front; thread-safe cache keyed by content digest."""

    def __init__(self, config: ExternalModelConfig | None = None,
                 alpha: float = ALPHA, tau_c: float = TAU_C):
        self.config = config
        self.alpha = alpha
        self.tau_c = tau_c
        self._cache: dict[str, Prediction] = {}
        self._cache_lock = threading.Lock()
        self.transport_calls = 0
        if config is None:
            self._transport = None
            self.model_id = "synthetic"
        elif config.transport == "subprocess":
            self._transport = _SubprocessTransport(config)
            self.model_id = f"cmd:{config.endpoint}"
        else:
            self._transport = _HttpTransport(config)
            self.model_id = f"http:{config.endpoint}"

    @property
    def is_synthetic(self) -> bool:
        return self._transport is None

    def _cache_key(self, volume: Volume, segmap: SegmentMap | None) -> str:
        h = hashlib.sha256()
        h.update(volume.pixels.tobytes(order="C"))
        if self.is_synthetic and segmap is not None:
            h.update(segmap.labels.tobytes(order="C"))
        h.update(self.model_id.encode())
        return h.hexdigest()

    def predict(self, volume: Volume, segmap: SegmentMap | None = None) -> Prediction:
        key = self._cache_key(volume, segmap)
        with self._cache_lock:
            hit = self._cache.get(key)
        if hit is not None:
            return hit
        if self.is_synthetic:
            if segmap is None:
                raise ValidationError("synthetic model needs a segment map")
            label, probability = synthetic_classifier(volume, segmap,
                                                      alpha=self.alpha, tau_c=self.tau_c)
        else:
            self.transport_calls += 1
            responses = self._transport.request_many([encode_request(volume)])
            probability = responses[volume.id]
            label = label_from_probability(probability)
        pred = Prediction(label=label, probability=probability, model_id=self.model_id)
        with self._cache_lock:
            self._cache[key] = pred
        return pred

    def predict_batch(self, items: list[tuple[Volume, SegmentMap | None]]) -> list[Prediction]:
        """Predict many volumes, batching external requests by batch_size."""
        if self.is_synthetic:
            return [self.predict(v, m) for v, m in items]
        out: list[Prediction | None] = [None] * len(items)
        batch: list[int] = []
        for i, (volume, segmap) in enumerate(items):
            key = self._cache_key(volume, segmap)
            with self._cache_lock:
                hit = self._cache.get(key)
            if hit is not None:
                out[i] = hit
            else:
                batch.append(i)
        size = self.config.batch_size if self.config else 1
        for start in range(0, len(batch), size):
            chunk = batch[start:start + size]
            requests = [encode_request(items[i][0]) for i in chunk]
            self.transport_calls += len(requests)
            responses = self._transport.request_many(requests)
            for i in chunk:
                volume, segmap = items[i]
                probability = responses[volume.id]
                pred = Prediction(label_from_probability(probability), probability, self.model_id)
                with self._cache_lock:
                    self._cache[self._cache_key(volume, segmap)] = pred
                out[i] = pred
        return out  # type: ignore[return-value]

    def close(self):
        if self._transport is not None:
            self._transport.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
