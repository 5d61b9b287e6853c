"""Annotation review: a durable sample store and its HTTP face.

The store keeps the whole dataset in memory, serializes edits per sample
id through optimistic revision checks, and persists every acknowledged
update by atomically rewriting the dataset file and appending an audit
record before returning. Restarting from the same path reproduces the
exact post-update state.
"""

from __future__ import annotations

import json
import logging
import os
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, Header, HTTPException, Query
from fastapi.responses import HTMLResponse, JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .dataset import (
    DatasetValidationError,
    compute_stats,
    load_dataset,
    record_to_sample,
    sample_to_record,
    save_dataset,
    stats_to_record,
)
from .model import Provenance, Sample, Status, Violation

logger = logging.getLogger(__name__)


class NotFoundError(KeyError):
    def __init__(self, sample_id: str):
        self.sample_id = sample_id
        super().__init__(f"no sample with id {sample_id!r}")


class RevisionConflictError(RuntimeError):
    """expected_revision no longer matches the stored sample."""

    def __init__(self, sample_id: str, expected: int, actual: int):
        self.sample_id = sample_id
        self.expected = expected
        self.actual = actual
        super().__init__(
            f"sample {sample_id!r}: expected revision {expected}, stored is {actual}"
        )


class ReviewValidationError(DatasetValidationError):
    """An update would leave the sample in an invalid state."""


@dataclass(frozen=True, slots=True)
class ReviewUpdate:
    sample_id: str
    expected_revision: int
    new_context: str | None = None
    new_question: str | None = None
    new_spans: list[dict] | None = None
    new_status: str | None = None

    def changed_fields(self) -> list[str]:
        names = ("new_context", "new_question", "new_spans", "new_status")
        return [n for n in names if getattr(self, n) is not None]


class ReviewStore:
    """Thread-safe dataset store with per-sample write serialization."""

    def __init__(self, dataset_path: str, audit_log_path: str | None = None):
        self.dataset_path = str(dataset_path)
        self.audit_log_path = audit_log_path or self.dataset_path + ".audit.jsonl"
        self._samples: dict[str, Sample] = {
            s.id: s for s in load_dataset(self.dataset_path)
        }
        self._registry_lock = threading.Lock()
        self._sample_locks: dict[str, threading.Lock] = {}
        self._io_lock = threading.Lock()

    def _lock_for(self, sample_id: str) -> threading.Lock:
        with self._registry_lock:
            return self._sample_locks.setdefault(sample_id, threading.Lock())

    def list_samples(
        self, status: Status | None = None, provenance: Provenance | None = None
    ) -> list[dict]:
        with self._registry_lock:
            snapshot = list(self._samples.values())
        rows = []
        for s in sorted(snapshot, key=lambda s: s.id):
            if status is not None and s.status is not status:
                continue
            if provenance is not None and s.provenance is not provenance:
                continue
            rows.append(
                {
                    "id": s.id,
                    "status": s.status.value,
                    "revision": s.revision,
                    "span_count": len(s.spans),
                }
            )
        return rows

    def get_sample(self, sample_id: str) -> Sample:
        with self._registry_lock:
            sample = self._samples.get(sample_id)
        if sample is None:
            raise NotFoundError(sample_id)
        return sample

    def stats(self):
        with self._registry_lock:
            snapshot = list(self._samples.values())
        return compute_stats(snapshot)

    def update_sample(self, update: ReviewUpdate, annotator: str = "anonymous") -> int:
        """Apply one edit; returns the new revision.

        The rewrite of the dataset file and the audit append both complete
        before the in-memory commit, so an acknowledged update is always
        on disk and a failed write leaves no trace in memory.
        """
        fields = update.changed_fields()
        if not fields:
            raise ReviewValidationError(
                update.sample_id, [Violation("empty-update", "no new_* field present")]
            )
        with self._lock_for(update.sample_id):
            current = self._samples.get(update.sample_id)
            if current is None:
                raise NotFoundError(update.sample_id)
            if update.expected_revision != current.revision:
                raise RevisionConflictError(
                    update.sample_id, update.expected_revision, current.revision
                )
            record = sample_to_record(current)
            if update.new_context is not None:
                record["context"] = update.new_context
            if update.new_question is not None:
                record["question"] = update.new_question
            if update.new_spans is not None:
                record["spans"] = update.new_spans
            if update.new_status is not None:
                record["status"] = update.new_status
            record["revision"] = current.revision + 1
            try:
                candidate = record_to_sample(record)
            except DatasetValidationError as exc:
                raise ReviewValidationError(exc.sample_id, exc.violations) from exc

            with self._io_lock:
                rows = dict(self._samples)
                rows[candidate.id] = candidate
                save_dataset(list(rows.values()), self.dataset_path)
                self._append_audit(annotator, candidate.id, candidate.revision, fields)
                with self._registry_lock:
                    self._samples[candidate.id] = candidate
            return candidate.revision

    def _append_audit(
        self, annotator: str, sample_id: str, revision: int, fields: list[str]
    ) -> None:
        entry = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "annotator": annotator,
            "sample_id": sample_id,
            "revision": revision,
            "fields": fields,
        }
        with open(self.audit_log_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, ensure_ascii=False) + "\n")
            fh.flush()
            os.fsync(fh.fileno())


_PLACEHOLDER_PAGE = """<!doctype html>
<html><head><meta charset="utf-8"><title>piiscope review</title></head>
<body style="font-family: sans-serif; margin: 3rem;">
<h1>piiscope review service</h1>
<p>The annotation UI bundle is not installed. The JSON API is live:</p>
<ul>
<li><code>GET /samples</code></li>
<li><code>GET /samples/{id}</code></li>
<li><code>PUT /samples/{id}</code></li>
<li><code>GET /stats</code></li>
</ul>
</body></html>"""


class UpdateBody(BaseModel):
    expected_revision: int
    new_context: str | None = None
    new_question: str | None = None
    new_spans: list[dict] | None = None
    new_status: str | None = None


def create_app(store: ReviewStore, frontend_dir: str | None = None) -> FastAPI:
    """Wire the store into HTTP routes plus the static UI (or placeholder)."""
    app = FastAPI(title="piiscope review service")
    app.state.store = store

    @app.get("/samples")
    def list_samples(
        status: str | None = Query(default=None),
        provenance: str | None = Query(default=None),
    ):
        try:
            status_f = Status(status) if status else None
            prov_f = Provenance(provenance) if provenance else None
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return store.list_samples(status_f, prov_f)

    @app.get("/samples/{sample_id}")
    def get_sample(sample_id: str):
        try:
            return sample_to_record(store.get_sample(sample_id))
        except NotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc))

    @app.put("/samples/{sample_id}")
    def update_sample(
        sample_id: str,
        body: UpdateBody,
        x_annotator: str = Header(default="anonymous", alias="X-Annotator"),
    ):
        update = ReviewUpdate(
            sample_id=sample_id,
            expected_revision=body.expected_revision,
            new_context=body.new_context,
            new_question=body.new_question,
            new_spans=body.new_spans,
            new_status=body.new_status,
        )
        try:
            new_revision = store.update_sample(update, annotator=x_annotator)
        except RevisionConflictError as exc:
            return JSONResponse(
                status_code=409,
                content={
                    "error": str(exc),
                    "expected_revision": exc.expected,
                    "actual_revision": exc.actual,
                },
            )
        except ReviewValidationError as exc:
            return JSONResponse(
                status_code=400,
                content={
                    "error": str(exc),
                    "violations": [
                        {"code": v.code, "message": v.message, "span_index": v.span_index}
                        for v in exc.violations
                    ],
                },
            )
        except NotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        return {"new_revision": new_revision}

    @app.get("/stats")
    def stats():
        return stats_to_record(store.stats())

    index = Path(frontend_dir) / "index.html" if frontend_dir else None
    if index is not None and index.is_file():
        app.mount("/", StaticFiles(directory=frontend_dir, html=True), name="ui")
    else:
        if frontend_dir:
            logger.warning("frontend dir %s has no index.html; serving placeholder", frontend_dir)

        @app.get("/", response_class=HTMLResponse)
        def placeholder():
            return _PLACEHOLDER_PAGE

    return app
