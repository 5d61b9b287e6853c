"""JSONL dataset serialization and per-type statistics."""

from __future__ import annotations

import json
import logging
import os
import tempfile
from dataclasses import dataclass

from .model import (
    PiiSpan,
    PiiType,
    Provenance,
    Sample,
    Status,
    TAXONOMY,
    UnknownPiiTypeError,
    Violation,
    parse_pii_type,
    validate_sample,
)

logger = logging.getLogger(__name__)


class DatasetParseError(ValueError):
    """A line is not valid JSON or lacks required fields."""

    def __init__(self, line_no: int, message: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


class DatasetValidationError(ValueError):
    """A parsed sample violates the data model invariants."""

    def __init__(self, sample_id: str, violations: list[Violation]):
        self.sample_id = sample_id
        self.violations = violations
        detail = "; ".join(str(v) for v in violations)
        super().__init__(f"sample {sample_id!r}: {detail}")


def span_to_record(span: PiiSpan) -> dict:
    return {
        "text": span.text,
        "start": span.start,
        "end": span.end,
        "type": span.pii_type.value,
        "relevance": span.relevance,
    }


def sample_to_record(sample: Sample) -> dict:
    return {
        "id": sample.id,
        "context": sample.context,
        "question": sample.question,
        "spans": [span_to_record(s) for s in sample.spans],
        "provenance": sample.provenance.value,
        "status": sample.status.value,
        "revision": sample.revision,
    }


def record_to_sample(record: dict) -> Sample:
    """Build a Sample from a parsed JSON record, applying type aliases.

    Raises DatasetValidationError (naming the sample) for unknown types or
    enum values; structural invariants are checked separately by
    validate_sample.
    """
    sample_id = str(record.get("id", ""))
    problems: list[Violation] = []
    spans: list[PiiSpan] = []
    for i, raw in enumerate(record.get("spans", [])):
        try:
            pii_type = parse_pii_type(str(raw["type"]))
        except UnknownPiiTypeError as exc:
            problems.append(Violation("unknown-type", str(exc), i))
            continue
        relevance = raw.get("relevance")
        if isinstance(relevance, str) and relevance in ("0", "1"):
            relevance = int(relevance)
        spans.append(
            PiiSpan(
                text=str(raw.get("text", "")),
                start=int(raw.get("start", -1)),
                end=int(raw.get("end", -1)),
                pii_type=pii_type,
                relevance=relevance if isinstance(relevance, int) else -1,
            )
        )
    try:
        provenance = Provenance(record.get("provenance", "other"))
    except ValueError:
        problems.append(
            Violation("bad-provenance", f"unknown provenance {record.get('provenance')!r}")
        )
        provenance = Provenance.OTHER
    try:
        status = Status(record.get("status", "raw"))
    except ValueError:
        problems.append(Violation("bad-status", f"unknown status {record.get('status')!r}"))
        status = Status.RAW
    sample = Sample(
        id=sample_id,
        context=str(record.get("context", "")),
        question=str(record.get("question", "")),
        spans=tuple(spans),
        provenance=provenance,
        status=status,
        revision=int(record.get("revision", 0)),
    )
    problems.extend(validate_sample(sample))
    if problems:
        raise DatasetValidationError(sample_id, problems)
    return sample


def load_dataset(path: str) -> list[Sample]:
    """Read a JSONL dataset file, validating every sample.

    Parse failures report the 1-based line number; validation failures
    report the sample id and every violated invariant.
    """
    samples: list[Sample] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetParseError(line_no, f"invalid JSON: {exc.msg}") from exc
            if not isinstance(record, dict):
                raise DatasetParseError(line_no, "record must be a JSON object")
            samples.append(record_to_sample(record))
    return samples


def atomic_write_text(path: str, text: str) -> None:
    """Write text to path via a temp file and rename, never a partial file."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps_sample(sample: Sample) -> str:
    return json.dumps(sample_to_record(sample), ensure_ascii=False)


def save_dataset(samples: list[Sample], path: str) -> None:
    """Write samples as JSONL atomically, one record per line."""
    text = "".join(dumps_sample(s) + "\n" for s in samples)
    atomic_write_text(path, text)


@dataclass(frozen=True, slots=True)
class TypeStats:
    """Per-type span tally. Proportions are None when total_count is 0."""

    total_count: int
    high_proportion: float | None
    low_proportion: float | None


@dataclass(frozen=True, slots=True)
class DatasetStats:
    n_samples: int
    n_spans: int
    per_type: dict[PiiType, TypeStats]


def compute_stats(samples: list[Sample]) -> DatasetStats:
    """Tally spans per type with high/low relevance proportions.

    Every taxonomy type appears in the result; types with no spans get
    count 0 and undefined (None) proportions.
    """
    totals = {t: 0 for t in TAXONOMY}
    highs = {t: 0 for t in TAXONOMY}
    n_spans = 0
    for sample in samples:
        for span in sample.spans:
            totals[span.pii_type] += 1
            n_spans += 1
            if span.relevance == 1:
                highs[span.pii_type] += 1
    per_type: dict[PiiType, TypeStats] = {}
    for t in TAXONOMY:
        if totals[t] == 0:
            per_type[t] = TypeStats(0, None, None)
        else:
            high = highs[t] / totals[t]
            per_type[t] = TypeStats(totals[t], high, 1.0 - high)
    return DatasetStats(n_samples=len(samples), n_spans=n_spans, per_type=per_type)


def stats_to_record(stats: DatasetStats) -> dict:
    return {
        "n_samples": stats.n_samples,
        "n_spans": stats.n_spans,
        "per_type": {
            t.value: {
                "total_count": ts.total_count,
                "high_proportion": ts.high_proportion,
                "low_proportion": ts.low_proportion,
            }
            for t, ts in stats.per_type.items()
        },
    }


def format_stats_table(stats: DatasetStats) -> str:
    """Aligned text table: one row per type, counts and proportions."""
    header = f"{'PII type':<20} {'Count':>7} {'High':>7} {'Low':>7}"
    rows = [header, "-" * len(header)]
    for t in TAXONOMY:
        ts = stats.per_type[t]
        if ts.total_count == 0:
            rows.append(f"{t.value:<20} {0:>7} {'--':>7} {'--':>7}")
        else:
            rows.append(
                f"{t.value:<20} {ts.total_count:>7} "
                f"{ts.high_proportion:>7.2f} {ts.low_proportion:>7.2f}"
            )
    rows.append(
        f"{'total':<20} {stats.n_spans:>7}   over {stats.n_samples} samples"
    )
    return "\n".join(rows)
