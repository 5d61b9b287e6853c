"""PII detection: LLM protocol front-end and a rule-based baseline.

The LLM route renders an Alpaca-style prompt (shared wrapper plus a
pretrained or fine-tuned instruction) and expects a string-keyed JSON
object {"span text": {"type": ..., "relevance": ...}}. Real model output
often wraps that object in prose, so parsing scans for the first balanced
top-level object instead of trusting the whole response.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass

from .gateway import Gateway, LlmParams, PromptCatalog, render_prompt
from .model import PiiSpan, PiiType, SpanNotFoundError, UnknownPiiTypeError, locate_span, parse_pii_type

logger = logging.getLogger(__name__)


class DetectionParseError(ValueError):
    """No balanced JSON object in the model output. raw is kept for audit."""

    def __init__(self, message: str, raw: str):
        self.raw = raw
        super().__init__(message)


@dataclass(frozen=True, slots=True)
class DetectionEntry:
    text: str
    pii_type: PiiType
    relevance: int


@dataclass(frozen=True, slots=True)
class ParseOutcome:
    """Entries plus counts of what was dropped on the way."""

    entries: tuple[DetectionEntry, ...]
    dropped_unknown_type: int = 0
    dropped_malformed: int = 0


@dataclass(frozen=True, slots=True)
class DetectionResult:
    entries: tuple[DetectionEntry, ...]
    raw_output: str
    dropped_unknown_type: int = 0
    dropped_malformed: int = 0
    dropped_absent: int = 0


def extract_balanced_object(raw: str) -> str:
    """Return the first balanced top-level {...} in raw, prose tolerated."""
    start = raw.find("{")
    while start != -1:
        depth = 0
        in_string = False
        escape = False
        for i in range(start, len(raw)):
            ch = raw[i]
            if in_string:
                if escape:
                    escape = False
                elif ch == "\\":
                    escape = True
                elif ch == '"':
                    in_string = False
                continue
            if ch == '"':
                in_string = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    return raw[start : i + 1]
        start = raw.find("{", start + 1)
    raise DetectionParseError("no balanced JSON object in output", raw)


def _parse_relevance(value) -> int | None:
    if isinstance(value, bool):
        return None
    if isinstance(value, int) and value in (0, 1):
        return value
    if isinstance(value, str) and value.strip() in ("0", "1"):
        return int(value.strip())
    return None


def parse_detection_output(raw: str) -> ParseOutcome:
    """Parse model output into entries, dropping what cannot be used.

    Unknown types (after aliasing) and malformed values are dropped and
    counted, never fatal; only a missing balanced object raises
    DetectionParseError.
    """
    snippet = extract_balanced_object(raw)
    try:
        obj = json.loads(snippet)
    except json.JSONDecodeError as exc:
        raise DetectionParseError(f"balanced snippet is not valid JSON: {exc.msg}", raw) from exc
    if not isinstance(obj, dict):
        raise DetectionParseError("top-level JSON value is not an object", raw)
    entries: list[DetectionEntry] = []
    dropped_unknown = 0
    dropped_malformed = 0
    for key, value in obj.items():
        if not isinstance(value, dict) or not str(key):
            dropped_malformed += 1
            continue
        relevance = _parse_relevance(value.get("relevance"))
        type_label = value.get("type")
        if relevance is None or not isinstance(type_label, str):
            dropped_malformed += 1
            continue
        try:
            pii_type = parse_pii_type(type_label)
        except UnknownPiiTypeError:
            dropped_unknown += 1
            continue
        entries.append(DetectionEntry(text=str(key), pii_type=pii_type, relevance=relevance))
    return ParseOutcome(
        entries=tuple(entries),
        dropped_unknown_type=dropped_unknown,
        dropped_malformed=dropped_malformed,
    )


def serialize_entries(entries: list[DetectionEntry] | tuple[DetectionEntry, ...]) -> str:
    """Entries back to the protocol's string-keyed JSON object."""
    obj = {e.text: {"type": e.pii_type.value, "relevance": str(e.relevance)} for e in entries}
    return json.dumps(obj, ensure_ascii=False)


def build_detection_prompt(
    context: str,
    question: str,
    instruction_variant: str = "finetuned",
    catalog: PromptCatalog | None = None,
) -> str:
    catalog = catalog or PromptCatalog()
    if instruction_variant not in ("pretrained", "finetuned"):
        raise ValueError(f"unknown instruction variant {instruction_variant!r}")
    instruction = catalog.get(f"detect_instruction_{instruction_variant}").body
    return render_prompt(
        catalog.get("detect_shared"),
        {"instruction": instruction, "context": context, "question": question},
    )


def detect_llm(
    context: str,
    question: str,
    gateway: Gateway,
    params: LlmParams | None = None,
    instruction_variant: str = "finetuned",
    catalog: PromptCatalog | None = None,
) -> DetectionResult:
    """Run the detection protocol once for one (context, question) pair.

    Entries whose text does not occur in the context are dropped and
    counted; the raw model output is always retained.
    """
    prompt = build_detection_prompt(context, question, instruction_variant, catalog)
    raw = gateway.complete(prompt, params)
    outcome = parse_detection_output(raw)
    kept = tuple(e for e in outcome.entries if e.text in context)
    return DetectionResult(
        entries=kept,
        raw_output=raw,
        dropped_unknown_type=outcome.dropped_unknown_type,
        dropped_malformed=outcome.dropped_malformed,
        dropped_absent=len(outcome.entries) - len(kept),
    )


# rule-based baseline patterns; matched in order, first match on a range wins
_MONTH = (
    "January|February|March|April|May|June|July|August|September|October|November|December"
)
_RULES: list[tuple[PiiType, re.Pattern[str]]] = [
    (PiiType.CODE, re.compile(r"\b[A-Z]{1,4}-\d{3,10}\b")),
    (PiiType.CODE, re.compile(r"\b[A-Z]{2,5}\d{4,10}\b")),
    (PiiType.DATETIME, re.compile(r"\b\d{4}-\d{2}-\d{2}\b")),
    (PiiType.DATETIME, re.compile(r"\b\d{1,2}/\d{1,2}/\d{2,4}\b")),
    (PiiType.DATETIME, re.compile(rf"\b(?:{_MONTH})\s+\d{{1,2}},?\s+\d{{4}}\b")),
    (PiiType.DATETIME, re.compile(rf"\b(?:{_MONTH})\s+\d{{4}}\b")),
    (PiiType.DATETIME, re.compile(r"\b\d{1,2}:\d{2}\s?(?:am|pm|AM|PM)?\b")),
    (PiiType.AGE, re.compile(r"\b\d{1,3}[- ]years?[- ]old\b")),
    (PiiType.AGE, re.compile(r"\baged \d{1,3}\b")),
    (PiiType.NAME, re.compile(r"\b[A-Z][a-z]+ [A-Z][a-z]+\b")),
]


def detect_rules(context: str) -> DetectionResult:
    """Non-contextual regex baseline for code/datetime/age/name.

    Every entry gets relevance 0: the baseline has no notion of a
    question. Deterministic by construction.
    """
    taken: list[tuple[int, int]] = []
    found: list[tuple[int, DetectionEntry]] = []
    for pii_type, pattern in _RULES:
        for m in pattern.finditer(context):
            lo, hi = m.span()
            if any(lo < t_hi and t_lo < hi for t_lo, t_hi in taken):
                continue
            taken.append((lo, hi))
            found.append((lo, DetectionEntry(text=m.group(), pii_type=pii_type, relevance=0)))
    found.sort(key=lambda pair: pair[0])
    return DetectionResult(entries=tuple(e for _, e in found), raw_output="")


def localize_predictions(
    context: str, result: DetectionResult
) -> tuple[list[PiiSpan], int]:
    """Map string entries to offsets with a shared consumed set.

    Duplicate surface strings enumerate occurrences left to right. Returns
    the localized spans plus the count of unlocalizable entries.
    """
    consumed: set[tuple[int, int]] = set()
    spans: list[PiiSpan] = []
    unlocalizable = 0
    for entry in result.entries:
        try:
            start, end = locate_span(context, entry.text, consumed)
        except (SpanNotFoundError, ValueError):
            unlocalizable += 1
            continue
        consumed.add((start, end))
        spans.append(PiiSpan(entry.text, start, end, entry.pii_type, entry.relevance))
    spans.sort(key=lambda s: s.start)
    return spans, unlocalizable


def prediction_to_record(sample_id: str, result: DetectionResult) -> dict:
    return {
        "sample_id": sample_id,
        "entries": [
            {"text": e.text, "type": e.pii_type.value, "relevance": e.relevance}
            for e in result.entries
        ],
        "raw_output": result.raw_output,
    }


def record_to_prediction(record: dict) -> tuple[str, DetectionResult]:
    entries = tuple(
        DetectionEntry(
            text=str(e["text"]),
            pii_type=parse_pii_type(str(e["type"])),
            relevance=int(e["relevance"]),
        )
        for e in record.get("entries", [])
    )
    return str(record["sample_id"]), DetectionResult(
        entries=entries, raw_output=str(record.get("raw_output", ""))
    )


def load_predictions(path: str) -> dict[str, DetectionResult]:
    out: dict[str, DetectionResult] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DetectionParseError(f"predictions line {line_no}: {exc.msg}", line) from exc
            sample_id, result = record_to_prediction(record)
            out[sample_id] = result
    return out
