"""Core data model for question-conditioned PII annotations.

A sample is a first-person context paired with a question and a set of
non-overlapping character spans. Each span carries a type from a fixed
taxonomy and a binary relevance: 1 when the span is needed to answer the
question well, 0 when it is peripheral. Offsets count Unicode code points
and are the ground truth; span text must equal the context slice exactly.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass


class UnknownPiiTypeError(ValueError):
    """Raised when a type label is outside the taxonomy and alias table."""


class SpanNotFoundError(LookupError):
    """Raised when a needle has no unconsumed occurrence in the context."""

    def __init__(self, needle: str, context_preview: str = ""):
        self.needle = needle
        msg = f"span text not found: {needle!r}"
        if context_preview:
            msg += f" in context starting {context_preview!r}"
        super().__init__(msg)


class PiiType(str, enum.Enum):
    OCCUPATION = "occupation"
    HEALTH = "health"
    DEMOGRAPHIC = "demographic"
    FINANCE = "finance"
    AGE = "age"
    EDUCATION = "education"
    LOCATION = "location"
    ORGANIZATION = "organization"
    RELATIONSHIP = "relationship"
    SEXUAL_ORIENTATION = "sexual orientation"
    BELIEF = "belief"
    NAME = "name"
    CODE = "code"
    DATETIME = "datetime"
    APPEARANCE = "appearance"

    def __str__(self) -> str:  # noqa: D105
        return self.value

    @property
    def placeholder(self) -> str:
        """Redaction placeholder, e.g. [SEXUAL_ORIENTATION]."""
        return "[" + self.value.upper().replace(" ", "_") + "]"


TAXONOMY: tuple[PiiType, ...] = tuple(PiiType)

# Labels seen in external data that map onto the taxonomy. Applied on
# ingest; any other unknown label is an error.
TYPE_ALIASES: dict[str, PiiType] = {
    "family": PiiType.RELATIONSHIP,
    "nationality": PiiType.DEMOGRAPHIC,
    "medical condition": PiiType.HEALTH,
}

_BY_LABEL = {t.value: t for t in TAXONOMY}


def parse_pii_type(label: str) -> PiiType:
    """Resolve a raw type label to a taxonomy member, applying aliases.

    Matching is case-insensitive and tolerant of surrounding whitespace
    and underscore-for-space spellings. Raises UnknownPiiTypeError for
    anything else.
    """
    norm = label.strip().casefold().replace("_", " ")
    if norm in _BY_LABEL:
        return _BY_LABEL[norm]
    if norm in TYPE_ALIASES:
        return TYPE_ALIASES[norm]
    raise UnknownPiiTypeError(f"unknown PII type label: {label!r}")


class Provenance(str, enum.Enum):
    SYNTHETIC = "synthetic"
    REDDIT = "reddit"
    OTHER = "other"

    def __str__(self) -> str:  # noqa: D105
        return self.value


class Status(str, enum.Enum):
    RAW = "raw"
    VALIDATED = "validated"

    def __str__(self) -> str:  # noqa: D105
        return self.value


@dataclass(frozen=True, slots=True)
class PiiSpan:
    """One annotated span.

    Attributes:
        text: exact substring of the context.
        start: inclusive character offset.
        end: exclusive character offset.
        pii_type: taxonomy member.
        relevance: 1 if needed to answer the question, else 0.
    """

    text: str
    start: int
    end: int
    pii_type: PiiType
    relevance: int


@dataclass(frozen=True, slots=True)
class Sample:
    """A context/question pair with its PII span annotations."""

    id: str
    context: str
    question: str
    spans: tuple[PiiSpan, ...]
    provenance: Provenance = Provenance.OTHER
    status: Status = Status.RAW
    revision: int = 0


@dataclass(frozen=True, slots=True)
class Violation:
    """One validation finding. code is stable, message is for humans."""

    code: str
    message: str
    span_index: int | None = None

    def __str__(self) -> str:  # noqa: D105
        where = f" (span {self.span_index})" if self.span_index is not None else ""
        return f"{self.code}{where}: {self.message}"


def validate_sample(sample: Sample) -> list[Violation]:
    """Check every invariant and return all violations, never just the first.

    An empty list means the sample is valid. Checks: non-empty id,
    relevance domain, offset bounds and ordering, text/slice agreement,
    span ordering by start, span overlap, and non-negative revision.
    """
    violations: list[Violation] = []
    if not sample.id:
        violations.append(Violation("empty-id", "sample id must be non-empty"))
    if sample.revision < 0:
        violations.append(
            Violation("negative-revision", f"revision is {sample.revision}")
        )
    n = len(sample.context)
    for i, span in enumerate(sample.spans):
        if not isinstance(span.pii_type, PiiType):
            violations.append(
                Violation("unknown-type", f"type {span.pii_type!r} not in taxonomy", i)
            )
        if span.relevance not in (0, 1):
            violations.append(
                Violation("bad-relevance", f"relevance must be 0 or 1, got {span.relevance!r}", i)
            )
        if not (0 <= span.start < span.end <= n):
            violations.append(
                Violation(
                    "bad-offsets",
                    f"offsets [{span.start}, {span.end}) out of range for context of length {n}",
                    i,
                )
            )
            continue
        if sample.context[span.start : span.end] != span.text:
            violations.append(
                Violation(
                    "text-mismatch",
                    f"context[{span.start}:{span.end}] == "
                    f"{sample.context[span.start:span.end]!r}, span text is {span.text!r}",
                    i,
                )
            )
    starts = [s.start for s in sample.spans]
    if starts != sorted(starts):
        violations.append(Violation("unsorted-spans", "spans must be sorted by start"))
    by_start = sorted(sample.spans, key=lambda s: (s.start, s.end))
    for prev, cur in zip(by_start, by_start[1:]):
        if prev.end > cur.start:
            violations.append(
                Violation(
                    "overlap",
                    f"spans [{prev.start}, {prev.end}) and [{cur.start}, {cur.end}) overlap",
                )
            )
    return violations


def locate_span(
    context: str,
    needle: str,
    consumed: set[tuple[int, int]] | list[tuple[int, int]] | tuple = (),
) -> tuple[int, int]:
    """Find the leftmost occurrence of needle not intersecting consumed ranges.

    Repeated calls that add each result to `consumed` enumerate duplicate
    occurrences left to right. Offsets count Unicode code points. Raises
    SpanNotFoundError when every occurrence is consumed or absent.
    """
    if not needle:
        raise ValueError("needle must be non-empty")
    idx = context.find(needle)
    while idx != -1:
        lo, hi = idx, idx + len(needle)
        if not any(lo < c_hi and c_lo < hi for c_lo, c_hi in consumed):
            return (lo, hi)
        idx = context.find(needle, idx + 1)
    raise SpanNotFoundError(needle, context[:40])
