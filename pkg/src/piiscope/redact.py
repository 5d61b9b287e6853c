"""Masking strategies over annotated contexts."""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .model import PiiSpan


class RangeOutOfBoundsError(IndexError):
    """A replacement range does not fit the context."""


class MaskStrategy(str, enum.Enum):
    FULL = "full"
    LOW_RELEVANCE_ONLY = "low_relevance_only"

    def __str__(self) -> str:  # noqa: D105
        return self.value


@dataclass(frozen=True, slots=True)
class RedactionPlan:
    """Disjoint, sorted replacement ranges plus the overlap-merge count."""

    replacements: tuple[tuple[int, int, str], ...]
    merged: int = 0


def plan_redaction(spans: list[PiiSpan] | tuple[PiiSpan, ...], strategy: MaskStrategy) -> RedactionPlan:
    """Select spans per strategy and merge overlaps into single replacements.

    full masks every span; low_relevance_only masks only relevance-0 spans.
    Overlapping selected ranges collapse to one replacement covering their
    union; its placeholder takes the type of the longest constituent span,
    ties going to the earliest start.
    """
    if strategy is MaskStrategy.FULL:
        selected = list(spans)
    else:
        selected = [s for s in spans if s.relevance == 0]
    selected.sort(key=lambda s: (s.start, s.end))
    replacements: list[tuple[int, int, str]] = []
    merged = 0
    i = 0
    while i < len(selected):
        group = [selected[i]]
        end = selected[i].end
        j = i + 1
        while j < len(selected) and selected[j].start < end:
            group.append(selected[j])
            end = max(end, selected[j].end)
            j += 1
        dominant = max(group, key=lambda s: (s.end - s.start, -s.start))
        replacements.append((group[0].start, end, dominant.pii_type.placeholder))
        merged += len(group) - 1
        i = j
    return RedactionPlan(replacements=tuple(replacements), merged=merged)


def apply_redaction(context: str, plan: RedactionPlan) -> str:
    """Apply replacements right-to-left so earlier offsets stay valid."""
    n = len(context)
    for start, end, _ in plan.replacements:
        if not (0 <= start < end <= n):
            raise RangeOutOfBoundsError(
                f"replacement [{start}, {end}) out of range for context of length {n}"
            )
    out = context
    for start, end, placeholder in sorted(plan.replacements, reverse=True):
        out = out[:start] + placeholder + out[end:]
    return out


def redact_context(
    context: str, spans: list[PiiSpan] | tuple[PiiSpan, ...], strategy: MaskStrategy
) -> tuple[str, RedactionPlan]:
    plan = plan_redaction(spans, strategy)
    return apply_redaction(context, plan), plan
