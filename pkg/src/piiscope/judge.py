"""Downstream utility evaluation with pairwise LLM judging.

For each sample the context is masked two ways (everything vs only the
low-relevance spans), a QA answer is generated for each masking, and a
judge model picks the better answer while seeing the original unmasked
context. Each pair is judged twice with the answer positions swapped to
cancel position bias; `single_pass=True` skips the swap for replication
of single-judgment setups.
"""

from __future__ import annotations

import enum
import logging
import re
from dataclasses import dataclass, field

from .gateway import Gateway, PromptCatalog, render_prompt
from .model import PiiSpan, Sample
from .redact import MaskStrategy, redact_context

logger = logging.getLogger(__name__)


class InvalidInputError(ValueError):
    """Caller-supplied text is unusable (for example an empty question)."""


class VerdictParseError(ValueError):
    """Judge output contained no verdict marker."""

    def __init__(self, raw: str):
        self.raw = raw
        super().__init__(f"no verdict marker in judge output: {raw[:120]!r}")


class Verdict(str, enum.Enum):
    A = "A"
    B = "B"
    EQUAL = "Equal"


@dataclass(frozen=True, slots=True)
class JudgeVerdict:
    outcome: Verdict
    order_swapped: bool
    reasoning: str


class PairOutcome(str, enum.Enum):
    WIN_LOW = "win_low_relevance"
    WIN_FULL = "win_full"
    EQUAL = "equal"


@dataclass(frozen=True, slots=True)
class PairRecord:
    sample_id: str
    verdicts: tuple[JudgeVerdict, ...]
    outcome: PairOutcome


@dataclass(slots=True)
class UtilityReport:
    n_pairs: int = 0
    wins_low_relevance: int = 0
    wins_full: int = 0
    equals: int = 0
    preference_score: float | None = None
    strict_score: float | None = None
    per_sample: list[PairRecord] = field(default_factory=list)
    errors: list[tuple[str, str]] = field(default_factory=list)


def answer_question(
    gateway: Gateway, context: str, question: str, catalog: PromptCatalog | None = None
) -> str:
    """Three-sentence-style answer grounded in the (possibly masked) context."""
    if not question.strip():
        raise InvalidInputError("question is empty")
    catalog = catalog or PromptCatalog()
    prompt = render_prompt(
        catalog.get("qa_answer"), {"context": context, "question": question}
    )
    return gateway.complete(prompt).strip()


_MARKER = re.compile(r"<b>(A|B|Equal)</b>")


def parse_verdict(raw: str, order_swapped: bool = False) -> JudgeVerdict:
    """Take the LAST marker so preceding reasoning cannot fake a verdict."""
    matches = _MARKER.findall(raw)
    if not matches:
        raise VerdictParseError(raw)
    return JudgeVerdict(outcome=Verdict(matches[-1]), order_swapped=order_swapped, reasoning=raw)


def judge_pair(
    gateway: Gateway,
    context: str,
    question: str,
    answer_a: str,
    answer_b: str,
    *,
    order_swapped: bool = False,
    catalog: PromptCatalog | None = None,
) -> JudgeVerdict:
    """One judgment call. context must be the original unmasked context."""
    catalog = catalog or PromptCatalog()
    prompt = render_prompt(
        catalog.get("judge_pairwise"),
        {
            "context": context,
            "question": question,
            "answer_A": answer_a,
            "answer_B": answer_b,
        },
    )
    return parse_verdict(gateway.complete(prompt), order_swapped)


def aggregate_pair(first: JudgeVerdict, second: JudgeVerdict | None) -> PairOutcome:
    """Fold one or two verdicts into a pair outcome.

    The first verdict saw the low-relevance-masked answer as A, the second
    (when present) saw it as B. Only unanimous preference counts as a win
    or loss; any disagreement or Equal verdict lands on equal.
    """

    def favors_low(v: JudgeVerdict) -> bool | None:
        if v.outcome is Verdict.EQUAL:
            return None
        favored_a = v.outcome is Verdict.A
        return favored_a != v.order_swapped

    votes = [favors_low(first)]
    if second is not None:
        votes.append(favors_low(second))
    if all(v is True for v in votes):
        return PairOutcome.WIN_LOW
    if all(v is False for v in votes):
        return PairOutcome.WIN_FULL
    return PairOutcome.EQUAL


def run_utility_eval(
    gateway: Gateway,
    samples: list[Sample],
    spans_by_id: dict[str, tuple[PiiSpan, ...]] | None = None,
    *,
    single_pass: bool = False,
    catalog: PromptCatalog | None = None,
) -> UtilityReport:
    """Evaluate utility preservation over the sample list.

    spans_by_id overrides the gold spans with detector predictions; when
    None, each sample's own spans drive the masking. Per-sample failures
    are tallied and skipped so one bad sample cannot sink a run. Samples
    are processed in id order, making the report order-invariant.
    """
    catalog = catalog or PromptCatalog()
    report = UtilityReport()
    for sample in sorted(samples, key=lambda s: s.id):
        try:
            if spans_by_id is not None:
                spans = spans_by_id[sample.id]
            else:
                spans = sample.spans
            masked_low, _ = redact_context(
                sample.context, spans, MaskStrategy.LOW_RELEVANCE_ONLY
            )
            masked_full, _ = redact_context(sample.context, spans, MaskStrategy.FULL)
            answer_low = answer_question(gateway, masked_low, sample.question, catalog)
            answer_full = answer_question(gateway, masked_full, sample.question, catalog)
            first = judge_pair(
                gateway, sample.context, sample.question, answer_low, answer_full,
                order_swapped=False, catalog=catalog,
            )
            second = None
            if not single_pass:
                second = judge_pair(
                    gateway, sample.context, sample.question, answer_full, answer_low,
                    order_swapped=True, catalog=catalog,
                )
        except KeyError:
            report.errors.append((sample.id, "no spans supplied for sample"))
            continue
        except Exception as exc:  # noqa: BLE001 - tallied per sample
            logger.warning("utility eval failed for %s: %s", sample.id, exc)
            report.errors.append((sample.id, str(exc)))
            continue
        outcome = aggregate_pair(first, second)
        verdicts = (first,) if second is None else (first, second)
        report.per_sample.append(PairRecord(sample.id, verdicts, outcome))
        report.n_pairs += 1
        if outcome is PairOutcome.WIN_LOW:
            report.wins_low_relevance += 1
        elif outcome is PairOutcome.WIN_FULL:
            report.wins_full += 1
        else:
            report.equals += 1

    if report.n_pairs:
        report.preference_score = (
            report.wins_low_relevance + 0.5 * report.equals
        ) / report.n_pairs
    decided = report.wins_low_relevance + report.wins_full
    if decided:
        report.strict_score = report.wins_low_relevance / decided
    return report


def report_to_record(report: UtilityReport) -> dict:
    return {
        "n_pairs": report.n_pairs,
        "wins_low_relevance": report.wins_low_relevance,
        "wins_full": report.wins_full,
        "equals": report.equals,
        "preference_score": report.preference_score,
        "strict_score": report.strict_score,
        "errors": [{"sample_id": sid, "message": msg} for sid, msg in report.errors],
        "per_sample": [
            {
                "sample_id": rec.sample_id,
                "outcome": rec.outcome.value,
                "verdicts": [
                    {"outcome": v.outcome.value, "order_swapped": v.order_swapped}
                    for v in rec.verdicts
                ],
            }
            for rec in report.per_sample
        ],
    }
