"""Span-level scoring of PII predictions against gold annotations.

Matching uses a hybrid score: a gold span whose text is a single
whitespace token is compared by character overlap of the offset ranges,
anything longer by multiset overlap of normalized tokens. Both branches
reduce to 2*|intersection| / (|gold| + |pred|), which is exactly the
harmonic mean of the directional precision and recall, so one integer
division produces a correctly rounded float.

Coverage reads as soft recall: the mean, over every gold span, of the
best hybrid score any same-sample prediction achieves, with no threshold
applied. It is 1.0 exactly when every gold span has a perfect-scoring
prediction. This is an interpretation; the source metric name is not
given a standalone definition, so treat cross-system coverage
comparisons with that in mind.

Token normalization casefolds and strips punctuation from token edges.
Tokens that normalize to the empty string are kept, not dropped:
dropping them could collapse a multi-token text to a single token and
let the two scoring branches alias, which would break the guarantee
that greedy matching is optimal whenever all pairwise scores are 0 or 1.
"""

from __future__ import annotations

import json
import string
from dataclasses import dataclass, field

from .model import PiiSpan, PiiType, Sample

_EDGE_PUNCT = string.punctuation + "‘’“”…–—"


class UnknownSampleIdError(KeyError):
    """Predictions reference a sample id absent from the gold set."""


@dataclass(frozen=True, slots=True)
class MatchConfig:
    match_threshold: float = 0.5
    casefold: bool = True
    strip_punctuation_edges: bool = True

    def __post_init__(self):
        if not (0 < self.match_threshold <= 1):
            raise ValueError("match_threshold must be in (0, 1]")


DEFAULT_CONFIG = MatchConfig()


def normalize_tokens(text: str, config: MatchConfig = DEFAULT_CONFIG) -> list[str]:
    """Whitespace-split and normalize each token; empties are kept."""
    tokens = text.split()
    out = []
    for tok in tokens:
        if config.strip_punctuation_edges:
            tok = tok.strip(_EDGE_PUNCT)
        if config.casefold:
            tok = tok.casefold()
        out.append(tok)
    return out


def hybrid_span_score(gold: PiiSpan, pred: PiiSpan, config: MatchConfig = DEFAULT_CONFIG) -> float:
    """Score one gold/pred pair in [0, 1]. See the module docstring."""
    if len(gold.text.split()) == 1:
        inter = min(gold.end, pred.end) - max(gold.start, pred.start)
        if inter <= 0:
            return 0.0
        return 2 * inter / ((gold.end - gold.start) + (pred.end - pred.start))
    g = normalize_tokens(gold.text, config)
    p = normalize_tokens(pred.text, config)
    if not g and not p:
        return 1.0
    remaining = list(p)
    inter = 0
    for tok in g:
        if tok in remaining:
            remaining.remove(tok)
            inter += 1
    if inter == 0:
        return 0.0
    return 2 * inter / (len(g) + len(p))


@dataclass(frozen=True, slots=True)
class MatchResult:
    pairs: tuple[tuple[int, int, float], ...]
    unmatched_gold: tuple[int, ...]
    unmatched_pred: tuple[int, ...]


def match_spans(
    gold: list[PiiSpan], pred: list[PiiSpan], config: MatchConfig = DEFAULT_CONFIG
) -> MatchResult:
    """Greedy one-to-one matching by descending score.

    Only pairs scoring at least match_threshold are candidates. Ties break
    on smaller gold start, then smaller pred start, then indices, so the
    result is a deterministic function of the inputs.
    """
    candidates = []
    for gi, g in enumerate(gold):
        for pi, p in enumerate(pred):
            score = hybrid_span_score(g, p, config)
            if score >= config.match_threshold:
                candidates.append((score, g.start, p.start, gi, pi))
    candidates.sort(key=lambda c: (-c[0], c[1], c[2], c[3], c[4]))
    used_gold: set[int] = set()
    used_pred: set[int] = set()
    pairs = []
    for score, _, _, gi, pi in candidates:
        if gi in used_gold or pi in used_pred:
            continue
        used_gold.add(gi)
        used_pred.add(pi)
        pairs.append((gi, pi, score))
    return MatchResult(
        pairs=tuple(pairs),
        unmatched_gold=tuple(i for i in range(len(gold)) if i not in used_gold),
        unmatched_pred=tuple(i for i in range(len(pred)) if i not in used_pred),
    )


@dataclass(frozen=True, slots=True)
class MatchCounts:
    tp: int
    fp: int
    fn: int
    matched: int


@dataclass(frozen=True, slots=True)
class MetricsReport:
    """Micro metrics plus matched-pair accuracies.

    Accuracy fields are None when nothing conditions them (no matched
    pairs, or no matched pairs of the needed gold relevance class).
    """

    span_precision: float
    span_recall: float
    span_f1: float
    coverage: float
    type_accuracy: float | None
    relevance_accuracy: float | None
    relevance_accuracy_low: float | None
    relevance_accuracy_high: float | None
    per_type: dict[PiiType, float] = field(default_factory=dict)
    counts: MatchCounts = MatchCounts(0, 0, 0, 0)


def _ratio(num: int, den: int) -> float | None:
    return None if den == 0 else num / den


def compute_metrics(
    gold_samples: list[Sample],
    predictions: dict[str, list[PiiSpan]],
    config: MatchConfig = DEFAULT_CONFIG,
) -> MetricsReport:
    """Micro-average over all samples; see the module docstring for terms.

    predictions maps sample id to localized spans; ids missing from the
    mapping count as empty predictions, ids not in gold raise
    UnknownSampleIdError.
    """
    gold_ids = {s.id for s in gold_samples}
    if len(gold_ids) != len(gold_samples):
        raise ValueError("gold sample ids must be unique")
    stray = set(predictions) - gold_ids
    if stray:
        raise UnknownSampleIdError(f"predictions for unknown sample ids: {sorted(stray)}")

    tp = fp = fn = 0
    best_scores: list[float] = []
    matched_pairs: list[tuple[PiiSpan, PiiSpan]] = []
    for sample in sorted(gold_samples, key=lambda s: s.id):
        gold = list(sample.spans)
        pred = list(predictions.get(sample.id, []))
        result = match_spans(gold, pred, config)
        tp += len(result.pairs)
        fp += len(result.unmatched_pred)
        fn += len(result.unmatched_gold)
        matched_pairs.extend((gold[gi], pred[pi]) for gi, pi, _ in result.pairs)
        for g in gold:
            best = 0.0
            for p in pred:
                best = max(best, hybrid_span_score(g, p, config))
                if best == 1.0:
                    break
            best_scores.append(best)

    if tp + fp == 0:
        precision = 1.0 if tp + fn == 0 else 0.0
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        recall = 1.0 if tp + fp == 0 else 0.0
    else:
        recall = tp / (tp + fn)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    coverage = sum(best_scores) / len(best_scores) if best_scores else 1.0

    type_hits = sum(1 for g, p in matched_pairs if g.pii_type is p.pii_type)
    rel_hits = sum(1 for g, p in matched_pairs if g.relevance == p.relevance)
    low = [(g, p) for g, p in matched_pairs if g.relevance == 0]
    high = [(g, p) for g, p in matched_pairs if g.relevance == 1]

    per_type: dict[PiiType, float] = {}
    by_type: dict[PiiType, list[tuple[PiiSpan, PiiSpan]]] = {}
    for g, p in matched_pairs:
        by_type.setdefault(g.pii_type, []).append((g, p))
    for t, pairs in sorted(by_type.items(), key=lambda kv: kv[0].value):
        per_type[t] = sum(1 for g, p in pairs if g.pii_type is p.pii_type) / len(pairs)

    return MetricsReport(
        span_precision=precision,
        span_recall=recall,
        span_f1=f1,
        coverage=coverage,
        type_accuracy=_ratio(type_hits, len(matched_pairs)),
        relevance_accuracy=_ratio(rel_hits, len(matched_pairs)),
        relevance_accuracy_low=_ratio(
            sum(1 for g, p in low if g.relevance == p.relevance), len(low)
        ),
        relevance_accuracy_high=_ratio(
            sum(1 for g, p in high if g.relevance == p.relevance), len(high)
        ),
        per_type=per_type,
        counts=MatchCounts(tp=tp, fp=fp, fn=fn, matched=tp),
    )


def _cell(value: float | None) -> str:
    return "--" if value is None else f"{value:.4f}"


def format_report_table(report: MetricsReport, label: str = "system") -> str:
    """One aligned row of Span P/R/F1/Cov, Type Acc, Relevance Acc/Low/High."""
    headers = ["Method", "Span P", "Span R", "Span F1", "Cov.",
               "Type Acc.", "Rel. Acc.", "Low Acc.", "High Acc."]
    row = [
        label,
        _cell(report.span_precision),
        _cell(report.span_recall),
        _cell(report.span_f1),
        _cell(report.coverage),
        _cell(report.type_accuracy),
        _cell(report.relevance_accuracy),
        _cell(report.relevance_accuracy_low),
        _cell(report.relevance_accuracy_high),
    ]
    widths = [max(len(h), len(r)) for h, r in zip(headers, row)]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(headers, widths)),
        "  ".join("-" * w for w in widths),
        "  ".join(r.ljust(w) for r, w in zip(row, widths)),
        f"counts: tp={report.counts.tp} fp={report.counts.fp} fn={report.counts.fn}",
    ]
    return "\n".join(lines)


def report_to_record(report: MetricsReport) -> dict:
    return {
        "span_precision": report.span_precision,
        "span_recall": report.span_recall,
        "span_f1": report.span_f1,
        "coverage": report.coverage,
        "type_accuracy": report.type_accuracy,
        "relevance_accuracy": report.relevance_accuracy,
        "relevance_accuracy_low": report.relevance_accuracy_low,
        "relevance_accuracy_high": report.relevance_accuracy_high,
        "per_type": {t.value: acc for t, acc in report.per_type.items()},
        "counts": {
            "tp": report.counts.tp,
            "fp": report.counts.fp,
            "fn": report.counts.fn,
            "matched": report.counts.matched,
        },
    }


def dumps_report(report: MetricsReport) -> str:
    return json.dumps(report_to_record(report), indent=2)
