"""Three-stage synthetic sample generation.

Stage 1 enumerates unordered type pairs and grows a topic/subtopic tree.
Stage 2 builds each sample in two parts: a situation sentence carrying the
key (high-relevance) PII values verbatim and a peripheral sentence carrying
the low-relevance values, then derives an abstracted question in two LLM
steps. Stage 3 paraphrases the concatenated context and reconciles every
PII value back to exact offsets, falling back to a span-retrieval prompt
when the paraphrase changed a surface form.
"""

from __future__ import annotations

import concurrent.futures
import logging
import random
import re
from dataclasses import dataclass, field, replace

from .gateway import Gateway, PromptCatalog, render_prompt
from .model import (
    PiiSpan,
    PiiType,
    Provenance,
    Sample,
    SpanNotFoundError,
    Status,
    TAXONOMY,
    locate_span,
    validate_sample,
)

logger = logging.getLogger(__name__)

EXCLUDED_FROM_PAIRS = (PiiType.NAME, PiiType.CODE)


class PiiFormatError(ValueError):
    """Generated PII value stayed out of format after a retry."""


class PiiDroppedError(ValueError):
    """A required PII value is missing from a generated sentence."""

    def __init__(self, value: str, part: str):
        self.value = value
        super().__init__(f"PII value {value!r} missing from {part} after retry")


class EmptyQuestionError(ValueError):
    """The question stage produced an empty string."""


class ReconcileFailureError(ValueError):
    """A PII value could not be located in the paraphrased context."""


@dataclass(frozen=True, slots=True)
class TypePair:
    first: PiiType
    second: PiiType

    def __post_init__(self):
        if self.first is self.second:
            raise ValueError("pair members must differ")
        if self.first in EXCLUDED_FROM_PAIRS or self.second in EXCLUDED_FROM_PAIRS:
            raise ValueError("name and code are excluded from pairs")
        order = {t: i for i, t in enumerate(TAXONOMY)}
        if order[self.first] > order[self.second]:
            raise ValueError("pair must be canonicalized in taxonomy order")


@dataclass(frozen=True, slots=True)
class TopicTriplet:
    pair: TypePair
    topic: str
    subtopic: str


@dataclass(frozen=True, slots=True)
class DraftSample:
    triplet: TopicTriplet
    key_piis: tuple[tuple[PiiType, str], ...]
    peripheral_piis: tuple[tuple[PiiType, str], ...] = ()
    situation: str = ""
    peripheral: str = ""
    question: str = ""


def enumerate_type_pairs() -> list[TypePair]:
    """All C(13,2)=78 unordered pairs, name and code excluded."""
    eligible = [t for t in TAXONOMY if t not in EXCLUDED_FROM_PAIRS]
    pairs = []
    for i, first in enumerate(eligible):
        for second in eligible[i + 1 :]:
            pairs.append(TypePair(first, second))
    return pairs


_ITEM_PREFIX = re.compile(r"^\s*(?:[-*•]|\d+[.)])\s*")


def parse_list_items(text: str) -> list[str]:
    """One item per line, numbering and bullets stripped."""
    items = []
    for line in text.splitlines():
        item = _ITEM_PREFIX.sub("", line).strip()
        if item:
            items.append(item)
    return items


@dataclass(slots=True)
class TreeStats:
    raw_triplets: int = 0
    unique_triplets: int = 0
    shortfall: int = 0


def generate_topic_tree(
    gateway: Gateway,
    pairs: list[TypePair],
    topics_per_pair: int = 10,
    subtopics_per_topic: int = 20,
    catalog: PromptCatalog | None = None,
    max_triplets: int | None = None,
) -> tuple[list[TopicTriplet], TreeStats]:
    """Grow the topic tree pair by pair.

    Short provider lists are tolerated; stats.shortfall records how far the
    raw count fell below pairs * topics * subtopics. Dedup is
    case-insensitive over (pair, subtopic) and the difference shows up as
    raw_triplets - unique_triplets. max_triplets stops issuing prompts once
    enough raw triplets exist, yielding a deterministic prefix of the full
    tree (shortfall is not meaningful for a truncated run and stays 0).
    """
    catalog = catalog or PromptCatalog()
    topic_template = catalog.get("topics")
    subtopic_template = catalog.get("subtopics")
    stats = TreeStats()
    seen: set[tuple[TypePair, str]] = set()
    triplets: list[TopicTriplet] = []
    truncated = False
    for pair in pairs:
        if max_triplets is not None and stats.raw_triplets >= max_triplets:
            truncated = True
            break
        type_vars = {"PII_type_1": pair.first.value, "PII_type_2": pair.second.value}
        topics = parse_list_items(gateway.complete(render_prompt(topic_template, type_vars)))
        if len(topics) < topics_per_pair:
            logger.warning(
                "short topic list for %s/%s: got %d, wanted %d",
                pair.first.value, pair.second.value, len(topics), topics_per_pair,
            )
        topics = topics[:topics_per_pair]
        for topic in topics:
            if max_triplets is not None and stats.raw_triplets >= max_triplets:
                truncated = True
                break
            subtopics = parse_list_items(
                gateway.complete(
                    render_prompt(subtopic_template, {"topic": topic, **type_vars})
                )
            )
            if len(subtopics) < subtopics_per_topic:
                logger.warning(
                    "short subtopic list for topic %r: got %d, wanted %d",
                    topic, len(subtopics), subtopics_per_topic,
                )
            for subtopic in subtopics[:subtopics_per_topic]:
                stats.raw_triplets += 1
                key = (pair, subtopic.casefold())
                if key in seen:
                    continue
                seen.add(key)
                triplets.append(TopicTriplet(pair=pair, topic=topic, subtopic=subtopic))
    stats.unique_triplets = len(triplets)
    if not truncated:
        stats.shortfall = (
            len(pairs) * topics_per_pair * subtopics_per_topic - stats.raw_triplets
        )
    return triplets, stats


# one-line guidance per category for the value-generation prompt
_CATEGORY_DESCRIPTIONS: dict[PiiType, str] = {
    PiiType.OCCUPATION: "It should be a job title or working role.",
    PiiType.HEALTH: "It should be a medical condition, symptom, or treatment.",
    PiiType.DEMOGRAPHIC: "It should be a demographic attribute such as origin or household background.",
    PiiType.FINANCE: "It should be a financial detail such as an income, debt, or account state.",
    PiiType.AGE: "It should be the person's age in years.",
    PiiType.EDUCATION: "It should be a degree, certificate, or education level.",
    PiiType.LOCATION: "It should be a place such as a city, region, or country.",
    PiiType.ORGANIZATION: "It should be a company, institution, or group name.",
    PiiType.RELATIONSHIP: "It should be a family or relationship detail.",
    PiiType.SEXUAL_ORIENTATION: "It should be a sexual orientation.",
    PiiType.BELIEF: "It should be a religious, political, or philosophical belief.",
    PiiType.NAME: "It should be a person's full name.",
    PiiType.CODE: "It should be an identifier such as a ticket, badge, or reference code.",
    PiiType.DATETIME: "It should be a date, time, or recurring moment.",
    PiiType.APPEARANCE: "It should be a physical appearance detail.",
}


def topic_phrase(category: PiiType, triplet: TopicTriplet) -> str:
    """Prefix used when no partial context exists yet."""
    return (
        f"It should be the {category.value} of the person that faces issues "
        f"with {triplet.topic}-{triplet.subtopic}."
    )


def generate_pii_value(
    gateway: Gateway,
    category: PiiType,
    context_prefix: str,
    catalog: PromptCatalog | None = None,
) -> str:
    """One 1-3 word PII value for the category, re-prompting once on format."""
    catalog = catalog or PromptCatalog()
    prompt = render_prompt(
        catalog.get("pii_value"),
        {
            "pii_category": category.value,
            "pii_category_description": _CATEGORY_DESCRIPTIONS[category],
            "context": context_prefix,
        },
    )
    value = ""
    for attempt in range(2):
        value = gateway.complete(prompt).strip()
        if value and len(value.split()) <= 3:
            return value
        logger.warning("PII value %r out of format (attempt %d)", value, attempt + 1)
    raise PiiFormatError(f"value for {category.value} out of format twice: {value!r}")


def _checked_sentence(
    gateway: Gateway,
    prompt: str,
    required_values: list[str],
    part: str,
    word_bounds: tuple[int, int],
) -> str:
    """Call once, verify required substrings, retry once on a miss.

    Word-count bounds are advisory: violations only log a warning because
    provider compliance is probabilistic and a hard failure would stall
    the whole pipeline over a cosmetic issue.
    """
    missing: list[str] = []
    for attempt in range(2):
        text = gateway.complete(prompt).strip()
        missing = [v for v in required_values if v not in text]
        if not missing:
            words = len(text.split())
            lo, hi = word_bounds
            if not lo <= words <= hi:
                logger.warning("%s word count %d outside [%d, %d]", part, words, lo, hi)
            return text
        logger.warning("%s missing values %s (attempt %d)", part, missing, attempt + 1)
    raise PiiDroppedError(missing[0], part)


def compose_context(
    gateway: Gateway,
    draft: DraftSample,
    peripheral_types: list[PiiType],
    catalog: PromptCatalog | None = None,
) -> DraftSample:
    """Build both context parts around the draft's key PII values.

    The situation comes first so the peripheral values can condition on it
    as their prefix; the peripheral sentence then has to carry each of
    those values verbatim.
    """
    catalog = catalog or PromptCatalog()
    (k1_type, k1_value), (k2_type, k2_value) = draft.key_piis
    situation_prompt = render_prompt(
        catalog.get("situation"),
        {
            "topic": draft.triplet.topic,
            "subtopic": draft.triplet.subtopic,
            "pii_category": k1_type.value,
            "pii_category_value": k1_value,
            "supporting_pii_category": k2_type.value,
            "support_pii_category_val": k2_value,
        },
    )
    situation = _checked_sentence(
        gateway, situation_prompt, [k1_value, k2_value], "situation", (20, 35)
    )

    peripheral_piis = tuple(
        (category, generate_pii_value(gateway, category, situation, catalog))
        for category in peripheral_types
    )
    peripheral_prompt = render_prompt(
        catalog.get("peripheral"),
        {
            "topic": draft.triplet.topic,
            "subtopic": draft.triplet.subtopic,
            "low_relevance_piis": "\n".join(f"{t.value}: {v}" for t, v in peripheral_piis),
        },
    )
    peripheral = _checked_sentence(
        gateway,
        peripheral_prompt,
        [v for _, v in peripheral_piis],
        "peripheral",
        (20, 25),
    )
    return replace(
        draft, situation=situation, peripheral=peripheral, peripheral_piis=peripheral_piis
    )


def generate_question(
    gateway: Gateway, draft: DraftSample, catalog: PromptCatalog | None = None
) -> str:
    """Two steps: general personal question, then key-cue removal.

    The second step may hand the question back unchanged; only emptiness
    is an error.
    """
    catalog = catalog or PromptCatalog()
    (k1_type, k1_value), (k2_type, k2_value) = draft.key_piis
    general = gateway.complete(
        render_prompt(
            catalog.get("question"),
            {
                "pii_category": k1_type.value,
                "supporting_pii_category": k2_type.value,
                "situation": draft.situation,
            },
        )
    ).strip()
    if not general:
        raise EmptyQuestionError("general question step returned empty output")
    refined = gateway.complete(
        render_prompt(
            catalog.get("question_refine"),
            {
                "relevant_pii_type_and_value_1": f"{k1_type.value}: {k1_value}",
                "relevant_pii_type_and_value_2": f"{k2_type.value}: {k2_value}",
                "question": general,
            },
        )
    ).strip()
    if not refined:
        raise EmptyQuestionError("refinement step returned empty output")
    return refined


def paraphrase_and_reconcile(
    gateway: Gateway,
    draft: DraftSample,
    rng: random.Random,
    sample_id: str,
    catalog: PromptCatalog | None = None,
) -> Sample:
    """Paraphrase the concatenated context and pin every PII to offsets.

    Concatenation order is randomized per sample so high-relevance values
    do not always lead the context. Values lost to the paraphrase go
    through the span-retrieval prompt once, and the retrieved surface form
    replaces the recorded text; a retrieved span absent from the context is
    a ReconcileFailureError.
    """
    catalog = catalog or PromptCatalog()
    parts = [draft.situation, draft.peripheral]
    if rng.random() < 0.5:
        parts.reverse()
    raw_context = " ".join(parts)
    all_values = [v for _, v in draft.key_piis] + [v for _, v in draft.peripheral_piis]
    context = gateway.complete(
        render_prompt(
            catalog.get("paraphrase"),
            {"context": raw_context, "piis": ", ".join(all_values)},
        )
    ).strip()
    if not context:
        logger.warning("empty paraphrase for %s; keeping unparaphrased context", sample_id)
        context = raw_context

    consumed: set[tuple[int, int]] = set()
    spans: list[PiiSpan] = []
    labeled = [(t, v, 1) for t, v in draft.key_piis] + [
        (t, v, 0) for t, v in draft.peripheral_piis
    ]
    for pii_type, value, relevance in labeled:
        text = value
        try:
            start, end = locate_span(context, text, consumed)
        except SpanNotFoundError:
            retrieved = gateway.complete(
                render_prompt(
                    catalog.get("span_retrieval"), {"pii": value, "context": context}
                )
            ).strip()
            try:
                start, end = locate_span(context, retrieved, consumed)
            except (SpanNotFoundError, ValueError) as exc:
                raise ReconcileFailureError(
                    f"{sample_id}: value {value!r} irrecoverable after retrieval "
                    f"({retrieved!r} not in context)"
                ) from exc
            text = retrieved
        consumed.add((start, end))
        spans.append(
            PiiSpan(text=text, start=start, end=end, pii_type=pii_type, relevance=relevance)
        )

    spans.sort(key=lambda s: s.start)
    sample = Sample(
        id=sample_id,
        context=context,
        question=draft.question,
        spans=tuple(spans),
        provenance=Provenance.SYNTHETIC,
        status=Status.RAW,
        revision=0,
    )
    violations = validate_sample(sample)
    if violations:
        raise ReconcileFailureError(
            f"{sample_id}: reconciled sample invalid: "
            + "; ".join(v.message for v in violations)
        )
    return sample


def generate_sample(
    gateway: Gateway,
    triplet: TopicTriplet,
    rng: random.Random,
    sample_id: str,
    catalog: PromptCatalog | None = None,
) -> Sample:
    """Run every per-sample stage for one triplet."""
    catalog = catalog or PromptCatalog()
    key_piis = tuple(
        (category, generate_pii_value(gateway, category, topic_phrase(category, triplet), catalog))
        for category in (triplet.pair.first, triplet.pair.second)
    )
    peripheral_candidates = [
        t for t in TAXONOMY if t not in (triplet.pair.first, triplet.pair.second)
    ]
    peripheral_types = rng.sample(peripheral_candidates, rng.randint(2, 4))
    draft = DraftSample(triplet=triplet, key_piis=key_piis)
    draft = compose_context(gateway, draft, peripheral_types, catalog)
    draft = replace(draft, question=generate_question(gateway, draft, catalog))
    return paraphrase_and_reconcile(gateway, draft, rng, sample_id, catalog)


@dataclass(slots=True)
class PipelineResult:
    samples: list[Sample] = field(default_factory=list)
    errors: list[tuple[int, str]] = field(default_factory=list)
    tree: TreeStats = field(default_factory=TreeStats)


def generate_dataset(
    gateway: Gateway,
    seed: int = 0,
    max_samples: int | None = None,
    topics_per_pair: int = 10,
    subtopics_per_topic: int = 20,
    catalog: PromptCatalog | None = None,
    workers: int = 1,
) -> PipelineResult:
    """Full pipeline driver.

    One sample per triplet, id syn-<index>, per-sample RNG derived from
    (seed, index) so worker count cannot change the output. Failed samples
    are tallied, not fatal. Emission order is by triplet index.
    """
    catalog = catalog or PromptCatalog()
    triplets, tree = generate_topic_tree(
        gateway,
        enumerate_type_pairs(),
        topics_per_pair,
        subtopics_per_topic,
        catalog,
        max_triplets=max_samples,
    )
    if max_samples is not None:
        triplets = triplets[:max_samples]
    result = PipelineResult(tree=tree)

    def build(index: int, triplet: TopicTriplet) -> Sample:
        rng = random.Random(f"{seed}:{index}")
        return generate_sample(gateway, triplet, rng, f"syn-{index:05d}", catalog)

    outcomes: list[tuple[int, Sample | None, str | None]] = []
    if workers <= 1:
        for i, triplet in enumerate(triplets):
            try:
                outcomes.append((i, build(i, triplet), None))
            except Exception as exc:  # noqa: BLE001 - tallied per sample
                outcomes.append((i, None, str(exc)))
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(build, i, t): i for i, t in enumerate(triplets)}
            for future in concurrent.futures.as_completed(futures):
                i = futures[future]
                try:
                    outcomes.append((i, future.result(), None))
                except Exception as exc:  # noqa: BLE001
                    outcomes.append((i, None, str(exc)))
        outcomes.sort(key=lambda o: o[0])

    for i, sample, error in outcomes:
        if error is not None:
            logger.warning("sample %d failed: %s", i, error)
            result.errors.append((i, error))
        else:
            result.samples.append(sample)
    return result
