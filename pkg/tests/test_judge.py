"""Verdict parsing, swap aggregation, and the utility eval loop."""

from __future__ import annotations

import itertools

import pytest

from piiscope.gateway import Gateway, MockProvider, PromptCatalog, Provider, prompt_fingerprint, render_prompt
from piiscope.judge import (
    InvalidInputError,
    JudgeVerdict,
    PairOutcome,
    Verdict,
    VerdictParseError,
    aggregate_pair,
    answer_question,
    judge_pair,
    parse_verdict,
    report_to_record,
    run_utility_eval,
)
from piiscope.model import PiiType
from piiscope.offline import ScriptedProvider
from piiscope.redact import MaskStrategy, redact_context

from test_model import make_sample, span_at
from test_redact import EXAMPLE_CONTEXT, EXAMPLE_QUESTION, example_spans

CATALOG = PromptCatalog()

LONG_ANSWER = "Taking everything into account, I would begin with rest, then routine, then help."
SHORT_ANSWER = "Just rest more."


class FnProvider(Provider):
    name = "fn"

    def __init__(self, fn):
        self.fn = fn
        self.calls: list[str] = []

    def complete_once(self, prompt, params):
        self.calls.append(prompt)
        return self.fn(prompt)


def eval_samples():
    ctx_a = "I am a night nurse and I am 34, living in Brighton with two children."
    ctx_b = "As a devout quaker I skip Sunday shifts at Harbor Clinic despite my overdue car loan."
    return [
        make_sample(
            ctx_a,
            [
                span_at(ctx_a, "night nurse", PiiType.OCCUPATION, 1),
                span_at(ctx_a, "34", PiiType.AGE, 0),
                span_at(ctx_a, "Brighton", PiiType.LOCATION, 0),
            ],
            question="How do I manage fatigue?",
            id="u-1",
        ),
        make_sample(
            ctx_b,
            [
                span_at(ctx_b, "devout quaker", PiiType.BELIEF, 1),
                span_at(ctx_b, "Harbor Clinic", PiiType.ORGANIZATION, 0),
                span_at(ctx_b, "overdue car loan", PiiType.FINANCE, 0),
            ],
            question="Should I change my schedule?",
            id="u-2",
        ),
    ]


def high_value_aware_provider():
    """Long answer whenever a high-relevance value survived the masking."""
    high_values = ("night nurse", "devout quaker")

    def fn(prompt):
        if prompt.startswith("Answer the question"):
            return LONG_ANSWER if any(v in prompt for v in high_values) else SHORT_ANSWER
        return ScriptedProvider(seed=0).complete_once(prompt, None)

    return FnProvider(fn)


def test_answer_question_rejects_empty_question():
    provider = FnProvider(lambda p: "answer")
    with pytest.raises(InvalidInputError):
        answer_question(Gateway(provider), "some context", "   ", CATALOG)
    assert provider.calls == []


def test_answer_question_mock_by_fingerprint():
    prompt = render_prompt(
        CATALOG.get("qa_answer"), {"context": "ctx", "question": "why?"}
    )
    canned = "One. Two. Three."
    gateway = Gateway(MockProvider({prompt_fingerprint(prompt): canned}))
    assert answer_question(gateway, "ctx", "why?", CATALOG) == canned


def test_answer_on_fully_masked_context_cannot_leak_values():
    spans = example_spans()
    masked, _ = redact_context(EXAMPLE_CONTEXT, spans, MaskStrategy.FULL)
    answer = answer_question(
        Gateway(ScriptedProvider(seed=0)), masked, EXAMPLE_QUESTION, CATALOG
    )
    for span in spans:
        assert span.text not in answer


def test_parse_verdict_takes_last_marker():
    raw = "I lean towards <b>A</b> at first, but on reflection <b>B</b>"
    verdict = parse_verdict(raw)
    assert verdict.outcome is Verdict.B
    assert verdict.reasoning == raw
    assert parse_verdict("<b>Equal</b>").outcome is Verdict.EQUAL


def test_parse_verdict_without_marker_keeps_raw():
    with pytest.raises(VerdictParseError) as err:
        parse_verdict("they are both fine I guess")
    assert err.value.raw == "they are both fine I guess"


def test_judge_pair_renders_positions():
    provider = FnProvider(lambda p: "reasoning... <b>A</b>")
    verdict = judge_pair(
        Gateway(provider), "the context", "q?", "first answer", "second answer",
        order_swapped=True, catalog=CATALOG,
    )
    assert verdict.outcome is Verdict.A
    assert verdict.order_swapped is True
    prompt = provider.calls[0]
    assert "Answer A: first answer" in prompt
    assert "Answer B: second answer" in prompt


def _verdict(outcome, swapped):
    return JudgeVerdict(outcome=outcome, order_swapped=swapped, reasoning="")


@pytest.mark.parametrize("first,second", list(itertools.product(list(Verdict), repeat=2)))
def test_aggregate_pair_table(first, second):
    v1 = _verdict(first, False)
    v2 = _verdict(second, True)
    outcome = aggregate_pair(v1, v2)
    favor1 = None if first is Verdict.EQUAL else first is Verdict.A
    favor2 = None if second is Verdict.EQUAL else second is Verdict.B
    if favor1 is True and favor2 is True:
        assert outcome is PairOutcome.WIN_LOW
    elif favor1 is False and favor2 is False:
        assert outcome is PairOutcome.WIN_FULL
    else:
        assert outcome is PairOutcome.EQUAL


@pytest.mark.parametrize("first,second", list(itertools.product(list(Verdict), repeat=2)))
def test_aggregate_pair_swap_symmetry(first, second):
    flip = {Verdict.A: Verdict.B, Verdict.B: Verdict.A, Verdict.EQUAL: Verdict.EQUAL}
    outcome = aggregate_pair(_verdict(first, False), _verdict(second, True))
    flipped = aggregate_pair(_verdict(flip[first], False), _verdict(flip[second], True))
    mirrored = {
        PairOutcome.WIN_LOW: PairOutcome.WIN_FULL,
        PairOutcome.WIN_FULL: PairOutcome.WIN_LOW,
        PairOutcome.EQUAL: PairOutcome.EQUAL,
    }
    assert flipped is mirrored[outcome]


def test_aggregate_single_verdict():
    assert aggregate_pair(_verdict(Verdict.A, False), None) is PairOutcome.WIN_LOW
    assert aggregate_pair(_verdict(Verdict.B, False), None) is PairOutcome.WIN_FULL
    assert aggregate_pair(_verdict(Verdict.EQUAL, False), None) is PairOutcome.EQUAL


def always_a_provider():
    def fn(prompt):
        if prompt.startswith("You are an expert evaluator."):
            return "whatever the content says <b>A</b>"
        if prompt.startswith("Answer the question"):
            return "A fixed answer."
        return ScriptedProvider(seed=0).complete_once(prompt, None)

    return FnProvider(fn)


def test_always_a_judge_yields_exactly_half():
    report = run_utility_eval(Gateway(always_a_provider()), eval_samples(), catalog=CATALOG)
    assert report.n_pairs == 2
    assert report.wins_low_relevance == 0
    assert report.wins_full == 0
    assert report.equals == 2
    assert report.preference_score == 0.5
    assert report.strict_score is None


def test_longer_low_relevance_answers_win_outright():
    report = run_utility_eval(
        Gateway(high_value_aware_provider()), eval_samples(), catalog=CATALOG
    )
    assert report.n_pairs == 2
    assert report.wins_low_relevance == 2
    assert report.preference_score == 1.0
    assert report.strict_score == 1.0


def test_judge_always_sees_unmasked_context():
    provider = high_value_aware_provider()
    samples = eval_samples()
    run_utility_eval(Gateway(provider), samples, catalog=CATALOG)
    judge_prompts = [c for c in provider.calls if c.startswith("You are an expert evaluator.")]
    assert len(judge_prompts) == 4
    by_context = {s.context: 0 for s in samples}
    for prompt in judge_prompts:
        assert "[" not in prompt.split("Question:")[0].split("Context:")[1]
        for ctx in by_context:
            if f"Context: {ctx}" in prompt:
                by_context[ctx] += 1
    assert all(n == 2 for n in by_context.values())


def test_report_is_order_invariant():
    samples = eval_samples()
    a = run_utility_eval(Gateway(high_value_aware_provider()), samples, catalog=CATALOG)
    b = run_utility_eval(Gateway(high_value_aware_provider()), samples[::-1], catalog=CATALOG)
    assert report_to_record(a) == report_to_record(b)


def test_single_pass_mode_judges_once():
    provider = high_value_aware_provider()
    report = run_utility_eval(
        Gateway(provider), eval_samples(), single_pass=True, catalog=CATALOG
    )
    judge_prompts = [c for c in provider.calls if c.startswith("You are an expert evaluator.")]
    assert len(judge_prompts) == 2
    assert report.n_pairs == 2
    assert all(len(rec.verdicts) == 1 for rec in report.per_sample)
    assert report.preference_score == 1.0


def test_predictions_override_and_missing_ids_tallied():
    samples = eval_samples()
    spans_by_id = {"u-1": samples[0].spans}
    report = run_utility_eval(
        Gateway(high_value_aware_provider()), samples, spans_by_id, catalog=CATALOG
    )
    assert report.n_pairs == 1
    assert report.errors == [("u-2", "no spans supplied for sample")]


def test_unparseable_verdict_is_tallied_not_fatal():
    def fn(prompt):
        if prompt.startswith("You are an expert evaluator."):
            return "no marker here"
        if prompt.startswith("Answer the question"):
            return "An answer."
        return ScriptedProvider(seed=0).complete_once(prompt, None)

    report = run_utility_eval(Gateway(FnProvider(fn)), eval_samples(), catalog=CATALOG)
    assert report.n_pairs == 0
    assert len(report.errors) == 2
    assert all("verdict" in msg or "marker" in msg for _, msg in report.errors)
