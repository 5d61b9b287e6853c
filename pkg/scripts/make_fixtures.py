"""Rebuild the deterministic fixtures bundled under tests/fixtures.

Run from the repository root:

    python3 scripts/make_fixtures.py

Outputs are committed; rerunning is a no-op unless the pipeline or the
case tables below change. Expected values in the adversarial file are
authored here, by construction, never read back from the parser; the
parse check at the end is only a build-time sanity gate.
"""

from __future__ import annotations

import dataclasses
import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from piiscope.dataset import compute_stats, save_dataset, stats_to_record
from piiscope.detector import parse_detection_output
from piiscope.gateway import Gateway, LlmParams
from piiscope.model import Status
from piiscope.offline import ScriptedProvider
from piiscope.synth import generate_dataset

FIXTURE_DIR = Path(__file__).resolve().parent.parent / "tests" / "fixtures"
SAMPLE_SEED = 7


def build_sample_fixture() -> None:
    """50 validated samples from the scripted pipeline, plus frozen stats."""
    gateway = Gateway(ScriptedProvider(seed=SAMPLE_SEED), LlmParams(model_name="mock"))
    result = generate_dataset(
        gateway,
        seed=SAMPLE_SEED,
        max_samples=50,
        # small tree so the 50 samples spread over many type pairs
        topics_per_pair=2,
        subtopics_per_topic=3,
    )
    if result.errors:
        raise SystemExit(f"fixture generation failed: {result.errors}")
    samples = [dataclasses.replace(s, status=Status.VALIDATED) for s in result.samples]
    save_dataset(samples, str(FIXTURE_DIR / "samples_50.jsonl"))
    stats = stats_to_record(compute_stats(samples))
    (FIXTURE_DIR / "samples_50.stats.json").write_text(
        json.dumps(stats, indent=2) + "\n", encoding="utf-8"
    )
    print(f"samples_50.jsonl: {len(samples)} samples, {stats['n_spans']} spans")


# ---------------------------------------------------------------------------
# adversarial detection outputs
#
# Each entry set is authored with the canonical type and relevance the
# parser must recover. `label` is what gets written into the raw output
# (possibly an alias or odd casing); `as_int` serializes relevance as a
# bare number instead of a string.


@dataclasses.dataclass(frozen=True)
class GoodEntry:
    text: str
    label: str
    canonical: str
    relevance: int
    as_int: bool = False


@dataclasses.dataclass(frozen=True)
class EntrySet:
    key: str
    good: tuple[GoodEntry, ...]
    junk: tuple[tuple[str, object], ...] = ()  # raw key/value pairs, never recovered
    dropped_unknown: int = 0
    dropped_malformed: int = 0


ENTRY_SETS = {
    es.key: es
    for es in [
        EntrySet(
            "clean",
            (
                GoodEntry("night nurse", "occupation", "occupation", 1),
                GoodEntry("Toronto", "location", "location", 0),
            ),
        ),
        EntrySet(
            "aliased",
            (
                GoodEntry("John Smith", "family", "relationship", 0),
                GoodEntry("Canadian", "nationality", "demographic", 1, as_int=True),
                GoodEntry("asthma", "Medical Condition", "health", 0),
            ),
        ),
        EntrySet(
            "junk-mixed",
            (GoodEntry("34", "age", "age", 0, as_int=True),),
            junk=(
                ("blue sedan", {"type": "vehicle", "relevance": "0"}),
                ("misc", "not-a-dict"),
                ("Lisbon", {"type": "location", "relevance": "2"}),
            ),
            dropped_unknown=1,
            dropped_malformed=2,
        ),
        EntrySet(
            "unicode",
            (
                GoodEntry("café Aurora", "organization", "organization", 0),
                GoodEntry('Dr. "Ace" Malone', "name", "name", 1),
                GoodEntry("東京", "location", "location", 0),
            ),
        ),
        EntrySet(
            "braced-keys",
            (
                GoodEntry("spec {draft} v2", "code", "code", 0),
                GoodEntry("badge ZK-77610", "code", "code", 1),
            ),
        ),
        EntrySet("empty", ()),
        EntrySet(
            "odd-casing",
            (
                GoodEntry("night shift lead", "OCCUPATION", "occupation", 1),
                GoodEntry("vegan since 2019", "Belief", "belief", 0),
                GoodEntry("openly gay", "sexual_orientation", "sexual orientation", 0),
            ),
        ),
    ]
}


def render_object(entry_set: EntrySet, style: str) -> str:
    obj: dict[str, object] = {}
    for e in entry_set.good:
        obj[e.text] = {"type": e.label, "relevance": e.relevance if e.as_int else str(e.relevance)}
    for key, value in entry_set.junk:
        obj[key] = value
    if style == "compact":
        return json.dumps(obj, ensure_ascii=False)
    if style == "dense":
        return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))
    if style == "indent2":
        return json.dumps(obj, ensure_ascii=False, indent=2)
    if style == "indent4":
        return json.dumps(obj, ensure_ascii=False, indent=4)
    if style == "ascii":
        return json.dumps(obj, ensure_ascii=True)
    raise ValueError(style)


WRAPPERS = {
    "plain": "{obj}",
    "output-prefix": "Output: {obj}",
    "fence-json": "```json\n{obj}\n```",
    "fence-bare": "```\n{obj}\n```",
    "prose-both": (
        "I inspected the text and the question.\n{obj}\n"
        "Do not include any explanations or extra text beyond this JSON structure."
    ),
    "note-after": "{obj}\n\nNote: 1 marks relevance to the question.",
    "mid-sentence": "After review: {obj} concludes the list.",
    "bullets-before": "- reread the text\n- collected every span\n{obj}",
    "response-line": "Response:\n{obj}",
    "xml-tag": "<json>{obj}</json>",
    "stray-open-brace": "Mapping (an open brace { starts each record):\n{obj}",
    "second-object": '{obj} or, flattened, {"all": {"type": "misc", "relevance": "x"}}',
    "trailing-brace": "{obj}\nend }",
    "padded": "   {obj}   ",
    "crlf": "Output:\r\n{obj}\r\n",
}

# 50 cases: (entry set, render style, wrapper)
ADVERSARIAL_CASES = [
    ("clean", "compact", "plain"),
    ("clean", "dense", "output-prefix"),
    ("clean", "indent2", "fence-json"),
    ("clean", "indent4", "fence-bare"),
    ("clean", "compact", "prose-both"),
    ("clean", "compact", "note-after"),
    ("clean", "dense", "mid-sentence"),
    ("clean", "compact", "stray-open-brace"),
    ("clean", "compact", "second-object"),
    ("clean", "indent2", "crlf"),
    ("aliased", "compact", "plain"),
    ("aliased", "dense", "output-prefix"),
    ("aliased", "indent2", "fence-json"),
    ("aliased", "compact", "prose-both"),
    ("aliased", "indent4", "response-line"),
    ("aliased", "compact", "xml-tag"),
    ("aliased", "dense", "bullets-before"),
    ("aliased", "compact", "trailing-brace"),
    ("aliased", "indent2", "padded"),
    ("aliased", "compact", "mid-sentence"),
    ("junk-mixed", "compact", "plain"),
    ("junk-mixed", "indent2", "output-prefix"),
    ("junk-mixed", "dense", "fence-json"),
    ("junk-mixed", "compact", "note-after"),
    ("junk-mixed", "indent4", "prose-both"),
    ("junk-mixed", "compact", "stray-open-brace"),
    ("junk-mixed", "dense", "second-object"),
    ("unicode", "compact", "plain"),
    ("unicode", "ascii", "output-prefix"),
    ("unicode", "indent2", "fence-json"),
    ("unicode", "dense", "xml-tag"),
    ("unicode", "ascii", "prose-both"),
    ("unicode", "compact", "crlf"),
    ("unicode", "indent4", "padded"),
    ("braced-keys", "compact", "plain"),
    ("braced-keys", "dense", "output-prefix"),
    ("braced-keys", "indent2", "mid-sentence"),
    ("braced-keys", "compact", "stray-open-brace"),
    ("braced-keys", "dense", "trailing-brace"),
    ("braced-keys", "indent4", "fence-json"),
    ("empty", "compact", "plain"),
    ("empty", "compact", "output-prefix"),
    ("empty", "compact", "prose-both"),
    ("empty", "compact", "second-object"),
    ("odd-casing", "compact", "plain"),
    ("odd-casing", "dense", "output-prefix"),
    ("odd-casing", "indent2", "fence-json"),
    ("odd-casing", "indent4", "bullets-before"),
    ("odd-casing", "compact", "response-line"),
    ("odd-casing", "dense", "note-after"),
]


def build_adversarial_fixture() -> None:
    assert len(ADVERSARIAL_CASES) == 50
    rows = []
    for i, (set_key, style, wrapper_key) in enumerate(ADVERSARIAL_CASES):
        entry_set = ENTRY_SETS[set_key]
        rendered = render_object(entry_set, style)
        if wrapper_key == "crlf":
            rendered = rendered.replace("\n", "\r\n")
        raw = WRAPPERS[wrapper_key].replace("{obj}", rendered)
        rows.append(
            {
                "id": f"adv-{i:02d}",
                "raw": raw,
                "expected": [
                    {"text": e.text, "type": e.canonical, "relevance": e.relevance}
                    for e in entry_set.good
                ],
                "dropped_unknown_type": entry_set.dropped_unknown,
                "dropped_malformed": entry_set.dropped_malformed,
            }
        )

    # sanity gate: the committed expectations must hold before we write
    for row in rows:
        outcome = parse_detection_output(row["raw"])
        got = [
            {"text": e.text, "type": e.pii_type.value, "relevance": e.relevance}
            for e in outcome.entries
        ]
        if got != row["expected"]:
            raise SystemExit(f"{row['id']}: parsed {got}, authored {row['expected']}")
        if (outcome.dropped_unknown_type, outcome.dropped_malformed) != (
            row["dropped_unknown_type"],
            row["dropped_malformed"],
        ):
            raise SystemExit(f"{row['id']}: drop counts disagree")

    path = FIXTURE_DIR / "adversarial_50.jsonl"
    path.write_text(
        "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows), encoding="utf-8"
    )
    print(f"adversarial_50.jsonl: {len(rows)} cases")


def main() -> None:
    FIXTURE_DIR.mkdir(parents=True, exist_ok=True)
    build_sample_fixture()
    build_adversarial_fixture()


if __name__ == "__main__":
    main()
