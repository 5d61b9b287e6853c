"""Deterministic offline provider that answers every catalog prompt.

Recognizes each prompt by the fixed lead-in of its template and fabricates
a stable response from a hash of the prompt (plus an optional seed salt).
The same prompt and seed always produce the same output, across runs
and platforms. This is what `--provider scripted` uses so every
pipeline stage runs offline and byte-reproducibly.
"""

from __future__ import annotations

import hashlib
import json
import re

from .gateway import LlmParams, Provider

# value pools per PII category; entries are 1-3 words and chosen to avoid
# substring collisions with each other so synthetic offsets stay unambiguous
_VALUE_POOLS: dict[str, list[str]] = {
    "occupation": ["warehouse supervisor", "preschool teacher", "freelance electrician", "night nurse"],
    "health": ["chronic back pain", "asthma flare-ups", "insomnia", "migraine episodes"],
    "demographic": ["first-generation immigrant", "bilingual household", "rural upbringing", "veteran family"],
    "finance": ["$36,500 annually", "overdue car loan", "frozen savings", "maxed credit"],
    "age": ["34", "27", "58", "41"],
    "education": ["Associate's Degree", "trade certificate", "night-school diploma", "unfinished bachelor"],
    "location": ["Springfield", "Brighton", "Lakeview", "Ontario"],
    "organization": ["Richardson Ltd", "Harbor Clinic", "Midtown Depot", "Cedar Cooperative"],
    "relationship": ["two children", "recently divorced", "eldest sibling", "widowed parent"],
    "sexual orientation": ["heterosexual", "bisexual", "gay", "asexual"],
    "belief": ["devout quaker", "practicing buddhist", "secular humanist", "orthodox upbringing"],
    "name": ["Priya Raman", "Jonas Keller", "Mei Tanaka", "Omar Haddad"],
    "code": ["ID AB-10925", "badge ZK-77610", "ticket QF-90632", "ref LN-55023"],
    "datetime": ["last March", "every Sunday evening", "in 2019", "mid-July mornings"],
    "appearance": ["red-haired", "left-handed", "six feet tall", "tattooed forearms"],
}


def _digest(*parts: str) -> bytes:
    h = hashlib.sha256()
    for p in parts:
        h.update(p.encode("utf-8"))
        h.update(b"\x1f")
    return h.digest()


def _pick(pool: list[str], *parts: str) -> str:
    return pool[int.from_bytes(_digest(*parts)[:4], "big") % len(pool)]


class ScriptedProvider(Provider):
    """Prompt-shape-aware deterministic provider. See module docstring."""

    name = "scripted"

    def __init__(self, seed: int = 0):
        self.seed = str(seed)

    def complete_once(self, prompt: str, params: LlmParams) -> str:
        for matcher, handler in _HANDLERS:
            if matcher(prompt):
                return handler(self, prompt)
        # unknown prompt shape: stable filler so callers still get text
        return f"scripted-response-{_digest(self.seed, prompt).hex()[:8]}"

    # one handler per catalog template, matched on the template lead-in

    def _topics(self, prompt: str) -> str:
        m = re.search(r"knowledge about (.+?) and (.+?)\.", prompt)
        t1, t2 = m.group(1), m.group(2)
        slug = (t1[:4] + t2[:4]).replace(" ", "")
        return "\n".join(f"{i}. {slug}-topic-{i}" for i in range(1, 26))

    def _subtopics(self, prompt: str) -> str:
        m = re.search(r"related to the topic (.+?)\.", prompt)
        topic = m.group(1)
        return "\n".join(f"- {topic}-angle-{i}" for i in range(1, 26))

    def _pii_value(self, prompt: str) -> str:
        m = re.search(r"^Generate (.+?) \(private detail\)", prompt)
        category = m.group(1)
        pool = _VALUE_POOLS.get(category)
        if pool is None:
            return "generic detail"
        return _pick(pool, self.seed, category, prompt)

    def _situation(self, prompt: str) -> str:
        lines = prompt.splitlines()
        topic = lines[0].split(": ", 1)[1]
        v1 = lines[2].split(" - ", 1)[1]
        v2 = lines[3].split(" - ", 1)[1]
        return (
            f"Since last spring I have struggled with {topic} because being {v1} "
            f"while dealing with {v2} keeps draining me, and I feel stuck about what to try next."
        )

    def _peripheral(self, prompt: str) -> str:
        lines = prompt.splitlines()
        values = []
        collecting = False
        for line in lines:
            if line.startswith("The facts MUST include"):
                collecting = True
                continue
            if line.startswith("These PIIs must appear"):
                break
            if collecting and ": " in line:
                values.append(line.split(": ", 1)[1])
        listed = ", then ".join(values) if values else "very little"
        return f"Away from all that, I quietly enjoy {listed}, plus long walks and crossword puzzles most evenings."

    def _question(self, prompt: str) -> str:
        m = re.search(r"Situation: (.+)\Z", prompt, re.DOTALL)
        salt = _digest(self.seed, m.group(1)).hex()[:4]
        return f"How can I handle this kind of difficulty day to day (case {salt})?"

    def _question_refine(self, prompt: str) -> str:
        m = re.search(r"^Question: (.+)$", prompt, re.MULTILINE)
        return m.group(1)

    def _paraphrase(self, prompt: str) -> str:
        m = re.search(r"^Text: (.+?)\nDo not change the spelling", prompt, re.DOTALL | re.MULTILINE)
        return "To be honest, " + m.group(1)

    def _span_retrieval(self, prompt: str) -> str:
        m = re.search(r"most similar to (.+?)\.\nText:", prompt, re.DOTALL)
        return m.group(1)

    def _detect(self, prompt: str) -> str:
        # no-PII answer keeps CLI detect runs valid without canned fixtures
        return "{}"

    def _qa_answer(self, prompt: str) -> str:
        salt = _digest(self.seed, prompt).hex()[:6]
        return (
            f"Given what you describe, start with the most pressing issue (ref {salt}). "
            "Break it into small steps you can track weekly. "
            "Ask someone you trust to check in on your progress."
        )

    def _judge(self, prompt: str) -> str:
        a = re.search(r"^Answer A: (.+?)$", prompt, re.MULTILINE)
        b = re.search(r"^Answer B: (.+?)$", prompt, re.MULTILINE)
        la, lb = len(a.group(1)), len(b.group(1))
        verdict = "Equal" if la == lb else ("A" if la > lb else "B")
        return f"Comparing support and directness, the longer grounded answer wins here. <b>{verdict}</b>"


_HANDLERS = [
    (lambda p: p.startswith("Generate 20 topics"), ScriptedProvider._topics),
    (lambda p: p.startswith("Generate 10 subtopics"), ScriptedProvider._subtopics),
    (lambda p: re.match(r"^Generate .+ \(private detail\)", p) is not None, ScriptedProvider._pii_value),
    (lambda p: p.startswith("Topic: "), ScriptedProvider._situation),
    (lambda p: p.startswith("Generate some facts about the person."), ScriptedProvider._peripheral),
    (lambda p: p.startswith("You are given a short description of a situation."), ScriptedProvider._question),
    (lambda p: p.startswith("You are given the question."), ScriptedProvider._question_refine),
    (lambda p: p.startswith("Rewrite this text so it sounds coherent."), ScriptedProvider._paraphrase),
    (lambda p: p.startswith("Find a span in the text"), ScriptedProvider._span_retrieval),
    (lambda p: p.startswith("Below is an instruction that describes a task"), ScriptedProvider._detect),
    (lambda p: p.startswith("Answer the question by taking into account"), ScriptedProvider._qa_answer),
    (lambda p: p.startswith("You are an expert evaluator."), ScriptedProvider._judge),
]
