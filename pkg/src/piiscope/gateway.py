"""LLM gateway: prompt templates, HTTP provider, retries, and mocks.

Every call sends the whole prompt as one user message and returns the
provider's single text output. Templates live as editable files in the
prompts/ catalog; slots are `{identifier}` markers and substitution is
single-pass, so braces inside substituted values are left alone.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import requests

logger = logging.getLogger(__name__)

_SLOT_RE = re.compile(r"\{([A-Za-z_][A-Za-z0-9_]*)\}")

ENDPOINT_ENV = "PIISCOPE_ENDPOINT"
API_KEY_ENV = "PIISCOPE_API_KEY"
MODEL_ENV = "PIISCOPE_MODEL"


class PromptVarError(ValueError):
    """Base for render-time variable problems."""


class MissingVarError(PromptVarError):
    def __init__(self, names: list[str]):
        self.names = names
        super().__init__(f"missing template vars: {', '.join(sorted(names))}")


class UnknownVarError(PromptVarError):
    def __init__(self, names: list[str]):
        self.names = names
        super().__init__(f"unknown template vars: {', '.join(sorted(names))}")


class ProviderError(RuntimeError):
    """Completion failed for good (bad response, retries exhausted)."""


class AuthError(ProviderError):
    """Credential rejected; retrying will not help."""


class GatewayTimeout(ProviderError):
    """The provider did not answer within the configured timeout."""


class TransientProviderError(RuntimeError):
    """Internal: a failure worth retrying (connection reset, 429, 5xx)."""


@dataclass(frozen=True, slots=True)
class LlmParams:
    """Completion parameters. Defaults follow the generation config."""

    model_name: str = "mock"
    temperature: float = 1.0
    top_p: float = 1.0
    max_retries: int = 3
    timeout: float = 60.0

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not (0 < self.top_p <= 1):
            raise ValueError("top_p must be in (0, 1]")


@dataclass(frozen=True, slots=True)
class PromptTemplate:
    name: str
    body: str
    required_vars: frozenset[str]

    @classmethod
    def from_string(cls, name: str, body: str) -> PromptTemplate:
        """Derive required_vars from the slots present in the body."""
        return cls(name=name, body=body, required_vars=frozenset(_SLOT_RE.findall(body)))


def render_prompt(template: PromptTemplate, vars: dict[str, str]) -> str:
    """Substitute every slot exactly once.

    vars must cover required_vars exactly; extras raise UnknownVarError and
    gaps raise MissingVarError, each naming the offending placeholders.
    """
    keys = set(vars)
    missing = template.required_vars - keys
    if missing:
        raise MissingVarError(sorted(missing))
    unknown = keys - template.required_vars
    if unknown:
        raise UnknownVarError(sorted(unknown))
    return _SLOT_RE.sub(lambda m: str(vars[m.group(1)]), template.body)


def prompt_fingerprint(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:16]


class PromptCatalog:
    """Loads named templates from a directory of .txt files.

    The default catalog ships inside the package; passing a directory lets
    operators edit prompts without touching code.
    """

    def __init__(self, directory: str | os.PathLike | None = None):
        if directory is None:
            directory = Path(__file__).parent / "prompts"
        self.directory = Path(directory)
        self._cache: dict[str, PromptTemplate] = {}

    def get(self, name: str) -> PromptTemplate:
        if name not in self._cache:
            path = self.directory / f"{name}.txt"
            if not path.is_file():
                raise FileNotFoundError(f"no prompt template named {name!r} in {self.directory}")
            body = path.read_text(encoding="utf-8").rstrip("\n")
            self._cache[name] = PromptTemplate.from_string(name, body)
        return self._cache[name]

    def names(self) -> list[str]:
        return sorted(p.stem for p in self.directory.glob("*.txt"))


class Provider:
    """One attempt at a completion. Subclasses raise TransientProviderError
    for failures the gateway should retry."""

    name = "base"

    def complete_once(self, prompt: str, params: LlmParams) -> str:
        raise NotImplementedError


class HttpProvider(Provider):
    """OpenAI-compatible chat completions endpoint over HTTP."""

    name = "http"

    def __init__(self, endpoint: str | None = None, api_key: str | None = None,
                 session: requests.Session | None = None):
        self.endpoint = endpoint or os.environ.get(ENDPOINT_ENV, "")
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        if not self.endpoint:
            raise ProviderError(f"no endpoint configured; set {ENDPOINT_ENV}")
        self.session = session or requests.Session()

    def complete_once(self, prompt: str, params: LlmParams) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        payload = {
            "model": params.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": params.temperature,
            "top_p": params.top_p,
        }
        try:
            resp = self.session.post(
                self.endpoint, headers=headers, json=payload, timeout=params.timeout
            )
        except requests.Timeout as exc:
            raise TransientProviderError(f"timeout after {params.timeout}s") from exc
        except requests.ConnectionError as exc:
            raise TransientProviderError(str(exc)) from exc
        if resp.status_code in (401, 403):
            raise AuthError(f"provider rejected credentials (HTTP {resp.status_code})")
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransientProviderError(f"HTTP {resp.status_code}")
        if resp.status_code != 200:
            raise ProviderError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            data = resp.json()
            return data["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"malformed provider response: {exc}") from exc


class MockProvider(Provider):
    """Recorded-fixture provider: prompt (or fingerprint) -> canned response.

    strict=True raises ProviderError naming the fingerprint for unknown
    prompts; otherwise a deterministic placeholder is returned. fail_times
    makes the first N calls raise a transient error, for retry tests.
    """

    name = "mock"

    def __init__(self, fixtures: dict[str, str] | None = None, *, strict: bool = False,
                 fail_times: int = 0):
        self.fixtures = dict(fixtures or {})
        self.strict = strict
        self._fail_remaining = fail_times
        self._lock = threading.Lock()

    def complete_once(self, prompt: str, params: LlmParams) -> str:
        with self._lock:
            if self._fail_remaining > 0:
                self._fail_remaining -= 1
                raise TransientProviderError("mock transient failure")
        if prompt in self.fixtures:
            return self.fixtures[prompt]
        fp = prompt_fingerprint(prompt)
        if fp in self.fixtures:
            return self.fixtures[fp]
        if self.strict:
            raise ProviderError(f"mock has no fixture for prompt fingerprint {fp}")
        return f"mock-response-{fp[:8]}"


@dataclass
class CompletionRecord:
    timestamp: float
    prompt_fingerprint: str
    model: str
    latency_ms: float
    retries: int


class Gateway:
    """Bounds concurrency, retries transient failures, logs every call.

    Backoff starts at 1 s and doubles per retry with +/-20% jitter. A JSONL
    run log line {timestamp, prompt_fingerprint, model, latency_ms, retries}
    is appended per completed call when run_log_path is set.
    """

    def __init__(self, provider: Provider, params: LlmParams | None = None, *,
                 max_parallel: int = 4, run_log_path: str | None = None,
                 backoff_initial: float = 1.0, backoff_factor: float = 2.0,
                 sleep=time.sleep, jitter_rng: random.Random | None = None):
        self.provider = provider
        self.params = params or LlmParams()
        self._semaphore = threading.Semaphore(max_parallel)
        self.run_log_path = run_log_path
        self.backoff_initial = backoff_initial
        self.backoff_factor = backoff_factor
        self._sleep = sleep
        self._jitter = jitter_rng or random.Random()
        self._log_lock = threading.Lock()
        self.records: list[CompletionRecord] = []

    def complete(self, prompt: str, params: LlmParams | None = None) -> str:
        p = params or self.params
        retries = 0
        start = time.monotonic()
        with self._semaphore:
            while True:
                try:
                    text = self.provider.complete_once(prompt, p)
                    break
                except TransientProviderError as exc:
                    if retries >= p.max_retries:
                        if "timeout" in str(exc).lower():
                            raise GatewayTimeout(
                                f"gave up after {retries} retries: {exc}"
                            ) from exc
                        raise ProviderError(
                            f"gave up after {retries} retries: {exc}"
                        ) from exc
                    delay = self.backoff_initial * (self.backoff_factor ** retries)
                    delay *= 1.0 + self._jitter.uniform(-0.2, 0.2)
                    self._sleep(delay)
                    retries += 1
        latency_ms = (time.monotonic() - start) * 1000.0
        record = CompletionRecord(
            timestamp=time.time(),
            prompt_fingerprint=prompt_fingerprint(prompt),
            model=p.model_name,
            latency_ms=latency_ms,
            retries=retries,
        )
        self.records.append(record)
        self._write_log(record)
        return text

    def _write_log(self, record: CompletionRecord) -> None:
        if not self.run_log_path:
            return
        line = json.dumps(
            {
                "timestamp": record.timestamp,
                "prompt_fingerprint": record.prompt_fingerprint,
                "model": record.model,
                "latency_ms": round(record.latency_ms, 3),
                "retries": record.retries,
            }
        )
        with self._log_lock, open(self.run_log_path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")
