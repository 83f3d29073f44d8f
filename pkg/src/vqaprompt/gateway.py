"""Uniform completion interface over HTTP endpoints and deterministic mocks.

The wire protocol is a completions-style JSON POST::

    {"model": ..., "prompt": ..., "max_tokens": ..., "temperature": ..., "stop": [...]}
      -> {"choices": [{"text": ...}]}

Transient failures (HTTP 429/5xx, timeouts, connection errors) retry with
exponential backoff up to a configured attempt budget; authentication and
other client errors surface immediately. A process-wide semaphore bounds
in-flight requests. Mock gateways are pure functions of the prompt, so runs
against them are bit-reproducible.
"""

from __future__ import annotations

import hashlib
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Mapping, Protocol, Sequence

from .errors import (
    AuthenticationError,
    ConfigError,
    EmptyCompletionError,
    GatewayError,
    MalformedResponseError,
    RetryExhaustedError,
)
from .voting import normalize_answer

DEFAULT_STOP_SEQUENCES = ("\n", "===")
DEFAULT_MAX_TOKENS = 16
DEFAULT_TEMPERATURE = 0.0

_MC_ANSWER = re.compile(r"\(([A-Da-d])\)")


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    max_tokens: int = DEFAULT_MAX_TOKENS
    temperature: float = DEFAULT_TEMPERATURE
    stop_sequences: tuple[str, ...] = DEFAULT_STOP_SEQUENCES

    def __post_init__(self) -> None:
        if self.max_tokens < 1:
            raise ConfigError("max_tokens must be >= 1")
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")


@dataclass(frozen=True)
class CompletionResult:
    raw_text: str
    parsed_answer: str
    latency_ms: int
    endpoint_id: str


def truncate_at_stop(text: str, stop_sequences: Sequence[str]) -> str:
    cut = len(text)
    for stop in stop_sequences:
        pos = text.find(stop)
        if pos >= 0:
            cut = min(cut, pos)
    return text[:cut].strip()


def parse_answer(
    raw_text: str,
    task_format: str = "standard",
    stop_sequences: Sequence[str] = DEFAULT_STOP_SEQUENCES,
) -> str:
    """Extract the answer line from a completion.

    Multiple-choice replies reduce to their first parenthesized letter; when
    none is present the trimmed line is returned for downstream choice
    projection.
    """
    line = truncate_at_stop(raw_text, stop_sequences)
    if not line:
        raise EmptyCompletionError("completion is empty after stop truncation")
    if task_format in ("multiple_choice", "science_hint"):
        m = _MC_ANSWER.search(line)
        if m:
            return f"({m.group(1).upper()})"
    return line


class Gateway(Protocol):
    endpoint_id: str

    def complete(self, request: CompletionRequest) -> CompletionResult: ...


def prompt_sha256(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


# --------------------------------------------------------------------------
# Mock gateways


def _parse_prompt_line(prompt: str, prefix: str) -> str | None:
    """Content of the last prompt line starting with ``prefix`` (testing block)."""
    last = None
    for line in prompt.splitlines():
        if line.startswith(prefix):
            last = line[len(prefix):].strip()
    return last


def parse_candidates_line(prompt: str) -> list[str]:
    """Answer strings from the testing block's Candidates line."""
    content = _parse_prompt_line(prompt, "Candidates: ")
    if content is None:
        return []
    answers = []
    for part in content.split(", "):
        part = part.strip()
        if part.endswith(")") and "(" in part:
            part = part[: part.rfind("(")]
        if part:
            answers.append(part)
    return answers


class MockGateway:
    """Deterministic gateway driven by a policy function over the prompt."""

    def __init__(self, policy: str, reply_fn: Callable[[str], str]):
        self.endpoint_id = f"mock:{policy}"
        self._reply_fn = reply_fn

    def complete(self, request: CompletionRequest) -> CompletionResult:
        raw = self._reply_fn(request.prompt)
        parsed = parse_answer(raw, stop_sequences=request.stop_sequences)
        return CompletionResult(raw, parsed, latency_ms=0, endpoint_id=self.endpoint_id)


def echo_top1_gateway() -> MockGateway:
    """Replies with the first answer on the testing block's Candidates line."""

    def reply(prompt: str) -> str:
        answers = parse_candidates_line(prompt)
        if not answers:
            raise GatewayError("echo_top1 mock needs a Candidates line in the prompt")
        return answers[0]

    return MockGateway("echo_top1", reply)


def candidate_oracle_gateway(gold_by_question: Mapping[str, str]) -> MockGateway:
    """Replies with the hidden gold answer when it appears among the prompt's
    candidates, else the top-1 candidate; a fixed wrong token when there are
    no candidates at all."""

    def reply(prompt: str) -> str:
        question = _parse_prompt_line(prompt, "Question: ")
        if question is None or question not in gold_by_question:
            raise GatewayError(f"candidate_oracle mock cannot resolve question {question!r}")
        gold = gold_by_question[question]
        answers = parse_candidates_line(prompt)
        if not answers:
            return "unknown"
        normalized = {normalize_answer(a) for a in answers}
        if normalize_answer(gold) in normalized:
            return gold
        return answers[0]

    return MockGateway("candidate_oracle", reply)


def scripted_gateway(
    table: Mapping[str, str], strict: bool = True, default_reply: str = "unknown"
) -> MockGateway:
    """Replies from an exact prompt-hash table."""

    def reply(prompt: str) -> str:
        digest = prompt_sha256(prompt)
        if digest in table:
            return table[digest]
        if strict:
            raise GatewayError(f"scripted mock has no reply for prompt hash {digest}")
        return default_reply

    return MockGateway("scripted", reply)


# --------------------------------------------------------------------------
# HTTP gateway


@dataclass
class GatewayConfig:
    endpoint_url: str = ""
    model: str = ""
    api_key_env: str = ""
    max_in_flight: int = 4
    retries: int = 5
    backoff_base_ms: int = 100
    timeout_ms: int = 30000


class HttpGateway:
    """Completions client with retry, backoff, and bounded concurrency."""

    def __init__(self, config: GatewayConfig, sleep: Callable[[float], None] = time.sleep):
        if not config.endpoint_url:
            raise ConfigError("http gateway needs an endpoint URL")
        if config.retries < 1:
            raise ConfigError("retries must be >= 1")
        self.config = config
        self.endpoint_id = config.endpoint_url
        self._sleep = sleep
        self._limiter = threading.Semaphore(config.max_in_flight)

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.config.api_key_env:
            import os

            key = os.environ.get(self.config.api_key_env, "")
            if not key:
                raise ConfigError(
                    f"environment variable {self.config.api_key_env} is not set"
                )
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def complete(self, request: CompletionRequest) -> CompletionResult:
        import requests

        payload = {
            "model": self.config.model,
            "prompt": request.prompt,
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
            "stop": list(request.stop_sequences),
        }
        headers = self._headers()
        timeout_s = self.config.timeout_ms / 1000.0
        last_error: Exception | None = None
        start = time.monotonic()
        for attempt in range(1, self.config.retries + 1):
            if attempt > 1:
                self._sleep(self.config.backoff_base_ms / 1000.0 * 2 ** (attempt - 2))
            with self._limiter:
                try:
                    resp = requests.post(
                        self.config.endpoint_url, json=payload, headers=headers,
                        timeout=timeout_s,
                    )
                except requests.RequestException as exc:
                    last_error = exc
                    continue
            if resp.status_code in (401, 403):
                raise AuthenticationError(f"endpoint rejected credentials: HTTP {resp.status_code}")
            if resp.status_code == 429 or resp.status_code >= 500:
                last_error = GatewayError(f"HTTP {resp.status_code}: {resp.text[:200]}")
                continue
            if resp.status_code != 200:
                raise GatewayError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                raw = resp.json()["choices"][0]["text"]
            except (ValueError, KeyError, IndexError) as exc:
                raise MalformedResponseError(f"reply is not completions-shaped: {exc}") from exc
            latency_ms = int((time.monotonic() - start) * 1000)
            parsed = parse_answer(raw, stop_sequences=request.stop_sequences)
            return CompletionResult(raw, parsed, latency_ms, self.endpoint_id)
        raise RetryExhaustedError(
            f"gave up after {self.config.retries} attempts: {last_error}"
        )


def batch_complete(
    gateway: Gateway,
    requests_in_order: Sequence[CompletionRequest],
    workers: int = 1,
) -> list[CompletionResult]:
    """Complete a batch; results align with submission order regardless of
    completion order."""
    if workers <= 1:
        return [gateway.complete(r) for r in requests_in_order]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(gateway.complete, requests_in_order))
