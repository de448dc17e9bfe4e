"""Chat and embedding clients: JSON-over-HTTP backends plus offline mocks.

Model names and endpoints are configuration, never dependencies; the mocks
make the whole pipeline runnable and testable without any network access.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

import numpy as np
import requests

from .index import tokenize

DEFAULT_TEMPERATURE = 0.2
DEFAULT_MAX_TOKENS = 512

ROLES = ("system", "user", "assistant")


class ClientError(RuntimeError):
    """Base class for model-client failures."""


class TransportError(ClientError):
    """Timeout or connection failure, after retries were exhausted."""


class HttpStatusError(ClientError):
    def __init__(self, status: int, body: str) -> None:
        super().__init__(f"HTTP {status}: {body}")
        self.status = status
        self.body = body


class EmptyGenerationError(ClientError):
    """The model returned an empty completion."""


class UnscriptedCallError(ClientError):
    """A mock client received a request it has no canned response for."""


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if self.role in ("system", "user") and not self.content:
            raise ValueError(f"{self.role} message content must be non-empty")


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple[ChatMessage, ...]
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int = DEFAULT_MAX_TOKENS

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("a chat request needs at least one message")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


def system_request(prompt: str, user: str | None = None) -> ChatRequest:
    """Build the one-system-message request shape the pipeline uses."""
    messages = [ChatMessage("system", prompt)]
    if user:
        messages.append(ChatMessage("user", user))
    return ChatRequest(messages=tuple(messages))


@dataclass(frozen=True)
class ClientConfig:
    endpoint: str
    model_name: str
    timeout: float = 30.0
    max_attempts: int = 3
    max_in_flight: int = 4
    backoff: float = 0.5

    def __post_init__(self) -> None:
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")


class Embedding:
    """A unit-norm (or all-zero) float vector."""

    __slots__ = ("values",)

    def __init__(self, values: Sequence[float] | np.ndarray) -> None:
        vec = np.asarray(values, dtype=np.float64)
        if vec.ndim != 1 or vec.size == 0:
            raise ValueError("embedding must be a non-empty 1-d vector")
        norm = float(np.linalg.norm(vec))
        self.values = vec / norm if norm > 0.0 else np.zeros(vec.size, dtype=np.float64)

    @property
    def dim(self) -> int:
        return int(self.values.size)

    def is_zero(self) -> bool:
        return not np.any(self.values)


def cosine(a: Embedding, b: Embedding) -> float:
    """Cosine similarity in [-1, 1]; zero vectors yield 0 by definition."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    na = float(np.linalg.norm(a.values))
    nb = float(np.linalg.norm(b.values))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a.values, b.values) / (na * nb))


def _fnv1a(data: bytes) -> int:
    value = 0x811C9DC5
    for byte in data:
        value = ((value ^ byte) * 0x01000193) & 0xFFFFFFFF
    return value


def mock_embed(text: str, dim: int = 256) -> Embedding:
    """Deterministic hashed bag-of-words embedding (FNV-1a per token)."""
    vec = np.zeros(dim, dtype=np.float64)
    for token in tokenize(text):
        vec[_fnv1a(token.encode("utf-8")) % dim] += 1.0
    return Embedding(vec)


class ChatClient(Protocol):
    def chat(self, request: ChatRequest) -> str: ...


class EmbedClient(Protocol):
    def embed(self, texts: Sequence[str]) -> list[Embedding]: ...


def _post_with_retry(config: ClientConfig, payload: dict, semaphore: threading.BoundedSemaphore) -> dict:
    last_failure = ""
    for attempt in range(config.max_attempts):
        try:
            with semaphore:
                response = requests.post(config.endpoint, json=payload, timeout=config.timeout)
        except requests.Timeout:
            last_failure = "timeout"
        except requests.ConnectionError as exc:
            # Retries are reserved for timeouts and 5xx per the declared policy.
            raise TransportError(f"connection failed: {exc}") from exc
        else:
            if response.status_code >= 500:
                last_failure = f"HTTP {response.status_code}: {response.text}"
            elif response.status_code >= 400:
                raise HttpStatusError(response.status_code, response.text)
            else:
                try:
                    return response.json()
                except ValueError as exc:
                    raise ClientError(f"non-JSON response from {config.endpoint}") from exc
        if attempt + 1 < config.max_attempts:
            time.sleep(config.backoff * 2**attempt)
    raise TransportError(f"gave up after {config.max_attempts} attempts: {last_failure}")


class HttpChatClient:
    """Chat-completion client speaking the de-facto messages/choices JSON shape."""

    def __init__(self, config: ClientConfig) -> None:
        self.config = config
        self._semaphore = threading.BoundedSemaphore(config.max_in_flight)

    def chat(self, request: ChatRequest) -> str:
        payload = {
            "model": self.config.model_name,
            "messages": [{"role": m.role, "content": m.content} for m in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        body = _post_with_retry(self.config, payload, self._semaphore)
        try:
            content = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ClientError(f"malformed chat response: {json.dumps(body)[:200]}") from exc
        if not isinstance(content, str) or not content.strip():
            raise EmptyGenerationError("empty generation")
        return content


class HttpEmbedClient:
    """Embedding client: posts {"input": [...]} and normalizes vectors on receipt."""

    def __init__(self, config: ClientConfig) -> None:
        self.config = config
        self._semaphore = threading.BoundedSemaphore(config.max_in_flight)

    def embed(self, texts: Sequence[str]) -> list[Embedding]:
        if not texts:
            raise ValueError("texts must be a non-empty list")
        payload = {"model": self.config.model_name, "input": list(texts)}
        body = _post_with_retry(self.config, payload, self._semaphore)
        try:
            rows = [item["embedding"] for item in body["data"]]
        except (KeyError, TypeError) as exc:
            raise ClientError(f"malformed embedding response: {json.dumps(body)[:200]}") from exc
        if len(rows) != len(texts):
            raise ClientError(f"expected {len(texts)} embeddings, got {len(rows)}")
        embeddings = [Embedding(row) for row in rows]
        dims = {e.dim for e in embeddings}
        if len(dims) > 1:
            raise ClientError(f"dimension mismatch across batch: {sorted(dims)}")
        return embeddings


# Each prompt template carries one of these marker substrings in its system
# prompt; the mock uses them to recognize which pipeline step is calling.
DEFAULT_SCENARIO_MARKERS: tuple[tuple[str, str], ...] = (
    ("InfoRetCo", "short_pq"),
    ("Passage Generation Robot", "long_pq"),
    ("Passage Writing Robot", "combined_pq"),
    ("Personalized Passage Robot", "ptkb_pq"),
    ("concise summarization assistant", "summarize"),
    ("personalization analyst", "ptkb_classify"),
    ("reasoning assistant inside a retrieval system", "cot"),
    ("query clarification assistant", "clarify"),
    ("helpful conversational assistant", "response"),
)


@dataclass(frozen=True)
class MockScript:
    """Canned completions keyed by "<scenario>:<n>" or a catch-all "<scenario>"."""

    responses: Mapping[str, str]
    variant: str = ""
    topics: tuple[str, ...] = ()


def load_mock_script(path: str | Path) -> MockScript:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    responses = raw.get("responses", {})
    if not isinstance(responses, dict):
        raise ValueError(f"{path}: \"responses\" must be an object")
    for key, value in responses.items():
        if not isinstance(value, str):
            raise ValueError(f"{path}: response for {key!r} must be a string")
    return MockScript(
        responses=dict(responses),
        variant=str(raw.get("variant", "")),
        topics=tuple(raw.get("topics", ())),
    )


class MockChatClient:
    """Deterministic scripted chat playback for offline runs and tests.

    The scenario is recognized from a marker substring in the system prompt;
    a per-scenario call counter selects the "<scenario>:<n>" entry, falling
    back to a bare "<scenario>" entry when present. Unknown keys raise.
    """

    def __init__(
        self,
        script: MockScript | Mapping[str, str],
        markers: Iterable[tuple[str, str]] = DEFAULT_SCENARIO_MARKERS,
    ) -> None:
        if isinstance(script, MockScript):
            self.script = script
        else:
            self.script = MockScript(responses=dict(script))
        self.markers = tuple(markers)
        self.calls: list[str] = []
        self._counts: dict[str, int] = {}
        self._lock = threading.Lock()

    def _scenario(self, request: ChatRequest) -> str:
        system_text = "\n".join(m.content for m in request.messages if m.role == "system")
        for marker, scenario in self.markers:
            if marker in system_text:
                return scenario
        return "unknown"

    def chat(self, request: ChatRequest) -> str:
        scenario = self._scenario(request)
        with self._lock:
            count = self._counts.get(scenario, 0)
            self._counts[scenario] = count + 1
            self.calls.append(scenario)
        key = f"{scenario}:{count}"
        responses = self.script.responses
        if key in responses:
            return responses[key]
        if scenario in responses:
            return responses[scenario]
        raise UnscriptedCallError(f"unscripted call: {key}")

    def call_count(self, scenario: str) -> int:
        with self._lock:
            return self._counts.get(scenario, 0)


class MockEmbedClient:
    """Hashed bag-of-words embedder; counts work for cache-accounting tests."""

    def __init__(self, dim: int = 256) -> None:
        self.dim = dim
        self.batch_calls = 0
        self.texts_embedded = 0
        self._lock = threading.Lock()

    def embed(self, texts: Sequence[str]) -> list[Embedding]:
        if not texts:
            raise ValueError("texts must be a non-empty list")
        with self._lock:
            self.batch_calls += 1
            self.texts_embedded += len(texts)
        return [mock_embed(text, self.dim) for text in texts]
