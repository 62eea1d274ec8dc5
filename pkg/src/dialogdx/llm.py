"""Chat-completion gateway: one interface over remote APIs and scripted mocks.

Every pipeline stage (retrieval gate, analyzer, doctor, patient simulator,
judge) issues requests through this module with a purpose tag, and every
backend keeps a request log, so tests can assert exactly which stages
fired and what they saw.  The mock backend never recycles a script: a
request beyond the scripted queue is an error.
"""

from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Protocol, Sequence

from .transport import BackendUnavailable, post_json

__all__ = [
    "Purpose",
    "ChatMessage",
    "ChatRequest",
    "ModelConfig",
    "ChatBackend",
    "MockBackend",
    "RemoteChatBackend",
    "ScriptExhausted",
    "ResponseEmpty",
    "BackendUnavailable",
    "user_request",
]


class Purpose(str, Enum):
    GATE = "gate"
    ANALYZER = "analyzer"
    DOCTOR = "doctor"
    PATIENT = "patient"
    JUDGE = "judge"


# Gating and judging should be maximally stable; generation keeps some variety.
DEFAULT_TEMPERATURES = {
    Purpose.GATE: 0.0,
    Purpose.JUDGE: 0.0,
    Purpose.ANALYZER: 0.7,
    Purpose.DOCTOR: 0.7,
    Purpose.PATIENT: 0.7,
}

DEFAULT_MAX_OUTPUT_TOKENS = 1024


class GatewayError(Exception):
    pass


class ScriptExhausted(GatewayError):
    def __init__(self, purpose: "Purpose"):
        super().__init__(f"mock script exhausted for purpose {purpose.value!r}")
        self.purpose = purpose


class ResponseEmpty(GatewayError):
    def __init__(self) -> None:
        super().__init__("backend returned an empty response")


@dataclass(frozen=True)
class ChatMessage:
    role: str  # "system" | "user" | "assistant"
    content: str

    def __post_init__(self) -> None:
        if self.role not in ("system", "user", "assistant"):
            raise ValueError(f"unknown role {self.role!r}")
        if not self.content:
            raise ValueError("message content must be non-empty")


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple[ChatMessage, ...]
    model_name: str
    purpose: Purpose
    temperature: float = 0.0
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("request must contain at least one message")
        if self.messages[0].role == "assistant":
            raise ValueError("first message must be system or user")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_output_tokens <= 0:
            raise ValueError("max_output_tokens must be positive")

    def text(self) -> str:
        """Concatenated message contents, for log-based substring assertions."""
        return "\n".join(m.content for m in self.messages)


@dataclass(frozen=True)
class ModelConfig:
    """Per-purpose model names; heterogeneous stacks are the norm.

    The gate defaults to the doctor's model; analyzer likewise.
    """

    doctor: str = "gpt-4o-mini"
    patient: str = "gpt-4o-mini"
    judge: str = "gpt-4o"
    analyzer: str | None = None
    gate: str | None = None

    def model_for(self, purpose: Purpose) -> str:
        if purpose is Purpose.DOCTOR:
            return self.doctor
        if purpose is Purpose.PATIENT:
            return self.patient
        if purpose is Purpose.JUDGE:
            return self.judge
        if purpose is Purpose.ANALYZER:
            return self.analyzer or self.doctor
        return self.gate or self.doctor

    def temperature_for(self, purpose: Purpose) -> float:
        return DEFAULT_TEMPERATURES[purpose]


def user_request(
    purpose: Purpose,
    prompt: str,
    models: ModelConfig,
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS,
) -> ChatRequest:
    """Single-user-message request with per-purpose model and temperature."""
    return ChatRequest(
        messages=(ChatMessage(role="user", content=prompt),),
        model_name=models.model_for(purpose),
        purpose=purpose,
        temperature=models.temperature_for(purpose),
        max_output_tokens=max_output_tokens,
    )


class ChatBackend(Protocol):
    request_log: list[ChatRequest]

    def chat(self, request: ChatRequest) -> str: ...


@dataclass
class MockBackend:
    """Deterministic scripted backend.

    ``script`` is an ordered list of (purpose, response) pairs consumed as
    per-purpose FIFO queues; alternatively ``responder`` computes responses
    from the full request.  All requests are logged for assertions.
    """

    script: Sequence[tuple[Purpose | str, str]] = ()
    responder: Callable[[ChatRequest], str] | None = None
    request_log: list[ChatRequest] = field(default_factory=list)

    def __post_init__(self) -> None:
        self._queues: dict[Purpose, deque[str]] = {}
        for purpose, text in self.script:
            self._queues.setdefault(Purpose(purpose), deque()).append(text)
        self._lock = threading.Lock()

    def chat(self, request: ChatRequest) -> str:
        with self._lock:
            self.request_log.append(request)
            if self.responder is not None:
                response = self.responder(request)
            else:
                queue = self._queues.get(request.purpose)
                if not queue:
                    raise ScriptExhausted(request.purpose)
                response = queue.popleft()
        if not response:
            raise ResponseEmpty()
        return response

    def remaining(self, purpose: Purpose) -> int:
        queue = self._queues.get(purpose)
        return len(queue) if queue else 0


class RemoteChatBackend:
    """OpenAI-compatible chat-completions client with bounded retries and a
    configurable in-flight request cap."""

    def __init__(
        self,
        base_url: str = "https://api.openai.com/v1",
        api_key: str | None = None,
        timeout: float = 120.0,
        max_in_flight: int = 4,
    ):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key
        self.timeout = timeout
        self.request_log: list[ChatRequest] = []
        self._lock = threading.Lock()
        self._in_flight = threading.BoundedSemaphore(max_in_flight)

    def chat(self, request: ChatRequest) -> str:
        with self._lock:
            self.request_log.append(request)
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        with self._in_flight:
            body = post_json(
                f"{self.base_url}/chat/completions",
                {
                    "model": request.model_name,
                    "messages": [
                        {"role": m.role, "content": m.content} for m in request.messages
                    ],
                    "temperature": request.temperature,
                    "max_tokens": request.max_output_tokens,
                },
                headers=headers,
                timeout=self.timeout,
            )
        try:
            content = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise BackendUnavailable("malformed chat response")
        if not content or not content.strip():
            raise ResponseEmpty()
        return content
