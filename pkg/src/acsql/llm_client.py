"""Minimal chat-completion client for actor and critic turns.

Speaks the OpenAI-compatible wire shape (POST {base_url}/chat/completions
with {model, messages, temperature, max_tokens}) because that is what
both commercial endpoints and local open-model servers expose. API keys
are read from an environment variable at call time and never logged or
persisted.
"""

import logging
import os
import threading
import time
from dataclasses import dataclass

import requests

logger = logging.getLogger(__name__)

_RETRYABLE_STATUS = {429, 500, 502, 503, 504}


class TransportError(Exception):
    """Request could not be completed after all retries."""


class AuthenticationError(TransportError):
    """Endpoint rejected the credentials (401/403); never retried."""


class ResponseParseError(TransportError):
    """Endpoint replied but not in the expected shape; carries the raw body."""

    def __init__(self, message: str, body: str):
        super().__init__(message)
        self.body = body


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self) -> None:
        if self.role not in ("system", "user", "assistant"):
            raise ValueError(f"unknown role {self.role!r}")


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    model_name: str
    api_key_env_var: str = "LLM_API_KEY"
    temperature: float = 0.0
    max_tokens: int = 512
    timeout: float = 60.0
    max_retries: int = 3
    retry_backoff: tuple[float, ...] = (0.5, 1.0, 2.0)

    def __post_init__(self) -> None:
        if not self.base_url:
            raise ValueError("base_url must be non-empty")
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")
        if self.max_tokens < 1:
            raise ValueError(f"max_tokens must be >= 1, got {self.max_tokens}")
        if self.max_retries < 0:
            raise ValueError(f"max_retries must be >= 0, got {self.max_retries}")


# Optional global cap on in-flight requests, for rate-limit friendliness
# when many tasks run concurrently.
_request_gate: threading.Semaphore | None = None


def set_concurrency_cap(limit: int | None) -> None:
    """Cap concurrent HTTP requests across all threads (None = unlimited)."""
    global _request_gate
    _request_gate = None if limit is None else threading.Semaphore(limit)


def _backoff_delay(config: EndpointConfig, attempt: int) -> float:
    schedule = config.retry_backoff or (1.0,)
    return schedule[min(attempt, len(schedule) - 1)]


def _extract_content(resp: requests.Response) -> str:
    body = resp.text
    try:
        content = resp.json()["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise ResponseParseError(f"malformed completion response: {exc}", body) from exc
    if not isinstance(content, str):
        raise ResponseParseError("completion content is not text", body)
    return content


def complete(config: EndpointConfig, messages: list[ChatMessage]) -> str:
    """Return the first choice's message content for one chat completion.

    Retries transient failures (HTTP 429/5xx, connection errors,
    timeouts) up to max_retries times following the backoff schedule;
    auth failures are terminal.
    """
    if not messages:
        raise ValueError("messages must be non-empty")
    first = next((m for m in messages if m.role != "system"), None)
    if first is not None and first.role != "user":
        raise ValueError("first non-system message must come from the user")

    url = config.base_url.rstrip("/") + "/chat/completions"
    payload = {
        "model": config.model_name,
        "messages": [{"role": m.role, "content": m.content} for m in messages],
        "temperature": config.temperature,
        "max_tokens": config.max_tokens,
    }
    headers = {"Content-Type": "application/json"}
    api_key = os.environ.get(config.api_key_env_var)
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"

    last_error: Exception | None = None
    for attempt in range(config.max_retries + 1):
        if attempt > 0:
            time.sleep(_backoff_delay(config, attempt - 1))
        try:
            if _request_gate is not None:
                with _request_gate:
                    resp = requests.post(
                        url, json=payload, headers=headers, timeout=config.timeout
                    )
            else:
                resp = requests.post(
                    url, json=payload, headers=headers, timeout=config.timeout
                )
        except requests.RequestException as exc:
            last_error = exc
            logger.debug("completion attempt %d failed: %s", attempt + 1, exc)
            continue
        if resp.status_code in (401, 403):
            raise AuthenticationError(
                f"endpoint rejected credentials (HTTP {resp.status_code})"
            )
        if resp.status_code in _RETRYABLE_STATUS:
            last_error = TransportError(f"HTTP {resp.status_code}")
            logger.debug(
                "completion attempt %d got retryable HTTP %d", attempt + 1, resp.status_code
            )
            continue
        if resp.status_code != 200:
            raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        return _extract_content(resp)

    raise TransportError(
        f"completion failed after {config.max_retries + 1} attempts: {last_error}"
    )
