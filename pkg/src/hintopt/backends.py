"""Text-generation backends behind one minimal protocol.

Everything that needs model output goes through ``generate(prompt, ...)``,
which returns plain completion strings. The HTTP client speaks the common
chat-completion shape; the mock client replays scripted outputs and records
every call, which is what the test suite and fixture-mode runs use.

Request body (HTTP):  {"model": ..., "messages": [{"role": "user",
"content": prompt}], "temperature": t, "n": n, "max_tokens": m}
Response body:        {"choices": [{"message": {"content": text}}, ...]}
"""

from __future__ import annotations

import logging
import time
from collections.abc import Callable, Sequence
from typing import Any, Protocol

import httpx

from .errors import GenerationBackendError

log = logging.getLogger(__name__)


class GenerationClient(Protocol):
    def generate(
        self,
        prompt: str,
        *,
        n: int = 1,
        temperature: float = 0.0,
        max_tokens: int | None = None,
    ) -> list[str]: ...


class HttpGenerationClient:
    """Chat-completion client over HTTP.

    Retries transient failures with a flat backoff and raises
    :class:`GenerationBackendError` once the retry budget is exhausted.
    ``transport`` is exposed for tests (httpx mock transports plug in).
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        *,
        api_key: str | None = None,
        timeout_s: float = 120.0,
        max_retries: int = 2,
        retry_wait_s: float = 0.5,
        transport: httpx.BaseTransport | None = None,
    ):
        self.endpoint = endpoint
        self.model = model
        self.max_retries = max_retries
        self.retry_wait_s = retry_wait_s
        headers = {"Content-Type": "application/json"}
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self._client = httpx.Client(
            timeout=timeout_s, headers=headers, transport=transport
        )

    def close(self) -> None:
        self._client.close()

    def _request(self, payload: dict) -> list[str]:
        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            try:
                response = self._client.post(self.endpoint, json=payload)
                response.raise_for_status()
                body = response.json()
                return [
                    choice["message"]["content"] for choice in body["choices"]
                ]
            except (httpx.HTTPError, KeyError, TypeError, ValueError) as exc:
                last_error = exc
                if attempt < self.max_retries:
                    log.warning(
                        "generation request failed (attempt %d/%d): %s",
                        attempt + 1,
                        self.max_retries + 1,
                        exc,
                    )
                    time.sleep(self.retry_wait_s)
        raise GenerationBackendError(
            f"generation backend failed after {self.max_retries + 1} attempts: "
            f"{last_error}"
        ) from last_error

    def generate(
        self,
        prompt: str,
        *,
        n: int = 1,
        temperature: float = 0.0,
        max_tokens: int | None = None,
    ) -> list[str]:
        if n < 1:
            raise ValueError(f"n must be >= 1, got {n}")
        payload: dict[str, Any] = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": temperature,
            "n": n,
        }
        if max_tokens is not None:
            payload["max_tokens"] = max_tokens
        outputs = self._request(payload)
        # Backends that ignore "n" get polled until the sample count is met.
        while len(outputs) < n:
            remaining = dict(payload, n=n - len(outputs))
            outputs.extend(self._request(remaining))
        return outputs[:n]


class MockGenerationClient:
    """Scripted backend for tests and offline runs.

    ``outputs`` is either a flat sequence consumed one string per sample,
    or a callable ``(prompt, n, temperature) -> list[str]``. Every call is
    recorded in ``calls``.
    """

    def __init__(
        self,
        outputs: Sequence[str] | Callable[[str, int, float], list[str]],
        *,
        cycle: bool = True,
    ):
        self._outputs = outputs
        self._cycle = cycle
        self._cursor = 0
        self.calls: list[dict] = []

    @property
    def call_count(self) -> int:
        return len(self.calls)

    def generate(
        self,
        prompt: str,
        *,
        n: int = 1,
        temperature: float = 0.0,
        max_tokens: int | None = None,
    ) -> list[str]:
        if n < 1:
            raise ValueError(f"n must be >= 1, got {n}")
        self.calls.append(
            {
                "prompt": prompt,
                "n": n,
                "temperature": temperature,
                "max_tokens": max_tokens,
            }
        )
        if callable(self._outputs):
            result = list(self._outputs(prompt, n, temperature))
            if len(result) != n:
                raise GenerationBackendError(
                    f"scripted callable returned {len(result)} outputs, expected {n}"
                )
            return result
        outputs = []
        for _ in range(n):
            if self._cursor >= len(self._outputs):
                if not self._cycle or not self._outputs:
                    raise GenerationBackendError("scripted outputs exhausted")
                self._cursor = 0
            outputs.append(self._outputs[self._cursor])
            self._cursor += 1
        return outputs
