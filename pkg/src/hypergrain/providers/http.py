"""HTTP client for JSON chat-completion and embeddings endpoints.

Speaks the de-facto /chat/completions and /embeddings protocol. Transient
transport failures (connection errors, 429, 5xx) are retried with
exponential backoff; anything else surfaces immediately.
"""
from __future__ import annotations

import json
import logging
import threading
import time

import requests

from ..corpus import count_tokens
from ..errors import DimensionMismatch, ProviderUnavailable, ResponseTooLong
from .base import ChatRequest, EmbeddingVector, Provider, UsageRecord

log = logging.getLogger(__name__)

RETRYABLE_STATUS = {429, 500, 502, 503, 504}


class HttpProvider(Provider):
    def __init__(
        self,
        base_url: str,
        chat_model: str,
        embed_model: str,
        api_key: str = "",
        max_retries: int = 3,
        backoff_seconds: float = 0.5,
        timeout_seconds: float = 60.0,
        max_concurrency: int = 4,
        session: requests.Session | None = None,
    ):
        super().__init__()
        self.base_url = base_url.rstrip("/")
        self.chat_model = chat_model
        self.embed_model = embed_model
        self.api_key = api_key
        self.max_retries = max_retries
        self.backoff_seconds = backoff_seconds
        self.timeout_seconds = timeout_seconds
        self.session = session or requests.Session()
        self._gate = threading.Semaphore(max_concurrency)

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        return headers

    def _post(self, path: str, payload: dict) -> dict:
        url = f"{self.base_url}{path}"
        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                time.sleep(self.backoff_seconds * (2 ** (attempt - 1)))
            try:
                with self._gate:
                    if log.isEnabledFor(logging.DEBUG):
                        log.debug(
                            "POST %s auth=%s body=%s",
                            url, self._redacted(), json.dumps(payload)[:2000],
                        )
                    response = self.session.post(
                        url, json=payload, headers=self._headers(), timeout=self.timeout_seconds
                    )
            except requests.RequestException as exc:
                last_error = exc
                log.debug("transport failure on %s (attempt %d): %s", url, attempt + 1, exc)
                continue
            log.debug("status %d from %s body=%s", response.status_code, url, response.text[:2000])
            if response.status_code in RETRYABLE_STATUS:
                last_error = ProviderUnavailable(f"{url} returned {response.status_code}")
                continue
            if response.status_code != 200:
                raise ProviderUnavailable(f"{url} returned {response.status_code}: {response.text[:200]}")
            return response.json()
        raise ProviderUnavailable(f"{url} failed after {self.max_retries + 1} attempts: {last_error}")

    def _redacted(self) -> str:
        if not self.api_key:
            return "<none>"
        return f"{self.api_key[:3]}...<redacted>"

    def chat(self, request: ChatRequest, phase: str = "construction") -> str:
        request.validate()
        payload = {
            "model": self.chat_model,
            "messages": [
                {"role": "system", "content": request.system_prompt},
                {"role": "user", "content": request.user_prompt},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
        started = time.perf_counter()
        body = self._post("/chat/completions", payload)
        elapsed_ms = (time.perf_counter() - started) * 1000.0
        try:
            choice = body["choices"][0]
            text = choice["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderUnavailable(f"malformed chat response: {exc}") from exc
        usage = body.get("usage", {})
        self.usage.add(
            UsageRecord(
                phase=phase,
                prompt_tokens=int(
                    usage.get(
                        "prompt_tokens",
                        count_tokens(request.system_prompt) + count_tokens(request.user_prompt),
                    )
                ),
                response_tokens=int(usage.get("completion_tokens", count_tokens(text))),
                wall_time_ms=elapsed_ms,
            )
        )
        if choice.get("finish_reason") == "length":
            raise ResponseTooLong("model stopped at the output-token ceiling")
        return text

    def embed(self, texts: list[str], phase: str = "construction") -> list[EmbeddingVector]:
        self._validate_embed_inputs(texts)
        started = time.perf_counter()
        body = self._post("/embeddings", {"model": self.embed_model, "input": texts})
        elapsed_ms = (time.perf_counter() - started) * 1000.0
        try:
            rows = sorted(body["data"], key=lambda r: r.get("index", 0))
            vectors = [EmbeddingVector(tuple(float(v) for v in row["embedding"])) for row in rows]
        except (KeyError, TypeError) as exc:
            raise ProviderUnavailable(f"malformed embeddings response: {exc}") from exc
        if len(vectors) != len(texts):
            raise ProviderUnavailable(f"expected {len(texts)} embeddings, got {len(vectors)}")
        dims = {v.dimension for v in vectors}
        if len(dims) > 1:
            raise DimensionMismatch(f"provider returned mixed dimensions {sorted(dims)}")
        usage = body.get("usage", {})
        self.usage.add(
            UsageRecord(
                phase=phase,
                prompt_tokens=int(usage.get("prompt_tokens", sum(count_tokens(t) for t in texts))),
                response_tokens=0,
                wall_time_ms=elapsed_ms,
            )
        )
        return vectors
