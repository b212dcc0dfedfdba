"""OpenAI-compatible chat client with retries, plus record/replay.

Every client exposes ``complete(system, user, config) -> str``. Pipelines
hold one client object and never care whether it talks to a server, records
what a server said, or replays a transcript file.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import threading
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Protocol

import httpx

logger = logging.getLogger(__name__)

RETRY_STATUS = {429, 500, 502, 503, 504}


class LLMError(Exception):
    pass


class ReplayMiss(LLMError):
    def __init__(self, prompt_hash: str):
        super().__init__(f"no recorded response for prompt hash {prompt_hash}")
        self.prompt_hash = prompt_hash


@dataclass(frozen=True)
class GenerationConfig:
    model_name: str = "llama-3-8b-instruct"
    endpoint_url: str = "http://localhost:8000/v1"
    temperature: float = 0.0
    max_tokens: int = 512
    timeout: float = 120.0
    api_key_env: str = "OPENAI_API_KEY"
    # prompt budget in tokens; None disables shortlist truncation
    context_tokens: int | None = None

    def __post_init__(self):
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")

    def replace(self, **changes) -> "GenerationConfig":
        return GenerationConfig(**{**asdict(self), **changes})


def prompt_hash(system: str, user: str, config: GenerationConfig) -> str:
    """Content hash of the request. The endpoint URL is deliberately left out."""
    payload = json.dumps(
        {"system": system, "user": user, "model": config.model_name,
         "temperature": config.temperature, "max_tokens": config.max_tokens},
        sort_keys=True, ensure_ascii=False, separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class ChatClient(Protocol):
    def complete(self, system: str, user: str, config: GenerationConfig) -> str: ...


class RateLimiter:
    """Minimum spacing between request starts."""

    def __init__(self, per_second: float | None):
        self.interval = 1.0 / per_second if per_second else 0.0
        self._next = 0.0
        self._lock = threading.Lock()

    def wait(self) -> None:
        if not self.interval:
            return
        with self._lock:
            now = time.monotonic()
            start = max(now, self._next)
            self._next = start + self.interval
        if start > now:
            time.sleep(start - now)


class HttpChatClient:
    """Chat-completions over HTTP.

    429 and 5xx responses, plus transport errors, are retried with
    exponential backoff ``base_delay * 2**attempt`` and full jitter, up to
    ``max_retries`` times. A global semaphore bounds in-flight requests.
    """

    def __init__(self, max_retries: int = 5, base_delay: float = 1.0,
                 max_concurrency: int = 4, rate_per_second: float | None = None,
                 http_client: httpx.Client | None = None,
                 sleep: Callable[[float], None] = time.sleep):
        self.max_retries = max_retries
        self.base_delay = base_delay
        self._sem = threading.BoundedSemaphore(max_concurrency)
        self._limiters: dict[str, RateLimiter] = {}
        self._rate = rate_per_second
        self._http = http_client or httpx.Client()
        self._sleep = sleep
        self._lock = threading.Lock()
        self.last_usage: dict | None = None

    def _limiter(self, url: str) -> RateLimiter:
        with self._lock:
            if url not in self._limiters:
                self._limiters[url] = RateLimiter(self._rate)
            return self._limiters[url]

    def _backoff(self, attempt: int) -> float:
        return random.uniform(0, self.base_delay * 2 ** attempt)

    def complete(self, system: str, user: str, config: GenerationConfig) -> str:
        text, _ = self.complete_with_meta(system, user, config)
        return text

    def complete_with_meta(self, system: str, user: str,
                           config: GenerationConfig) -> tuple[str, dict]:
        url = config.endpoint_url.rstrip("/") + "/chat/completions"
        headers = {}
        key = os.environ.get(config.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        messages = [{"role": "user", "content": user}]
        if system:
            messages.insert(0, {"role": "system", "content": system})
        body = {"model": config.model_name, "messages": messages,
                "temperature": config.temperature, "max_tokens": config.max_tokens}

        last_error = "no attempt made"
        for attempt in range(self.max_retries + 1):
            if attempt:
                delay = self._backoff(attempt - 1)
                logger.info("retry %d/%d for %s after %.2fs (%s)", attempt, self.max_retries,
                            url, delay, last_error)
                self._sleep(delay)
            self._limiter(url).wait()
            t0 = time.monotonic()
            try:
                with self._sem:
                    resp = self._http.post(url, json=body, headers=headers,
                                           timeout=config.timeout)
            except httpx.TransportError as exc:
                last_error = f"{type(exc).__name__}: {exc}"
                continue
            latency = time.monotonic() - t0
            if resp.status_code in RETRY_STATUS:
                last_error = f"HTTP {resp.status_code}"
                continue
            if resp.status_code >= 400:
                raise LLMError(f"HTTP {resp.status_code} from {url}: {resp.text[:200]}")
            try:
                data = resp.json()
                text = data["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise LLMError(f"malformed completion from {url}: {exc}") from exc
            if not isinstance(text, str):
                raise LLMError(f"completion content is not text: {text!r}")
            return text, {"latency": latency, "usage": data.get("usage") or {}}
        raise LLMError(f"{url} failed after {self.max_retries} retries: {last_error}")


class TranscriptStore:
    """Append-only JSON-lines file of completed requests, keyed by prompt hash."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._records: dict[str, dict] = {}
        if self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        rec = json.loads(line)
                        self._records[rec["prompt_hash"]] = rec

    def __contains__(self, key: str) -> bool:
        return key in self._records

    def __len__(self) -> int:
        return len(self._records)

    def get(self, key: str) -> dict | None:
        return self._records.get(key)

    def append(self, record: dict) -> None:
        line = json.dumps(record, ensure_ascii=False, sort_keys=True)
        with self._lock:
            if record["prompt_hash"] in self._records:
                return
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")
            self._records[record["prompt_hash"]] = record


class RecordingClient:
    """Forward to ``inner`` and write every exchange to ``store``.

    Prompts already present in the store are served from it, so re-recording
    a run only pays for new prompts.
    """

    def __init__(self, inner: ChatClient, store: TranscriptStore):
        self.inner = inner
        self.store = store

    def complete(self, system: str, user: str, config: GenerationConfig) -> str:
        key = prompt_hash(system, user, config)
        hit = self.store.get(key)
        if hit is not None:
            return hit["response"]
        t0 = time.monotonic()
        meta: dict = {}
        if hasattr(self.inner, "complete_with_meta"):
            text, meta = self.inner.complete_with_meta(system, user, config)
        else:
            text = self.inner.complete(system, user, config)
        self.store.append({
            "prompt_hash": key,
            "request": {"system": system, "user": user, "model": config.model_name,
                        "temperature": config.temperature, "max_tokens": config.max_tokens},
            "response": text,
            "latency": round(meta.get("latency", time.monotonic() - t0), 6),
            "usage": meta.get("usage", {}),
        })
        return text


class ReplayClient:
    """Answer strictly from a transcript store; unknown prompts raise ReplayMiss."""

    def __init__(self, store: TranscriptStore):
        self.store = store

    def complete(self, system: str, user: str, config: GenerationConfig) -> str:
        key = prompt_hash(system, user, config)
        rec = self.store.get(key)
        if rec is None:
            raise ReplayMiss(key)
        return rec["response"]


def generate(client: ChatClient, system: str, user: str, config: GenerationConfig) -> str:
    return client.complete(system, user, config)


def estimate_tokens(text: str) -> int:
    """Rough token count (4 characters per token)."""
    return (len(text) + 3) // 4
