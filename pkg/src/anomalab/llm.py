"""Chat-completions querying with bounded retries and tolerant response parsing.

One attempt = one HTTP request plus one parse. Transport errors, non-200
statuses, malformed envelopes, and unparseable contents all consume an
attempt; after max_retries the caller gets the default detection (no indices,
empty reason, defaulted=True) instead of an exception. A missing API key is a
configuration error and is raised before any request is sent.
"""

from __future__ import annotations

import json
import logging
import os
import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import requests

log = logging.getLogger(__name__)

DEFAULT_MOCK_CONTENT = '{"anomaly": [], "reason": "mock response"}'


class ConfigError(Exception):
    """Endpoint configuration problem (e.g. API key env var not set)."""


class ProtocolError(Exception):
    """The endpoint answered, but not with a usable chat completion."""


@dataclass(frozen=True)
class LlmConfig:
    endpoint: str
    model: str = "gpt-4o-mini"
    api_key_env: str | None = "ANOMALAB_API_KEY"
    temperature: float | None = None
    max_retries: int = 5
    timeout: float = 30.0
    max_concurrent: int = 4

    def __post_init__(self):
        if not self.endpoint:
            raise ConfigError("endpoint URL is required")
        if self.max_retries < 1:
            raise ValueError("max_retries must be at least 1")
        if self.temperature is not None and self.temperature < 0:
            raise ValueError("temperature must be non-negative")
        if self.max_concurrent < 1:
            raise ValueError("max_concurrent must be at least 1")


@dataclass(frozen=True)
class DetectionResult:
    indices: tuple[int, ...]
    reason: str
    raw: str | None
    attempts: int
    defaulted: bool


@dataclass(frozen=True)
class CompletionResult:
    text: str | None
    attempts: int


def _coerce_index(x) -> int | None:
    """Lenient index coercion: ints, integral floats, numeric strings."""
    if isinstance(x, bool):
        return None
    if isinstance(x, int):
        return x
    if isinstance(x, float):
        return int(x) if x.is_integer() else None
    if isinstance(x, str):
        s = x.strip()
        try:
            return int(s)
        except ValueError:
            pass
        try:
            f = float(s)
        except ValueError:
            return None
        return int(f) if f.is_integer() else None
    return None


def _json_candidates(text: str):
    """Yield balanced-brace substrings, string- and escape-aware."""
    n = len(text)
    for s in range(n):
        if text[s] != "{":
            continue
        depth = 0
        in_str = False
        esc = False
        for e in range(s, n):
            c = text[e]
            if in_str:
                if esc:
                    esc = False
                elif c == "\\":
                    esc = True
                elif c == '"':
                    in_str = False
            elif c == '"':
                in_str = True
            elif c == "{":
                depth += 1
            elif c == "}":
                depth -= 1
                if depth == 0:
                    yield text[s:e + 1]
                    break


def parse_response(text) -> tuple[list[int], str] | None:
    """Extract (indices, reason) from a model reply; None on failure.

    Tolerates surrounding prose and code fences by scanning every balanced
    brace candidate for an object carrying a list "anomaly" and a string
    "reason". Duplicates and negative indices are preserved: the metrics
    layer decides what to do with them.
    """
    if not isinstance(text, str):
        return None
    for cand in _json_candidates(text):
        try:
            obj = json.loads(cand)
        except (json.JSONDecodeError, RecursionError):
            continue
        if not isinstance(obj, dict):
            continue
        if "anomaly" not in obj or "reason" not in obj:
            continue
        raw_indices, reason = obj["anomaly"], obj["reason"]
        if not isinstance(raw_indices, list) or not isinstance(reason, str):
            continue
        indices = []
        for x in raw_indices:
            c = _coerce_index(x)
            if c is None:
                break
            indices.append(c)
        else:
            return indices, reason
    return None


class LlmClient:
    """Thread-safe client; at most max_concurrent requests in flight."""

    def __init__(self, config: LlmConfig, session: requests.Session | None = None):
        self.config = config
        self._key = None
        if config.api_key_env is not None:
            self._key = os.environ.get(config.api_key_env)
            if not self._key:
                raise ConfigError(
                    f"API key environment variable {config.api_key_env} is not set"
                )
        self._session = session or requests.Session()
        self._gate = threading.BoundedSemaphore(config.max_concurrent)

    def _request_text(self, prompt: str) -> str:
        payload = {
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
        }
        if self.config.temperature is not None:
            payload["temperature"] = self.config.temperature
        headers = {"Content-Type": "application/json"}
        if self._key:
            headers["Authorization"] = f"Bearer {self._key}"
        with self._gate:
            resp = self._session.post(
                self.config.endpoint, json=payload, headers=headers,
                timeout=self.config.timeout,
            )
        if resp.status_code != 200:
            raise ProtocolError(f"HTTP {resp.status_code}")
        try:
            data = resp.json()
            content = data["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProtocolError(f"malformed completion envelope: {exc}") from exc
        if not isinstance(content, str):
            raise ProtocolError("completion content is not a string")
        return content

    def complete(self, prompt: str) -> CompletionResult:
        """Raw text completion with the same retry budget as query()."""
        for attempt in range(1, self.config.max_retries + 1):
            try:
                return CompletionResult(self._request_text(prompt), attempt)
            except (requests.RequestException, ProtocolError) as exc:
                log.debug("completion attempt %d failed: %s", attempt, exc)
        return CompletionResult(None, self.config.max_retries)

    def query(self, prompt: str) -> DetectionResult:
        """Detection query: request + parse per attempt, default on exhaustion."""
        last_raw = None
        for attempt in range(1, self.config.max_retries + 1):
            try:
                text = self._request_text(prompt)
            except (requests.RequestException, ProtocolError) as exc:
                log.debug("query attempt %d failed: %s", attempt, exc)
                continue
            last_raw = text
            parsed = parse_response(text)
            if parsed is not None:
                indices, reason = parsed
                return DetectionResult(
                    indices=tuple(indices), reason=reason, raw=text,
                    attempts=attempt, defaulted=False,
                )
            log.debug("query attempt %d: unparseable response", attempt)
        return DetectionResult(
            indices=(), reason="", raw=last_raw,
            attempts=self.config.max_retries, defaulted=True,
        )


def query(prompt: str, config: LlmConfig) -> DetectionResult:
    return LlmClient(config).query(prompt)


class MockLlmServer:
    """In-process chat-completions endpoint for tests and `--endpoint mock`.

    `script` entries are either response contents (str, served with HTTP 200
    in the standard envelope) or HTTP error statuses (int). When the script
    runs out the last entry repeats; with no script every request gets
    DEFAULT_MOCK_CONTENT. Request payloads are recorded on `self.requests`.
    """

    def __init__(self, script=None):
        self._script = list(script) if script is not None else None
        self.requests: list[dict] = []
        self._lock = threading.Lock()
        self._server: ThreadingHTTPServer | None = None
        self._thread: threading.Thread | None = None

    def _item_for(self, i: int):
        if self._script is None:
            return DEFAULT_MOCK_CONTENT
        if not self._script:
            return 500
        return self._script[min(i, len(self._script) - 1)]

    @property
    def url(self) -> str:
        assert self._server is not None, "server not started"
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}/v1/chat/completions"

    @property
    def request_count(self) -> int:
        with self._lock:
            return len(self.requests)

    def __enter__(self) -> "MockLlmServer":
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0) or 0)
                body = self.rfile.read(length)
                try:
                    payload = json.loads(body)
                except (json.JSONDecodeError, UnicodeDecodeError):
                    payload = {}
                with outer._lock:
                    i = len(outer.requests)
                    outer.requests.append(payload)
                item = outer._item_for(i)
                if isinstance(item, int):
                    self.send_response(item)
                    self.send_header("Content-Length", "0")
                    self.end_headers()
                    return
                data = json.dumps({
                    "id": f"mock-{i}",
                    "object": "chat.completion",
                    "choices": [{
                        "index": 0,
                        "message": {"role": "assistant", "content": item},
                        "finish_reason": "stop",
                    }],
                }).encode("utf-8")
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def __exit__(self, *exc_info):
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
        return False
