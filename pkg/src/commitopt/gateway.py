"""Chat-completion gateway: live HTTP client, deterministic mock, journaling.

The live client speaks the common JSON chat protocol (request: model,
messages, temperature, max_tokens; response: first choice message content).
Timeouts and 429s are retried with exponential backoff, up to 3 attempts;
other HTTP errors are not retried. The mock gateway is a pure function of
the request: fixture files keyed on (prompt hash, temperature) win, then an
optional handler, then a rule-based default responder derived from the
prompt hash, so every command can run fully offline.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import os
import re
import time
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import requests

from .errors import GatewayError, UnparseableResponse

log = logging.getLogger(__name__)

API_KEY_ENV = "CHAT_API_KEY"


@dataclass(frozen=True)
class ChatRequest:
    system: str
    user: str
    temperature: float = 0.0
    max_output_tokens: int = 512
    model: str = "default"
    purpose: str = ""  # e.g. "score.rationality", "update", "classify"
    meta: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature {self.temperature} outside [0, 2]")
        if self.max_output_tokens <= 0:
            raise ValueError("max_output_tokens must be positive")


def prompt_hash(request: ChatRequest) -> str:
    digest = hashlib.sha256()
    digest.update(request.system.encode("utf-8"))
    digest.update(b"\x00")
    digest.update(request.user.encode("utf-8"))
    return digest.hexdigest()


class ChatGateway(Protocol):
    def chat(self, request: ChatRequest) -> str: ...


class TraceJournal:
    """Collects one record per gateway call; optionally mirrored to a file."""

    def __init__(self, path: str | Path | None = None):
        self.records: list[dict] = []
        self._path = Path(path) if path else None

    def record(self, entry: dict) -> None:
        self.records.append(entry)
        if self._path:
            with self._path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")


class HttpChatGateway:
    """Client for an HTTP JSON chat-completion endpoint."""

    RETRYABLE_STATUS = {429}
    MAX_ATTEMPTS = 3

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: str | None = None,
        timeout: float = 60.0,
        backoff: float = 0.5,
        journal: TraceJournal | None = None,
        session: requests.Session | None = None,
    ):
        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        self.timeout = timeout
        self.backoff = backoff
        self.journal = journal
        self._session = session or requests.Session()

    def chat(self, request: ChatRequest) -> str:
        payload = {
            "model": request.model if request.model != "default" else self.model,
            "messages": [
                {"role": "system", "content": request.system},
                {"role": "user", "content": request.user},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"

        last_error: GatewayError | None = None
        for attempt in range(self.MAX_ATTEMPTS):
            started = time.monotonic()
            try:
                resp = self._session.post(
                    self.endpoint, json=payload, headers=headers, timeout=self.timeout
                )
            except requests.Timeout as exc:
                last_error = GatewayError("timeout", str(exc))
                self._journal(request, started, "timeout")
                self._sleep(attempt)
                continue
            except requests.RequestException as exc:
                raise GatewayError("http_status", str(exc)) from exc

            self._journal(request, started, str(resp.status_code))
            if resp.status_code == 200:
                return self._extract_text(resp)
            if resp.status_code in self.RETRYABLE_STATUS:
                last_error = GatewayError("rate_limit", resp.text[:200], resp.status_code)
                self._sleep(attempt)
                continue
            raise GatewayError("http_status", resp.text[:200], resp.status_code)

        assert last_error is not None
        raise last_error

    def _extract_text(self, resp: requests.Response) -> str:
        try:
            data = resp.json()
            return data["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise GatewayError("protocol", f"unexpected response body: {exc}") from exc

    def _sleep(self, attempt: int) -> None:
        if attempt < self.MAX_ATTEMPTS - 1 and self.backoff > 0:
            time.sleep(self.backoff * (2**attempt))

    def _journal(self, request: ChatRequest, started: float, status: str) -> None:
        if self.journal:
            self.journal.record(
                {
                    "prompt_hash": prompt_hash(request),
                    "purpose": request.purpose,
                    "temperature": request.temperature,
                    "latency_ms": round((time.monotonic() - started) * 1000, 3),
                    "status": status,
                }
            )


class MockChatGateway:
    """Bit-deterministic offline gateway.

    Lookup order: fixture file named ``<prompt_hash[:16]>_t<temperature>.txt``
    in ``fixtures_dir``, then the ``handler`` callable (a ``None`` result
    falls through), then a deterministic default responder keyed on the
    request purpose and prompt hash.
    """

    def __init__(
        self,
        fixtures_dir: str | Path | None = None,
        handler: Callable[[ChatRequest], str | None] | None = None,
        journal: TraceJournal | None = None,
    ):
        self.fixtures_dir = Path(fixtures_dir) if fixtures_dir else None
        self.handler = handler
        self.journal = journal
        self.calls: list[ChatRequest] = []

    def chat(self, request: ChatRequest) -> str:
        self.calls.append(request)
        digest = prompt_hash(request)
        if self.journal:
            self.journal.record(
                {
                    "prompt_hash": digest,
                    "purpose": request.purpose,
                    "temperature": request.temperature,
                    "mock": True,
                }
            )
        if self.fixtures_dir:
            fixture = self.fixtures_dir / f"{digest[:16]}_t{request.temperature:g}.txt"
            if fixture.exists():
                return fixture.read_text(encoding="utf-8")
        if self.handler:
            result = self.handler(request)
            if result is not None:
                return result
        return self._default_response(request, digest)

    @staticmethod
    def _default_response(request: ChatRequest, digest: str) -> str:
        seed = int(digest[:12], 16)
        purpose = request.purpose
        if purpose.startswith("score."):
            return str(seed % 5)
        if purpose in ("update", "update.all"):
            prev = request.meta.get("prev_message", "")
            kind = request.meta.get("context_kind", "context")
            return f"{prev} [{kind}]" if prev else f"mock message {digest[:8]}"
        if purpose == "classify":
            labels = [t for t in request.meta.get("taxonomy", "").split(",") if t]
            return labels[seed % len(labels)] if labels else "fix"
        if purpose.startswith("summarize."):
            return f"(mock summary {digest[:8]})"
        if purpose == "filter.good":
            return "yes"
        return f"mock:{digest[:12]}"


_SCORE_RE = re.compile(r"(?<!\d)(?<!\d\.)([0-4])(?!\.\d)(?!\d)")


def parse_score(text: str) -> int | None:
    """First standalone integer 0-4 in the response, else None."""
    m = _SCORE_RE.search(text)
    return int(m.group(1)) if m else None


def request_score(gateway: ChatGateway, request: ChatRequest) -> int:
    """Issue a scoring request; on an unparseable reply, reprompt once."""
    value = parse_score(gateway.chat(request))
    if value is not None:
        return value
    reprompt = dataclasses.replace(
        request,
        user=request.user + "\n\nAnswer with a single integer between 0 and 4, nothing else.",
    )
    value = parse_score(gateway.chat(reprompt))
    if value is None:
        raise UnparseableResponse(
            f"no integer 0-4 in response for {request.purpose or 'score'}"
        )
    return value
