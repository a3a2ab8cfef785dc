"""Chat-completion gateway: one abstraction over a live HTTP backend and a
deterministic scripted backend.

Every agent prompt flows through :class:`Gateway`.  The scripted backend is
keyed by (session, role, round) — or a literal prompt hash — so whole runs
replay bit-identically; the live backend speaks the OpenAI-compatible wire
format with retry, rate limiting, and an append-before-return audit log.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .errors import AuthenticationError, GatewayError, ProtocolViolationError, ScriptMissError

ENV_LLM_URL = "DYNAMICARE_LLM_URL"
ENV_LLM_KEY = "DYNAMICARE_LLM_KEY"

#: Sampling defaults: categorical steps (voting, confidence) need stability,
#: generative steps (questions, diagnoses) keep headroom.
TEMPERATURE_CATEGORICAL = 0.0
TEMPERATURE_GENERATIVE = 0.7

REPAIR_SUFFIX = "#repair"


@dataclass
class ChatRequest:
    system_prompt: str
    user_context: str
    model_name: str = "gpt-4.1"
    temperature: float = TEMPERATURE_GENERATIVE
    max_output_tokens: int = 1024
    expects_structured: bool = False
    # Routing metadata; the scripted backend matches on (session, role, round).
    session_id: str = ""
    role: str = ""
    round: int = 0

    def __post_init__(self):
        if not self.system_prompt or not self.user_context:
            raise ValueError("prompts must be non-empty")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature {self.temperature} outside [0, 2]")

    def prompt_sha256(self) -> str:
        payload = self.system_prompt + "\n---\n" + self.user_context
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ScriptedExchange:
    """One canned reply, matched by (session, role, round) or prompt hash."""

    reply: str
    session: str = ""
    role: str = ""
    round: int = 0
    prompt_sha256: str = ""

    @property
    def key(self):
        if self.prompt_sha256:
            return ("hash", self.prompt_sha256)
        return (self.session, self.role, self.round)


class ScriptedBackend:
    """Pure, deterministic reply table.  No network, no state mutation."""

    def __init__(self, exchanges: list[ScriptedExchange] | dict | None = None):
        self._by_key: dict = {}
        if isinstance(exchanges, dict):
            exchanges = [
                ScriptedExchange(reply=reply, session=k[0], role=k[1], round=k[2])
                for k, reply in exchanges.items()
            ]
        for exchange in exchanges or []:
            self.add(exchange)

    def add(self, exchange: ScriptedExchange) -> None:
        if exchange.key in self._by_key:
            raise ValueError(f"duplicate script key {exchange.key}")
        self._by_key[exchange.key] = exchange.reply

    @classmethod
    def from_jsonl(cls, path: str | Path) -> "ScriptedBackend":
        backend = cls()
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    entry = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ValueError(f"{path}:{line_no}: invalid JSON: {exc}") from exc
                backend.add(
                    ScriptedExchange(
                        reply=entry["reply"],
                        session=entry.get("session", ""),
                        role=entry.get("role", ""),
                        round=int(entry.get("round", 0)),
                        prompt_sha256=entry.get("prompt_sha256", ""),
                    )
                )
        return backend

    def complete(self, request: ChatRequest) -> str:
        key = (request.session_id, request.role, request.round)
        if key in self._by_key:
            return self._by_key[key]
        hash_key = ("hash", request.prompt_sha256())
        if hash_key in self._by_key:
            return self._by_key[hash_key]
        raise ScriptMissError(
            f"no scripted reply for role={request.role!r} round={request.round} "
            f"(session={request.session_id!r})"
        )


class TokenBucket:
    """Requests-per-minute limiter shared by concurrent live calls."""

    def __init__(self, requests_per_minute: float):
        self.capacity = max(1.0, requests_per_minute)
        self.tokens = self.capacity
        self.fill_rate = self.capacity / 60.0
        self.updated = time.monotonic()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = time.monotonic()
                self.tokens = min(self.capacity, self.tokens + (now - self.updated) * self.fill_rate)
                self.updated = now
                if self.tokens >= 1.0:
                    self.tokens -= 1.0
                    return
                wait = (1.0 - self.tokens) / self.fill_rate
            time.sleep(wait)


class LiveBackend:
    """OpenAI-compatible chat-completion client.

    Endpoint and credential come from DYNAMICARE_LLM_URL / DYNAMICARE_LLM_KEY
    unless passed explicitly.  Transient failures (connection errors, 5xx,
    429) retry with exponential backoff, 3 attempts total; other 4xx statuses
    are non-retryable.  Every request/response pair is appended to the audit
    log before the reply is returned.
    """

    RETRYABLE_STATUSES = frozenset({429, 500, 502, 503, 504})

    def __init__(
        self,
        base_url: str | None = None,
        api_key: str | None = None,
        audit_path: str | Path | None = None,
        requests_per_minute: float = 60.0,
        timeout: float = 60.0,
        max_attempts: int = 3,
        backoff: float = 1.0,
    ):
        self.base_url = (base_url or os.environ.get(ENV_LLM_URL, "")).rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get(ENV_LLM_KEY, "")
        if not self.base_url:
            raise GatewayError(f"live backend needs an endpoint ({ENV_LLM_URL})")
        self.audit_path = Path(audit_path) if audit_path else None
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.backoff = backoff
        self.limiter = TokenBucket(requests_per_minute)
        self._audit_lock = threading.Lock()

    def _audit(self, request: ChatRequest, reply: str | None, error: str | None = None) -> None:
        if self.audit_path is None:
            return
        entry = {
            "model": request.model_name,
            "role": request.role,
            "round": request.round,
            "session": request.session_id,
            "system": request.system_prompt,
            "user": request.user_context,
            "reply": reply,
        }
        if error:
            entry["error"] = error
        with self._audit_lock:
            with open(self.audit_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry, ensure_ascii=False) + "\n")
                fh.flush()
                os.fsync(fh.fileno())

    def complete(self, request: ChatRequest) -> str:
        import requests as _requests

        url = self.base_url + "/chat/completions"
        payload = {
            "model": request.model_name,
            "messages": [
                {"role": "system", "content": request.system_prompt},
                {"role": "user", "content": request.user_context},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"

        last_error: Exception | None = None
        for attempt in range(self.max_attempts):
            self.limiter.acquire()
            try:
                response = _requests.post(url, json=payload, headers=headers, timeout=self.timeout)
            except _requests.RequestException as exc:
                last_error = exc
                time.sleep(self.backoff * (2**attempt))
                continue
            if response.status_code in self.RETRYABLE_STATUSES:
                last_error = GatewayError(f"HTTP {response.status_code}: {response.text[:200]}")
                time.sleep(self.backoff * (2**attempt))
                continue
            if 400 <= response.status_code < 500:
                self._audit(request, None, error=f"HTTP {response.status_code}")
                raise AuthenticationError(
                    f"HTTP {response.status_code} (non-retryable): {response.text[:200]}"
                )
            try:
                reply = response.json()["choices"][0]["message"]["content"]
            except (KeyError, IndexError, ValueError) as exc:
                self._audit(request, None, error=f"malformed response: {exc}")
                raise GatewayError(f"malformed completion response: {exc}") from exc
            self._audit(request, reply)
            return reply
        self._audit(request, None, error=str(last_error))
        raise GatewayError(f"request failed after {self.max_attempts} attempts: {last_error}")


_FENCE_RE = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL)


def extract_json_object(text: str) -> dict | None:
    """First JSON object in a reply, tolerating code fences and prose."""
    candidates = _FENCE_RE.findall(text)
    candidates.append(text)
    for candidate in candidates:
        start = candidate.find("{")
        while start != -1:
            depth = 0
            in_string = False
            escaped = False
            for i in range(start, len(candidate)):
                ch = candidate[i]
                if in_string:
                    if escaped:
                        escaped = False
                    elif ch == "\\":
                        escaped = True
                    elif ch == '"':
                        in_string = False
                    continue
                if ch == '"':
                    in_string = True
                elif ch == "{":
                    depth += 1
                elif ch == "}":
                    depth -= 1
                    if depth == 0:
                        try:
                            obj = json.loads(candidate[start : i + 1])
                        except json.JSONDecodeError:
                            break
                        if isinstance(obj, dict):
                            return obj
                        break
            start = candidate.find("{", start + 1)
    return None


class Gateway:
    """Front door for all agent prompts.

    Wraps a backend with an observer hook (used by the session engine to put
    every exchange in the transcript) and the structured-reply protocol:
    extract JSON, verify required keys, one repair re-prompt, then fail.
    """

    def __init__(self, backend, on_exchange: Callable[[ChatRequest, str], None] | None = None):
        self.backend = backend
        self.on_exchange = on_exchange

    def complete(self, request: ChatRequest) -> str:
        reply = self.backend.complete(request)
        if self.on_exchange is not None:
            self.on_exchange(request, reply)
        return reply

    def complete_structured(self, request: ChatRequest, required_keys: list[str]) -> dict:
        """Reply parsed to a JSON object guaranteed to hold required_keys.

        On a malformed or incomplete first reply, issues exactly one repair
        re-prompt with the format reminder appended (the repair request's
        role carries a ``#repair`` suffix so scripts can address it), then
        raises ProtocolViolationError carrying the raw reply.
        """
        reply = self.complete(request)
        parsed = extract_json_object(reply)
        if parsed is not None and all(k in parsed for k in required_keys):
            return parsed

        reminder = (
            "\n\nYour previous reply could not be parsed. Respond with a single JSON "
            "object containing exactly these keys: " + ", ".join(required_keys) + "."
        )
        repair = ChatRequest(
            system_prompt=request.system_prompt,
            user_context=request.user_context + reminder,
            model_name=request.model_name,
            temperature=request.temperature,
            max_output_tokens=request.max_output_tokens,
            expects_structured=True,
            session_id=request.session_id,
            role=request.role + REPAIR_SUFFIX,
            round=request.round,
        )
        reply = self.complete(repair)
        parsed = extract_json_object(reply)
        if parsed is not None and all(k in parsed for k in required_keys):
            return parsed
        missing = [k for k in required_keys if not parsed or k not in parsed]
        raise ProtocolViolationError(
            f"structured reply for role={request.role!r} round={request.round} "
            f"missing keys {missing} after repair",
            raw_reply=reply,
        )

    def complete_with_repair(self, request: ChatRequest, parse: Callable, reminder: str):
        """Strict non-JSON formats (confidence labels, votes).

        Applies ``parse`` to the reply; on None, re-prompts once with the
        reminder appended and parses again.  Returns (value_or_None, raw_reply)
        so callers can apply their own conservative fallback and keep the raw
        text for the transcript.
        """
        reply = self.complete(request)
        value = parse(reply)
        if value is not None:
            return value, reply
        repair = ChatRequest(
            system_prompt=request.system_prompt,
            user_context=request.user_context + "\n\n" + reminder,
            model_name=request.model_name,
            temperature=request.temperature,
            max_output_tokens=request.max_output_tokens,
            session_id=request.session_id,
            role=request.role + REPAIR_SUFFIX,
            round=request.round,
        )
        reply = self.complete(repair)
        return parse(reply), reply
