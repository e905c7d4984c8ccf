"""Chat-completion access for every role in the pipeline.

All roles (generator, evaluator, expert, judge) speak the common
chat-completion JSON shape: a ``messages`` array of role/content
objects with sampling fields, answered by a single-choice completion.
``complete`` is the only entry point; it accepts either an HTTP
:class:`BackendConfig` or a :class:`ScriptedBackend` test double, so
the rest of the package never knows whether it is talking to a live
server.

Credentials are referenced by environment-variable *name* only and are
read at request time; they are never stored on config objects, never
serialized, and never logged.
"""
from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence, Union

import httpx

from .errors import AuthError, BackendError, ConfigError

DEFAULT_TEMPERATURE = 0.2
DEFAULT_TOP_P = 0.7
DEFAULT_TOP_K = 20


@dataclass(frozen=True)
class RoleProfile:
    """Sampling parameters and system prompt for one role."""

    system_prompt: str
    temperature: float = DEFAULT_TEMPERATURE
    top_p: float = DEFAULT_TOP_P
    top_k: int = DEFAULT_TOP_K
    max_output_tokens: int = 4096

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ConfigError(f"temperature must be >= 0, got {self.temperature}")
        if not 0 < self.top_p <= 1:
            raise ConfigError(f"top_p must be in (0, 1], got {self.top_p}")
        if self.top_k < 1:
            raise ConfigError(f"top_k must be >= 1, got {self.top_k}")
        if self.max_output_tokens < 1:
            raise ConfigError(f"max_output_tokens must be >= 1, got {self.max_output_tokens}")


@dataclass(frozen=True)
class BackendConfig:
    """Where and how to reach one chat-completion backend.

    ``credential_env`` names an environment variable; the variable's
    value is attached as a bearer token per request and exists nowhere
    else.  ``transport`` lets tests inject an ``httpx`` mock transport.
    """

    base_url: str
    model_name: str
    credential_env: str | None = None
    timeout: float = 60.0
    max_retries: int = 2
    backoff: float = 0.5
    audit_log: str | None = None
    transport: httpx.BaseTransport | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.max_retries < 0:
            raise ConfigError(f"max_retries must be >= 0, got {self.max_retries}")
        if self.timeout <= 0:
            raise ConfigError(f"timeout must be positive, got {self.timeout}")
        if self.backoff < 0:
            raise ConfigError(f"backoff must be >= 0, got {self.backoff}")


@dataclass(frozen=True)
class ChatTurn:
    role: str
    content: str

    def __post_init__(self) -> None:
        if self.role not in ("system", "user", "assistant"):
            raise ConfigError(f"turn role must be system/user/assistant, got {self.role!r}")


class ScriptedBackend:
    """Deterministic test double for :func:`complete`.

    The script is either an ordered list of replies, consumed one per
    call, or a mapping keyed by the final turn's content (with optional
    ``"*"`` fallback).  Every request is recorded on ``requests`` so
    tests can assert exactly what each role was asked.
    """

    def __init__(self, script: Union[Sequence[str], Mapping[str, str]]):
        if not script:
            raise ConfigError("scripted backend needs a nonempty script")
        if isinstance(script, Mapping):
            self._table: dict[str, str] | None = dict(script)
            self._queue: list[str] = []
        else:
            self._table = None
            self._queue = list(script)
        self.requests: list[tuple[ChatTurn, ...]] = []

    @property
    def calls(self) -> int:
        return len(self.requests)

    def reply(self, turns: Sequence[ChatTurn]) -> str:
        self.requests.append(tuple(turns))
        if self._table is not None:
            key = turns[-1].content
            if key in self._table:
                return self._table[key]
            if "*" in self._table:
                return self._table["*"]
            raise BackendError(f"scripted backend has no reply for request {key[:80]!r}")
        if not self._queue:
            raise BackendError("scripted backend exhausted its reply list")
        return self._queue.pop(0)


def scripted_backend(script: Union[Sequence[str], Mapping[str, str]]) -> ScriptedBackend:
    """Build a replaying backend from an ordered list or request-keyed table."""
    return ScriptedBackend(script)


Backend = Union[BackendConfig, ScriptedBackend]


def _bearer_token(backend: BackendConfig) -> str | None:
    if backend.credential_env is None:
        return None
    token = os.environ.get(backend.credential_env)
    if not token:
        raise ConfigError(
            f"credential environment variable {backend.credential_env!r} is not set"
        )
    return token


def _audit(backend: BackendConfig, payload: dict, reply: str | None, error: str | None) -> None:
    if backend.audit_log is None:
        return
    entry = {
        "model": payload["model"],
        "messages": payload["messages"],
        "reply": reply,
        "error": error,
    }
    with Path(backend.audit_log).open("a", encoding="utf-8") as fh:
        fh.write(json.dumps(entry, ensure_ascii=False) + "\n")


def _http_complete(profile: RoleProfile, backend: BackendConfig, turns: Sequence[ChatTurn]) -> str:
    payload = {
        "model": backend.model_name,
        "messages": [{"role": t.role, "content": t.content} for t in turns],
        "temperature": profile.temperature,
        "top_p": profile.top_p,
        "top_k": profile.top_k,
        "max_tokens": profile.max_output_tokens,
        "stream": False,
    }
    headers = {}
    token = _bearer_token(backend)
    if token is not None:
        headers["Authorization"] = f"Bearer {token}"
    url = backend.base_url.rstrip("/") + "/chat/completions"
    last_error: str = "no attempt made"
    for attempt in range(backend.max_retries + 1):
        if attempt and backend.backoff:
            time.sleep(backend.backoff * 2 ** (attempt - 1))
        try:
            with httpx.Client(
                timeout=backend.timeout, transport=backend.transport
            ) as client:
                response = client.post(url, json=payload, headers=headers)
        except httpx.HTTPError as exc:
            last_error = f"transport error: {exc}"
            continue
        if response.status_code in (401, 403):
            _audit(backend, payload, None, f"auth failure {response.status_code}")
            raise AuthError(f"backend rejected credentials (HTTP {response.status_code})")
        if 400 <= response.status_code < 500:
            _audit(backend, payload, None, f"HTTP {response.status_code}")
            raise BackendError(
                f"backend rejected the request (HTTP {response.status_code}): "
                f"{response.text[:200]}"
            )
        if response.status_code >= 500:
            last_error = f"HTTP {response.status_code}"
            continue
        try:
            body = response.json()
            content = body["choices"][0]["message"]["content"]
        except (json.JSONDecodeError, KeyError, IndexError, TypeError) as exc:
            _audit(backend, payload, None, f"malformed response: {exc}")
            raise BackendError(f"malformed backend response: {exc}") from exc
        if not isinstance(content, str):
            _audit(backend, payload, None, "non-text content")
            raise BackendError("malformed backend response: content is not text")
        _audit(backend, payload, content, None)
        return content
    _audit(backend, payload, None, last_error)
    raise BackendError(
        f"backend failed after {backend.max_retries + 1} attempts ({last_error})"
    )


def complete(profile: RoleProfile, backend: Backend, turns: Sequence[ChatTurn]) -> str:
    """Send one chat request and return the assistant reply text.

    The system turn is prepended from the profile when the caller's
    turns do not already start with one.  Transport errors and 5xx
    responses are retried per the backend's policy; 4xx responses are
    never retried, and 401/403 raise :class:`AuthError` immediately.
    """
    if not turns:
        raise ConfigError("chat request needs at least one turn")
    turns = list(turns)
    if turns[0].role != "system":
        turns.insert(0, ChatTurn("system", profile.system_prompt))
    if isinstance(backend, ScriptedBackend):
        return backend.reply(turns)
    return _http_complete(profile, backend, turns)
