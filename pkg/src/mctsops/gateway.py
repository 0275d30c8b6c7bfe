"""Completion interface shared by every pipeline stage.

A :class:`Gateway` wraps one backend (live HTTP, replay, synthetic) and keeps
the token counters that feed per-trial accounting.  Requests are built from
fixed per-role system templates plus a user message made of ``### Section``
blocks, so every backend sees the same text.
"""

from __future__ import annotations

import functools
import hashlib
import json
import logging
import math
import os
import re
import threading
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Protocol

import httpx

log = logging.getLogger(__name__)

ROLES = (
    "decomposer",
    "prompt_writer",
    "prompt_scorer",
    "code_writer",
    "evaluator",
    "feedback_writer",
)


class GatewayError(RuntimeError):
    pass


class FixtureMiss(GatewayError):
    pass


class ParseFailure(ValueError):
    pass


@dataclass(frozen=True)
class LlmRequest:
    role_tag: str
    messages: tuple[tuple[str, str], ...]
    temperature: float = 0.7
    max_output_tokens: int = 2048

    def __post_init__(self) -> None:
        if self.role_tag not in ROLES:
            raise ValueError(f"unknown role_tag {self.role_tag!r}")
        if not self.messages:
            raise ValueError("messages must be non-empty")
        for speaker, _ in self.messages:
            if speaker not in ("system", "user"):
                raise ValueError(f"unknown speaker {speaker!r}")
        if self.temperature < 0 or self.max_output_tokens < 1:
            raise ValueError("bad sampling parameters")

    @property
    def user_text(self) -> str:
        return "\n\n".join(t for s, t in self.messages if s == "user")


@dataclass(frozen=True)
class LlmResponse:
    text: str
    prompt_tokens: int
    completion_tokens: int
    backend: str


class Backend(Protocol):
    name: str

    def complete(self, request: LlmRequest) -> LlmResponse: ...


# ------------------------------------------------------------ request shape


def _normalize_ws(text: str) -> str:
    return " ".join(text.split())


def canonical_hash(request: LlmRequest) -> str:
    """Stable key over role and message texts; sampling knobs are excluded."""
    payload = json.dumps(
        [request.role_tag, [_normalize_ws(t) for _, t in request.messages]],
        ensure_ascii=False,
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@functools.lru_cache(maxsize=None)
def load_template(name: str) -> str:
    return resources.files("mctsops").joinpath("templates").joinpath(f"{name}.txt").read_text("utf-8").strip()


def kind_suffixes() -> dict[str, str]:
    out = {}
    for line in load_template("prompt_suffixes").splitlines():
        if ":" in line and not line.startswith("#"):
            kind, text = line.split(":", 1)
            out[kind.strip()] = text.strip()
    return out


def format_sections(sections: dict[str, object]) -> str:
    return "\n\n".join(f"### {k}\n{v}" for k, v in sections.items())


_SECTION = re.compile(r"^### (.+)$", re.MULTILINE)


def parse_sections(text: str) -> dict[str, str]:
    heads = list(_SECTION.finditer(text))
    out = {}
    for i, m in enumerate(heads):
        end = heads[i + 1].start() if i + 1 < len(heads) else len(text)
        out[m.group(1).strip()] = text[m.end() + 1 : end].rstrip("\n")
    return out


def build_request(role_tag: str, sections: dict[str, object], **kwargs) -> LlmRequest:
    messages = (("system", load_template(role_tag)), ("user", format_sections(sections)))
    return LlmRequest(role_tag=role_tag, messages=messages, **kwargs)


def approx_tokens(text: str) -> int:
    return math.ceil(len(text) / 4)


# ---------------------------------------------------------------- parsing

_NUMERIC = re.compile(r"(?<![\w.])(-?\d+(?:\.\d+)?)(?:\s*/\s*\d+(?:\.\d+)?)?")


def _round_half_away(x: float) -> int:
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


def parse_bounded_number(text: str, lo: float, hi: float, integer: bool = False) -> float:
    """Last numeric literal in ``text`` clamped to [lo, hi].

    A fraction ``a/b`` contributes only its numerator, so "8/10" reads as 8.
    """
    if lo > hi:
        raise ValueError("lo > hi")
    matches = _NUMERIC.findall(text)
    if not matches:
        raise ParseFailure(f"no number in {text[:80]!r}")
    value = float(matches[-1])
    if integer:
        value = _round_half_away(value)
    value = min(max(value, lo), hi)
    return int(value) if integer else value


# ---------------------------------------------------------------- backends


class HttpBackend:
    """OpenAI-compatible chat-completions client."""

    name = "http"

    def __init__(
        self,
        base_url: str = "https://api.openai.com/v1",
        model: str = "gpt-4",
        api_key_env: str = "LLM_API_KEY",
        timeout_s: float = 120.0,
        max_in_flight: int = 4,
        attempts: int = 3,
        backoff_s: float = 1.0,
        client: Optional[httpx.Client] = None,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key_env = api_key_env
        self.attempts = attempts
        self.backoff_s = backoff_s
        self._client = client or httpx.Client(timeout=timeout_s)
        self._slots = threading.BoundedSemaphore(max_in_flight)

    def _headers(self) -> dict[str, str]:
        key = os.environ.get(self.api_key_env)
        if not key:
            raise GatewayError(f"credential env var {self.api_key_env} is not set")
        return {"Authorization": f"Bearer {key}", "Content-Type": "application/json"}

    def complete(self, request: LlmRequest) -> LlmResponse:
        body = {
            "model": self.model,
            "messages": [{"role": s, "content": t} for s, t in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
        headers = self._headers()
        last_error = "no attempt made"
        for attempt in range(self.attempts):
            if attempt:
                time.sleep(self.backoff_s * 2 ** (attempt - 1))
            try:
                with self._slots:
                    resp = self._client.post(f"{self.base_url}/chat/completions", json=body, headers=headers)
            except httpx.TransportError as exc:
                last_error = f"transport: {exc}"
                log.warning("attempt %d failed: %s", attempt + 1, last_error)
                continue
            if resp.status_code in (401, 403):
                raise GatewayError(f"authentication rejected ({resp.status_code})")
            if resp.status_code == 429 or resp.status_code >= 500:
                last_error = f"HTTP {resp.status_code}"
                log.warning("attempt %d failed: %s", attempt + 1, last_error)
                continue
            if resp.status_code >= 400:
                raise GatewayError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            data = resp.json()
            try:
                text = data["choices"][0]["message"]["content"] or ""
            except (KeyError, IndexError, TypeError) as exc:
                raise GatewayError(f"malformed completion payload: {exc}") from exc
            usage = data.get("usage") or {}
            return LlmResponse(
                text=text,
                prompt_tokens=int(usage.get("prompt_tokens", 0)),
                completion_tokens=int(usage.get("completion_tokens", 0)),
                backend=self.name,
            )
        raise GatewayError(f"gave up after {self.attempts} attempts: {last_error}")


def _load_fixture(path: Path) -> dict[str, dict]:
    records: dict[str, dict] = {}
    if path.exists():
        for line in path.read_text("utf-8").splitlines():
            if line.strip():
                rec = json.loads(line)
                records.setdefault(rec["key_hash"], rec)
    return records


class ReplayBackend:
    """Serves recorded completions by canonical request hash; misses are fatal."""

    name = "replay"

    def __init__(self, path) -> None:
        self.path = Path(path)
        self.records = _load_fixture(self.path)
        self.misses = 0

    def complete(self, request: LlmRequest) -> LlmResponse:
        key = canonical_hash(request)
        rec = self.records.get(key)
        if rec is None:
            self.misses += 1
            raise FixtureMiss(f"no recorded response for {request.role_tag} request {key[:12]}")
        return LlmResponse(
            text=rec["response_text"],
            prompt_tokens=rec["prompt_tokens"],
            completion_tokens=rec["completion_tokens"],
            backend=self.name,
        )


class RecordingBackend:
    """Pass-through that appends every new request/response pair to a JSONL fixture.

    Keys already present are answered from the fixture, so a recorded run
    replays exactly even when the live model would answer differently.
    """

    def __init__(self, inner: Backend, path) -> None:
        self.inner = inner
        self.name = inner.name
        self.path = Path(path)
        self.records = _load_fixture(self.path)
        self._lock = threading.Lock()

    def complete(self, request: LlmRequest) -> LlmResponse:
        key = canonical_hash(request)
        with self._lock:
            rec = self.records.get(key)
        if rec is not None:
            return LlmResponse(rec["response_text"], rec["prompt_tokens"], rec["completion_tokens"], self.name)
        resp = self.inner.complete(request)
        rec = {
            "key_hash": key,
            "role_tag": request.role_tag,
            "response_text": resp.text,
            "prompt_tokens": resp.prompt_tokens,
            "completion_tokens": resp.completion_tokens,
        }
        with self._lock:
            if key not in self.records:
                self.records[key] = rec
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
        return resp


# ----------------------------------------------------------------- gateway


@dataclass
class Usage:
    prompt_tokens: int = 0
    completion_tokens: int = 0
    calls: dict[str, int] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return self.prompt_tokens + self.completion_tokens


class Gateway:
    """Per-trial handle: shares a backend, owns its token counters."""

    def __init__(self, backend: Backend, temperature: float = 0.7, max_output_tokens: int = 2048) -> None:
        self.backend = backend
        self.temperature = temperature
        self.max_output_tokens = max_output_tokens
        self.usage = Usage()
        self._lock = threading.Lock()

    def fork(self) -> "Gateway":
        return Gateway(self.backend, self.temperature, self.max_output_tokens)

    def complete(self, request: LlmRequest) -> LlmResponse:
        resp = self.backend.complete(request)
        with self._lock:
            self.usage.prompt_tokens += resp.prompt_tokens
            self.usage.completion_tokens += resp.completion_tokens
            self.usage.calls[request.role_tag] = self.usage.calls.get(request.role_tag, 0) + 1
        return resp

    def ask(self, role_tag: str, sections: dict[str, object]) -> str:
        request = build_request(
            role_tag, sections, temperature=self.temperature, max_output_tokens=self.max_output_tokens
        )
        return self.complete(request).text
