"""Uniform access to chat-completion endpoints.

One gateway fronts either a real HTTP backend (the de-facto chat-completions
wire shape) or a fully scripted mock backend, adding retries with exponential
backoff, an on-disk response cache, a token-bucket rate limit, and per-call
logging into a RunRecord. Tests and benchmarks run entirely against the mock;
the HTTP path is the same code minus the playbook.
"""

from __future__ import annotations

import json
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import requests

from .core import CallEntry, RunRecord, content_hash

SCHEMA_VERSION_PLAYBOOK = "mock-playbook-v1"
SCHEMA_VERSION_BACKEND = "backend-config-v1"

FINISH_STOP = "stop"
FINISH_LENGTH = "length"
FINISH_ERROR = "error"


class GatewayError(Exception):
    pass


class RequestError(GatewayError):
    """The request itself is invalid; never retried."""


class TransportError(GatewayError):
    """Transient transport failure that survived every retry."""


class BadStatusError(GatewayError):
    def __init__(self, code: int, detail: str = ""):
        self.code = code
        super().__init__(f"backend returned status {code}" + (f": {detail}" if detail else ""))


class PlaybookMissError(GatewayError):
    """No playbook rule matched and no default response is configured."""


class _TransientFailure(Exception):
    """Internal marker for a retryable send failure."""


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ("system", "user", "assistant"):
            raise RequestError(f"bad message role {self.role!r}")


@dataclass(frozen=True)
class ChatRequest:
    model_id: str
    messages: tuple[ChatMessage, ...]
    temperature: float = 0.5
    top_p: float = 0.9
    max_tokens: int = 4096
    request_tag: str = "untagged"

    def __post_init__(self):
        if not any(m.role == "user" for m in self.messages):
            raise RequestError("request must contain at least one user message")
        if not 0.0 <= self.temperature <= 2.0:
            raise RequestError(f"temperature {self.temperature} outside [0, 2]")
        if not 0.0 < self.top_p <= 1.0:
            raise RequestError(f"top_p {self.top_p} outside (0, 1]")
        if self.max_tokens <= 0:
            raise RequestError(f"max_tokens must be positive, got {self.max_tokens}")

    def rendered_prompt(self) -> str:
        return "\n".join(m.content for m in self.messages)


def user_request(prompt: str, **kwargs) -> ChatRequest:
    return ChatRequest(messages=(ChatMessage("user", prompt),), **kwargs)


@dataclass(frozen=True)
class ChatResponse:
    content: str
    finish_reason: str
    usage: dict = field(default_factory=dict)
    cached: bool = False

    def __post_init__(self):
        if not self.content and self.finish_reason != FINISH_ERROR:
            raise GatewayError("empty content must carry finish_reason=error")


def cache_key(req: ChatRequest) -> str:
    """Stable hash over everything that affects the completion.

    request_tag is excluded: it only labels the call in logs.
    """
    payload = json.dumps(
        {
            "model_id": req.model_id,
            "messages": [[m.role, m.content] for m in req.messages],
            "temperature": req.temperature,
            "top_p": req.top_p,
            "max_tokens": req.max_tokens,
        },
        sort_keys=True,
        ensure_ascii=False,
    )
    return content_hash(payload)


# --- backend configuration ------------------------------------------------


@dataclass(frozen=True)
class BackendConfig:
    """One backend entry of the run config file.

    kind is "http" or "mock". For http backends the API key is read from the
    environment variable named by api_key_env and is never stored in config.
    """

    name: str = "default"
    kind: str = "mock"
    endpoint: str = ""
    api_key_env: str = ""
    model_id: str = "mock-model"
    rpm: int | None = None
    retry_max: int = 2
    timeout_s: float = 60.0
    backoff_s: float = 0.5
    max_tokens_limit: int = 32768
    playbook_path: str = ""

    @staticmethod
    def from_record(name: str, record: dict) -> "BackendConfig":
        known = {
            "kind", "endpoint", "api_key_env", "model_id", "rpm", "retry_max",
            "timeout_s", "backoff_s", "max_tokens_limit", "playbook_path",
        }
        extra = set(record) - known
        if extra:
            raise RequestError(f"backend {name!r}: unknown config keys {sorted(extra)}")
        return BackendConfig(name=name, **record)


# --- mock backend ----------------------------------------------------------


@dataclass
class PlaybookRule:
    match: str
    responses: list
    regex: bool = False
    _cursor: int = field(default=0, repr=False)

    def matches(self, prompt: str) -> bool:
        if self.regex:
            return re.search(self.match, prompt) is not None
        return self.match in prompt

    def next_response(self):
        """Responses are consumed in order; the last one repeats forever."""
        item = self.responses[min(self._cursor, len(self.responses) - 1)]
        self._cursor += 1
        return item


class MockPlaybook:
    def __init__(self, rules: list[PlaybookRule], default_response: str | None = None):
        self.rules = rules
        self.default_response = default_response

    @staticmethod
    def from_record(record: dict) -> "MockPlaybook":
        rules = [
            PlaybookRule(
                match=r["match"],
                responses=list(r["responses"]),
                regex=bool(r.get("regex", False)),
            )
            for r in record.get("rules", [])
        ]
        return MockPlaybook(rules, record.get("default_response"))

    @staticmethod
    def load(path: Path | str) -> "MockPlaybook":
        return MockPlaybook.from_record(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_record(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION_PLAYBOOK,
            "rules": [
                {"match": r.match, "regex": r.regex, "responses": r.responses}
                for r in self.rules
            ],
            "default_response": self.default_response,
        }

    def save(self, path: Path | str) -> None:
        Path(path).write_text(
            json.dumps(self.to_record(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
        )


class MockBackend:
    """Scripted backend: the first matching rule answers, consuming its
    response list sequentially. Response items may be plain strings or error
    directives ({"error": "transport"} / {"error": "status", "code": 500})
    so failure paths are scriptable too.
    """

    def __init__(self, playbook: MockPlaybook, config: BackendConfig | None = None):
        self.playbook = playbook
        self.config = config or BackendConfig(kind="mock")
        self.calls = 0
        self._lock = threading.Lock()

    def send(self, req: ChatRequest) -> tuple[str, str, dict]:
        prompt = req.rendered_prompt()
        with self._lock:
            self.calls += 1
            item = None
            for rule in self.playbook.rules:
                if rule.matches(prompt):
                    item = rule.next_response()
                    break
            else:
                if self.playbook.default_response is None:
                    raise PlaybookMissError(
                        f"no playbook rule matched request tagged {req.request_tag!r} "
                        f"(prompt head: {prompt[:80]!r})"
                    )
                item = self.playbook.default_response
        if isinstance(item, dict):
            kind = item.get("error")
            if kind == "transport":
                raise _TransientFailure("scripted transport failure")
            if kind == "status":
                code = int(item.get("code", 500))
                if code >= 500:
                    raise _TransientFailure(f"scripted status {code}")
                raise BadStatusError(code, "scripted")
            raise RequestError(f"bad playbook directive {item!r}")
        content = str(item)
        usage = {
            "prompt_tokens": len(prompt.split()),
            "completion_tokens": len(content.split()),
        }
        return content, FINISH_STOP, usage


# --- HTTP backend ----------------------------------------------------------


class HttpBackend:
    """POSTs the messages-array wire shape to {endpoint}/chat/completions."""

    def __init__(self, config: BackendConfig):
        if not config.endpoint:
            raise RequestError(f"backend {config.name!r}: http backend needs an endpoint")
        self.config = config

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.config.api_key_env:
            key = os.environ.get(self.config.api_key_env)
            if not key:
                raise RequestError(
                    f"backend {self.config.name!r}: env var {self.config.api_key_env} not set"
                )
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def send(self, req: ChatRequest) -> tuple[str, str, dict]:
        payload = {
            "model": req.model_id,
            "messages": [{"role": m.role, "content": m.content} for m in req.messages],
            "temperature": req.temperature,
            "top_p": req.top_p,
            "max_tokens": req.max_tokens,
        }
        url = self.config.endpoint.rstrip("/") + "/chat/completions"
        try:
            resp = requests.post(
                url, json=payload, headers=self._headers(), timeout=self.config.timeout_s
            )
        except requests.RequestException as exc:
            raise _TransientFailure(str(exc)) from exc
        if resp.status_code >= 500:
            raise _TransientFailure(f"status {resp.status_code}")
        if resp.status_code >= 400:
            raise BadStatusError(resp.status_code, resp.text[:200])
        try:
            data = resp.json()
            choice = data["choices"][0]
            content = choice["message"]["content"] or ""
            finish = choice.get("finish_reason") or FINISH_STOP
            usage = data.get("usage", {})
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BadStatusError(resp.status_code, f"unparseable response body: {exc}") from exc
        if finish not in (FINISH_STOP, FINISH_LENGTH):
            finish = FINISH_STOP
        return content, finish, usage


# --- rate limiting and caching ---------------------------------------------


class TokenBucket:
    """Requests-per-minute limiter shared by all calls through one gateway."""

    def __init__(self, rpm: int, time_fn=time.monotonic, sleep_fn=time.sleep):
        if rpm <= 0:
            raise ValueError("rpm must be positive")
        self.rate = rpm / 60.0
        self.capacity = max(1.0, self.rate)
        self.tokens = self.capacity
        self._time = time_fn
        self._sleep = sleep_fn
        self._last = time_fn()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        with self._lock:
            while True:
                now = self._time()
                self.tokens = min(self.capacity, self.tokens + (now - self._last) * self.rate)
                self._last = now
                if self.tokens >= 1.0:
                    self.tokens -= 1.0
                    return
                self._sleep((1.0 - self.tokens) / self.rate)


class ResponseCache:
    """On-disk key-value store, one JSON file per cache key. Eviction is
    manual: delete files from the directory."""

    def __init__(self, directory: Path | str):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _path(self, key: str) -> Path:
        return self.directory / f"{key}.json"

    def get(self, key: str) -> dict | None:
        path = self._path(key)
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    def put(self, key: str, value: dict) -> None:
        with self._lock:
            tmp = self._path(key).with_suffix(".tmp")
            tmp.write_text(json.dumps(value, ensure_ascii=False), encoding="utf-8")
            tmp.replace(self._path(key))


# --- the gateway -----------------------------------------------------------


class LlmGateway:
    def __init__(
        self,
        backend,
        config: BackendConfig | None = None,
        cache: ResponseCache | None = None,
        limiter: TokenBucket | None = None,
        sleep_fn=time.sleep,
    ):
        self.backend = backend
        self.config = config or getattr(backend, "config", BackendConfig())
        self.cache = cache
        self.limiter = limiter
        if self.limiter is None and self.config.rpm:
            self.limiter = TokenBucket(self.config.rpm)
        self._sleep = sleep_fn

    def complete(self, req: ChatRequest, recorder: RunRecord | None = None) -> ChatResponse:
        if req.max_tokens > self.config.max_tokens_limit:
            raise RequestError(
                f"max_tokens {req.max_tokens} exceeds the backend limit "
                f"{self.config.max_tokens_limit} for {self.config.name!r}"
            )
        key = cache_key(req)
        prompt = req.rendered_prompt()

        if self.cache is not None:
            hit = self.cache.get(key)
            if hit is not None:
                resp = ChatResponse(
                    content=hit["content"],
                    finish_reason=hit["finish_reason"],
                    usage=hit.get("usage", {}),
                    cached=True,
                )
                self._record(recorder, req, prompt, resp.content, 0, 0, cached=True)
                return resp

        retries = 0
        start = time.monotonic()
        while True:
            if self.limiter is not None:
                self.limiter.acquire()
            try:
                content, finish, usage = self.backend.send(req)
                break
            except _TransientFailure as exc:
                if retries >= self.config.retry_max:
                    raise TransportError(
                        f"backend {self.config.name!r} failed after {retries + 1} attempts: {exc}"
                    ) from exc
                self._sleep(self.config.backoff_s * (2 ** retries))
                retries += 1
        latency_ms = int((time.monotonic() - start) * 1000)

        if not content:
            finish = FINISH_ERROR
        resp = ChatResponse(content=content, finish_reason=finish, usage=usage)
        if self.cache is not None and finish != FINISH_ERROR:
            self.cache.put(key, {"content": content, "finish_reason": finish, "usage": usage})
        self._record(recorder, req, prompt, content, latency_ms, retries)
        return resp

    @staticmethod
    def _record(recorder, req, prompt, content, latency_ms, retries, cached=False):
        if recorder is None:
            return
        recorder.log_call(
            CallEntry(
                agent_role=req.request_tag,
                prompt_hash=content_hash(prompt),
                response_hash=content_hash(content),
                latency_ms=latency_ms,
                retries=retries,
                cached=cached,
            )
        )


def build_gateway(config: BackendConfig, sleep_fn=time.sleep) -> LlmGateway:
    """Construct a gateway from one backend config entry."""
    if config.kind == "mock":
        playbook = (
            MockPlaybook.load(config.playbook_path)
            if config.playbook_path
            else MockPlaybook(rules=[], default_response=None)
        )
        backend = MockBackend(playbook, config)
    elif config.kind == "http":
        backend = HttpBackend(config)
    else:
        raise RequestError(f"unknown backend kind {config.kind!r}")
    return LlmGateway(backend, config=config, sleep_fn=sleep_fn)
