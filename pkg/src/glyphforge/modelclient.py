"""Uniform outbound interface to model backends.

Real traffic goes through HttpBackend (generic JSON wire, credential read
from an environment variable at send time and scrubbed from error text).
MockBackend is deterministic and makes the whole harness a pure function
of its inputs; tests and offline runs use it exclusively. Attachments
always travel as the exact PNG bytes the build produced.
"""
from __future__ import annotations

import base64
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Protocol

import httpx

from .errors import BackendError, ValidationError

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


@dataclass(frozen=True)
class ModelRequest:
    prompt: str
    attachments: tuple[tuple[str, bytes], ...] = ()
    model_id: str = ""
    settings: dict = field(default_factory=dict)  # recorded verbatim, never interpreted

    def __post_init__(self):
        if not self.prompt:
            raise ValidationError("empty-prompt", "prompt must be non-empty")
        for name, data in self.attachments:
            if not data.startswith(PNG_MAGIC):
                raise ValidationError("bad-attachment", f"attachment {name!r} is not a PNG")


@dataclass
class ModelResponse:
    text: str
    finish_reason: str = "stop"
    usage: dict = field(default_factory=dict)
    latency_s: float = 0.0


class Backend(Protocol):
    model_id: str

    def send(self, req: ModelRequest) -> ModelResponse: ...


class MockBackend:
    """Canned/scripted backend. `fail_times` injects transient faults."""

    deterministic = True

    def __init__(
        self,
        responder: Callable[[ModelRequest], str] | None = None,
        responses: dict[str, str] | None = None,
        default: str = "",
        model_id: str = "mock",
        fail_times: int = 0,
        mode: str = "static",
        accuracy: float = 1.0,
    ):
        self.responder = responder
        self.responses = responses or {}
        self.default = default
        self.model_id = model_id
        self.fail_times = fail_times
        self.mode = mode  # "static" | "oracle" | "accuracy": resolved by the harness
        self.accuracy = accuracy
        self.requests_seen: list[ModelRequest] = []
        self._lock = threading.Lock()

    def bind(self, text: str) -> "MockBackend":
        """Cheap copy answering every request with `text` (per-bundle scripting)."""
        return MockBackend(responder=lambda req: text, model_id=self.model_id, fail_times=self.fail_times)

    def send(self, req: ModelRequest) -> ModelResponse:
        with self._lock:
            self.requests_seen.append(req)
            if self.fail_times > 0:
                self.fail_times -= 1
                raise BackendError("transport", "scripted transient failure", retriable=True)
        if self.responder is not None:
            text = self.responder(req)
        else:
            text = self.responses.get(prompt_key(req), self.default)
        return ModelResponse(
            text=text,
            finish_reason="stop",
            usage={"prompt_chars": len(req.prompt), "response_chars": len(text)},
            latency_s=0.0,
        )


def prompt_key(req: ModelRequest) -> str:
    """Stable key for canned-response lookup: sha256 of prompt + attachments."""
    import hashlib

    h = hashlib.sha256(req.prompt.encode("utf-8"))
    for _, data in req.attachments:
        h.update(data)
    return h.hexdigest()


class HttpBackend:
    """Generic JSON adapter: POST {model, prompt, images[b64]} -> {text, ...}.

    Vendor-specific shapes belong in subclasses overriding encode/decode;
    this class fixes the interface contract, not any one wire format.
    """

    deterministic = False

    def __init__(
        self,
        url: str,
        model_id: str,
        credential_env: str | None = None,
        timeout: float = 60.0,
        settings: dict | None = None,
        transport: httpx.BaseTransport | None = None,
    ):
        self.url = url
        self.model_id = model_id
        self.credential_env = credential_env
        self.timeout = timeout
        self.settings = settings or {}
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def _credential(self) -> str | None:
        import os

        if not self.credential_env:
            return None
        value = os.environ.get(self.credential_env)
        if not value:
            raise BackendError("auth", f"environment variable {self.credential_env} is not set")
        return value

    def encode(self, req: ModelRequest) -> dict:
        return {
            "model": self.model_id,
            "prompt": req.prompt,
            "images": [base64.b64encode(data).decode("ascii") for _, data in req.attachments],
            "settings": {**self.settings, **req.settings},
        }

    def decode(self, payload: dict) -> ModelResponse:
        if "text" not in payload:
            raise BackendError("malformed-reply", "backend reply has no text field")
        return ModelResponse(
            text=str(payload["text"]),
            finish_reason=str(payload.get("finish_reason", "stop")),
            usage=dict(payload.get("usage", {})),
        )

    def send(self, req: ModelRequest) -> ModelResponse:
        cred = self._credential()
        headers = {"Authorization": f"Bearer {cred}"} if cred else {}
        start = time.monotonic()
        try:
            resp = self._client.post(self.url, json=self.encode(req), headers=headers)
        except httpx.TimeoutException as exc:
            raise BackendError("timeout", scrub(str(exc), cred), retriable=True) from exc
        except httpx.HTTPError as exc:
            raise BackendError("transport", scrub(str(exc), cred), retriable=True) from exc
        if resp.status_code in (401, 403):
            raise BackendError("auth", f"backend rejected credentials (HTTP {resp.status_code})")
        if resp.status_code == 413 or resp.status_code == 422:
            raise BackendError("attachment-rejected", scrub(resp.text[:500], cred))
        if resp.status_code >= 500:
            raise BackendError("transport", f"backend error HTTP {resp.status_code}", retriable=True)
        if resp.status_code != 200:
            raise BackendError("transport", f"unexpected HTTP {resp.status_code}")
        try:
            payload = resp.json()
        except ValueError as exc:
            raise BackendError("malformed-reply", "backend reply is not JSON") from exc
        out = self.decode(payload)
        out.latency_s = time.monotonic() - start
        return out


def scrub(text: str, *secrets: str | None) -> str:
    """Replace credential values so they never reach records or logs."""
    for s in secrets:
        if s:
            text = text.replace(s, "***")
    return text


def send_with_retries(
    backend: Backend,
    req: ModelRequest,
    retries: int = 3,
    backoff_s: float = 0.25,
    sleep: Callable[[float], None] = time.sleep,
) -> ModelResponse:
    """Send with up to `retries` extra attempts on retriable faults,
    exponential backoff. Prompts are pure data, so retrying is idempotent."""
    attempt = 0
    while True:
        try:
            return backend.send(req)
        except BackendError as exc:
            if not exc.retriable or attempt >= retries:
                raise
            sleep(backoff_s * (2**attempt))
            attempt += 1


class RateLimitedBackend:
    """Token-bucket wrapper enforcing a per-backend request rate."""

    def __init__(self, backend: Backend, requests_per_s: float, burst: int = 1, clock=time.monotonic, sleep=time.sleep):
        self.backend = backend
        self.model_id = backend.model_id
        self.deterministic = getattr(backend, "deterministic", False)
        self.rate = requests_per_s
        self.capacity = float(burst)
        self._tokens = float(burst)
        self._stamp = clock()
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()

    def send(self, req: ModelRequest) -> ModelResponse:
        while True:
            with self._lock:
                now = self._clock()
                self._tokens = min(self.capacity, self._tokens + (now - self._stamp) * self.rate)
                self._stamp = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    break
                wait = (1.0 - self._tokens) / self.rate
            self._sleep(wait)
        return self.backend.send(req)


def make_backend(cfg: dict) -> Backend:
    """Build a backend from a run-config registry entry."""
    kind = cfg.get("type", "mock")
    if kind == "mock":
        backend: Backend = MockBackend(
            responses=cfg.get("responses", {}),
            default=cfg.get("default", ""),
            model_id=cfg.get("model_id", "mock"),
            fail_times=int(cfg.get("fail_times", 0)),
            mode=cfg.get("mode", "oracle"),
            accuracy=float(cfg.get("accuracy", 1.0)),
        )
    elif kind == "http":
        backend = HttpBackend(
            url=cfg["url"],
            model_id=cfg.get("model_id", cfg.get("model", "")),
            credential_env=cfg.get("credential_env"),
            timeout=float(cfg.get("timeout", 60.0)),
            settings=cfg.get("settings", {}),
        )
    else:
        raise ValidationError("bad-backend", f"unknown backend type {kind!r}")
    rate = cfg.get("requests_per_s")
    if rate:
        backend = RateLimitedBackend(backend, float(rate), burst=int(cfg.get("burst", 1)))
    return backend
