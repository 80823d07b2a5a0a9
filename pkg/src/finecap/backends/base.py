"""Request/response types and the role-dispatching chat client."""
from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import dataclass
from typing import Optional, Protocol

from pydantic import BaseModel, ConfigDict, Field

from ..frames import FrameHandle, FrameSequence, frame_bytes
from .cache import ResponseCache

logger = logging.getLogger(__name__)

ROLES = ("llm", "image_lmm", "video_lmm")


class BackendError(RuntimeError):
    pass


class BackendUnavailable(BackendError):
    def __init__(self, message: str, attempts: int):
        super().__init__(f"{message} (after {attempts} attempts)")
        self.attempts = attempts


class AuthenticationError(BackendError):
    pass


class EmptyOutputError(BackendError):
    pass


class RefusalError(BackendError):
    """The model declined to answer (safety filter or similar)."""


class BackendConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    endpoint: str = "http://localhost:8000/v1/chat/completions"
    model: str = "mock"
    token_env: Optional[str] = None
    timeout: float = Field(60.0, gt=0)
    max_retries: int = Field(3, ge=0)
    backoff_base: float = Field(1.0, ge=0)
    temperature: float = Field(0.7, ge=0)


@dataclass(frozen=True)
class ChatRequest:
    user: str
    system: str = ""
    images: tuple[FrameHandle, ...] = ()
    frames: Optional[FrameSequence] = None
    temperature: float = 0.0
    seed: int = 0

    def payload(self) -> dict:
        """Canonical JSON-able form; images are represented by content digests."""
        d = {"system": self.system, "user": self.user, "temperature": self.temperature,
             "seed": self.seed,
             "images": [hashlib.sha256(frame_bytes(h)).hexdigest() for h in self.images]}
        if self.frames is not None:
            d["frames"] = [[f.timestamp, hashlib.sha256(frame_bytes(f.handle)).hexdigest()]
                           for f in self.frames]
        return d


@dataclass(frozen=True)
class ChatResponse:
    text: str
    latency: float = 0.0
    cache_hit: bool = False
    attempts: int = 1


class ChatBackend(Protocol):
    model: str

    def complete(self, role: str, req: ChatRequest) -> tuple[str, int]:
        """Return ``(text, attempts)``."""
        ...


def request_digest(role: str, model: str, req: ChatRequest) -> str:
    blob = json.dumps({"role": role, "model": model, "request": req.payload()},
                      sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def check_attachments(role: str, req: ChatRequest) -> None:
    if role not in ROLES:
        raise ValueError(f"unknown role {role!r}; expected one of {ROLES}")
    if role == "image_lmm" and not req.images:
        raise ValueError("image_lmm requests need at least one image")
    if role == "video_lmm" and (req.frames is None or len(req.frames) == 0):
        raise ValueError("video_lmm requests need a non-empty frame sequence")


class ChatClient:
    """Routes requests to per-role backends through the response cache."""

    def __init__(self, backends: dict, cache: Optional[ResponseCache] = None):
        self.backends = dict(backends)
        self.cache = cache or ResponseCache(None)

    def backend(self, role: str) -> ChatBackend:
        try:
            return self.backends[role]
        except KeyError:
            raise BackendError(f"no backend configured for role {role!r}") from None

    def chat(self, role: str, req: ChatRequest) -> ChatResponse:
        check_attachments(role, req)
        backend = self.backend(role)
        key = request_digest(role, backend.model, req)
        hit = self.cache.get(key)
        if hit is not None:
            return ChatResponse(text=hit["text"], latency=0.0, cache_hit=True,
                                attempts=0)
        t0 = time.perf_counter()
        attempts = 0
        text = ""
        # empty output is retried exactly once
        for _ in range(2):
            text, n = backend.complete(role, req)
            attempts += n
            if text and text.strip():
                break
            logger.warning("empty output from %s backend (%s)", role, backend.model)
        else:
            raise EmptyOutputError(f"{role} backend returned empty output twice")
        latency = time.perf_counter() - t0
        self.cache.put(key, {"role": role, "model": backend.model, "text": text})
        return ChatResponse(text=text, latency=latency, cache_hit=False, attempts=attempts)
