"""Chat-completion and embedding clients speaking the common HTTP JSON protocol."""
from __future__ import annotations

import base64
import logging
import os
import random
import time
from typing import Callable, Optional

import numpy as np
import requests

from ..frames import frame_bytes
from .embedding import Embedder
from .base import (AuthenticationError, BackendConfig, BackendError, BackendUnavailable,
                   ChatRequest, RefusalError)

logger = logging.getLogger(__name__)

RETRY_STATUS = {408, 409, 425, 429, 500, 502, 503, 504}
REFUSAL_REASONS = {"content_filter", "safety", "recitation", "blocklist"}


def _image_part(handle) -> dict:
    data = base64.b64encode(frame_bytes(handle)).decode("ascii")
    return {"type": "image_url", "image_url": {"url": f"data:image/png;base64,{data}"}}


def build_messages(req: ChatRequest) -> list[dict]:
    messages = []
    if req.system:
        messages.append({"role": "system", "content": req.system})
    if not req.images and req.frames is None:
        messages.append({"role": "user", "content": req.user})
        return messages
    parts: list[dict] = []
    if req.frames is not None:
        stamps = ", ".join(f"{f.timestamp:.2f}s" for f in req.frames)
        parts.append({"type": "text",
                      "text": f"The following {len(req.frames)} frames are in temporal order, "
                              f"taken at: {stamps}."})
        parts.extend(_image_part(f.handle) for f in req.frames)
    parts.extend(_image_part(h) for h in req.images)
    parts.append({"type": "text", "text": req.user})
    messages.append({"role": "user", "content": parts})
    return messages


class _RetryingPoster:
    def __init__(self, config: BackendConfig, sleep: Callable[[float], None] = time.sleep,
                 session: Optional[requests.Session] = None, rng: Optional[random.Random] = None):
        self.config = config
        self.sleep = sleep
        self.session = session or requests.Session()
        self.rng = rng or random.Random()

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.config.token_env:
            token = os.environ.get(self.config.token_env, "")
            if not token:
                raise AuthenticationError(
                    f"environment variable {self.config.token_env} is not set")
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def backoff(self, retry_index: int) -> float:
        base = self.config.backoff_base * (2 ** retry_index)
        return base * self.rng.uniform(0.8, 1.2)

    def post(self, body: dict) -> tuple[dict, int]:
        headers = self._headers()
        attempts = 0
        last = "no attempt made"
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                self.sleep(self.backoff(attempt - 1))
            attempts += 1
            try:
                resp = self.session.post(self.config.endpoint, json=body, headers=headers,
                                         timeout=self.config.timeout)
            except requests.RequestException as exc:
                last = f"{type(exc).__name__}: {exc}"
                logger.warning("request to %s failed (attempt %d): %s",
                               self.config.endpoint, attempts, last)
                continue
            if resp.status_code in (401, 403):
                raise AuthenticationError(f"{self.config.endpoint} rejected credentials "
                                          f"(HTTP {resp.status_code})")
            if resp.status_code in RETRY_STATUS:
                last = f"HTTP {resp.status_code}"
                logger.warning("%s returned %s (attempt %d)", self.config.endpoint, last, attempts)
                continue
            if resp.status_code >= 400:
                raise BackendError(f"{self.config.endpoint} returned HTTP {resp.status_code}: "
                                   f"{resp.text[:200]}")
            try:
                return resp.json(), attempts
            except ValueError:
                last = "response is not JSON"
                continue
        raise BackendUnavailable(f"{self.config.endpoint}: {last}", attempts)


class HttpChatBackend:
    def __init__(self, config: BackendConfig, **kwargs):
        self.config = config
        self.model = config.model
        self._poster = _RetryingPoster(config, **kwargs)

    def complete(self, role: str, req: ChatRequest) -> tuple[str, int]:
        body = {"model": self.config.model, "messages": build_messages(req),
                "temperature": req.temperature, "seed": req.seed}
        data, attempts = self._poster.post(body)
        try:
            choice = data["choices"][0]
            text = choice["message"]["content"] or ""
        except (KeyError, IndexError, TypeError):
            raise BackendError(f"malformed chat response: {str(data)[:200]}") from None
        if choice.get("finish_reason") in REFUSAL_REASONS:
            raise RefusalError(f"{role} model refused ({choice.get('finish_reason')})")
        return text, attempts


class HttpEmbedder(Embedder):
    """Sentence embeddings via an ``/embeddings``-style endpoint."""

    def __init__(self, config: BackendConfig, dim: int, cache=None, **kwargs):
        super().__init__(cache)
        self.config = config
        self.dim = dim
        self.model = config.model
        self._poster = _RetryingPoster(config, **kwargs)

    def raw_embed(self, texts: list[str]) -> np.ndarray:
        data, _ = self._poster.post({"model": self.config.model, "input": list(texts)})
        try:
            rows = sorted(data["data"], key=lambda r: r.get("index", 0))
            vecs = np.array([r["embedding"] for r in rows], dtype=float)
        except (KeyError, TypeError, ValueError):
            raise BackendError(f"malformed embedding response: {str(data)[:200]}") from None
        if vecs.shape != (len(texts), self.dim):
            raise BackendError(f"expected embeddings of shape {(len(texts), self.dim)}, "
                               f"got {vecs.shape}")
        return vecs
