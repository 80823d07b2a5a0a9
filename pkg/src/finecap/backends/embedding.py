"""Sentence and frame embedders plus the caption distance used for selection."""
from __future__ import annotations

import hashlib
from typing import Optional, Sequence

import numpy as np
from PIL import Image

from ..frames import FrameHandle, load_frame
from .base import BackendError
from .cache import ResponseCache


def normalize_rows(vecs: np.ndarray) -> np.ndarray:
    vecs = np.asarray(vecs, dtype=float)
    norms = np.linalg.norm(vecs, axis=-1, keepdims=True)
    if not np.all(np.isfinite(vecs)) or np.any(norms == 0):
        raise BackendError("embedding is non-finite or has zero norm")
    return vecs / norms


def semantic_distance(a, b) -> float:
    """``1 - cosine(a, b)``, in ``[0, 2]``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("distance undefined for a zero vector")
    cos = float(np.dot(a, b) / (na * nb))
    return 1.0 - min(1.0, max(-1.0, cos))


class Embedder:
    """Base class: subclasses implement ``raw_embed``; this adds checks,
    normalization and an optional per-text cache."""

    dim: int
    model: str = "embedder"

    def __init__(self, cache: Optional[ResponseCache] = None):
        self.cache = cache or ResponseCache(None)
        self.calls = 0

    def raw_embed(self, texts: list[str]) -> np.ndarray:
        raise NotImplementedError

    def _key(self, text: str) -> str:
        blob = f"embed\x00{self.model}\x00{self.dim}\x00{text}"
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        texts = list(texts)
        for t in texts:
            if not isinstance(t, str) or not t.strip():
                raise ValueError("cannot embed an empty text")
        self.calls += 1
        out: list[Optional[np.ndarray]] = [None] * len(texts)
        missing = []
        for i, t in enumerate(texts):
            hit = self.cache.get(self._key(t))
            if hit is not None:
                out[i] = np.array(hit["vector"], dtype=float)
            else:
                missing.append(i)
        if missing:
            raw = np.asarray(self.raw_embed([texts[i] for i in missing]), dtype=float)
            if raw.ndim != 2 or raw.shape[1] != self.dim:
                raise BackendError(f"embedder returned shape {raw.shape}, expected (*, {self.dim})")
            raw = normalize_rows(raw)
            for i, vec in zip(missing, raw):
                out[i] = vec
                self.cache.put(self._key(texts[i]), {"vector": vec.tolist()})
        if not texts:
            return np.zeros((0, self.dim))
        return np.stack(out)


class HashEmbedder(Embedder):
    """Deterministic mock: each text maps to a seeded Gaussian vector."""

    model = "hash"

    def __init__(self, dim: int = 64, seed: int = 0, cache: Optional[ResponseCache] = None):
        super().__init__(cache)
        self.dim = dim
        self.seed = seed

    def raw_embed(self, texts: list[str]) -> np.ndarray:
        rows = []
        for t in texts:
            digest = hashlib.sha256(f"{self.seed}\x00{t}".encode("utf-8")).digest()
            rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
            rows.append(rng.standard_normal(self.dim))
        return np.array(rows).reshape(len(texts), self.dim)


class PixelProjectionEmbedder:
    """Frame embedder: a fixed random projection of a small thumbnail.

    Stands in for a visual encoder at desk scale; output lives in the same
    dimension as the sentence embedder so the evaluator can project both.
    """

    def __init__(self, dim: int = 64, seed: int = 0, size: int = 8):
        self.dim = dim
        self.size = size
        rng = np.random.default_rng(seed)
        self.matrix = rng.standard_normal((dim, size * size * 3)) / np.sqrt(size * size * 3)

    def embed_frames(self, handles: Sequence[FrameHandle]) -> np.ndarray:
        rows = []
        for h in handles:
            img = Image.fromarray(load_frame(h)).resize((self.size, self.size), Image.BILINEAR)
            x = np.asarray(img, dtype=float).reshape(-1) / 255.0 - 0.5
            rows.append(self.matrix @ x)
        if not rows:
            return np.zeros((0, self.dim))
        rows = np.array(rows)
        norms = np.linalg.norm(rows, axis=1, keepdims=True)
        # a mid-grey thumbnail projects to zero; keep it as a tiny constant vector
        rows = np.where(norms > 1e-12, rows / np.maximum(norms, 1e-12), 1.0 / np.sqrt(self.dim))
        return rows
