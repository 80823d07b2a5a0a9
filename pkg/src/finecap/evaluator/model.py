"""Dual-encoder caption evaluator over frozen base embeddings.

Video and text base embeddings (dimension ``d_e``) are linearly projected to
``d_p``. The similarity head is the cosine of the projections; the matching
head is ``c(v, t) = w . (W_v v * W_t t) + b`` and its sigmoid is the caption
confidence score.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DegenerateError(ValueError):
    """A zero vector reached a normalization."""


def sigmoid(x):
    # tanh form is overflow-free in both directions
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=float)))


@dataclass(frozen=True)
class EvaluatorModel:
    W_v: np.ndarray
    W_t: np.ndarray
    w: np.ndarray
    b: float

    PARAMS = ("W_v", "W_t", "w", "b")

    def __post_init__(self):
        W_v = np.array(self.W_v, dtype=float)
        W_t = np.array(self.W_t, dtype=float)
        w = np.array(self.w, dtype=float).reshape(-1)
        if W_v.ndim != 2 or W_v.shape != W_t.shape or w.shape != (W_v.shape[0],):
            raise ValueError(f"inconsistent parameter shapes: W_v {W_v.shape}, W_t {W_t.shape}, "
                             f"w {w.shape}")
        for name, arr in (("W_v", W_v), ("W_t", W_t), ("w", w)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "b", float(self.b))

    @property
    def d_p(self) -> int:
        return self.W_v.shape[0]

    @property
    def d_e(self) -> int:
        return self.W_v.shape[1]

    @classmethod
    def initialize(cls, d_e: int, d_p: int | None = None) -> "EvaluatorModel":
        """Projections start as the first ``d_p`` rows of the identity, the head at zero."""
        d_p = d_e if d_p is None else d_p
        if not 1 <= d_p <= d_e:
            raise ValueError(f"need 1 <= d_p <= d_e, got d_p={d_p}, d_e={d_e}")
        eye = np.eye(d_p, d_e)
        return cls(eye, eye.copy(), np.zeros(d_p), 0.0)

    @classmethod
    def zeros_like(cls, other: "EvaluatorModel") -> "EvaluatorModel":
        return cls(np.zeros_like(other.W_v), np.zeros_like(other.W_t), np.zeros_like(other.w), 0.0)

    def arrays(self) -> dict:
        return {"W_v": self.W_v, "W_t": self.W_t, "w": self.w, "b": np.array(self.b)}

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays().values())

    # parameter-space arithmetic, used for gradients and updates
    def __add__(self, other: "EvaluatorModel") -> "EvaluatorModel":
        return EvaluatorModel(self.W_v + other.W_v, self.W_t + other.W_t, self.w + other.w,
                              self.b + other.b)

    def scale(self, k: float) -> "EvaluatorModel":
        return EvaluatorModel(k * self.W_v, k * self.W_t, k * self.w, k * self.b)

    def flat(self) -> np.ndarray:
        return np.concatenate([self.W_v.ravel(), self.W_t.ravel(), self.w, [self.b]])

    @classmethod
    def from_flat(cls, theta: np.ndarray, d_e: int, d_p: int) -> "EvaluatorModel":
        n = d_p * d_e
        theta = np.asarray(theta, dtype=float)
        return cls(theta[:n].reshape(d_p, d_e), theta[n:2 * n].reshape(d_p, d_e),
                   theta[2 * n:2 * n + d_p], theta[2 * n + d_p])

    def project_video(self, v: np.ndarray) -> np.ndarray:
        return np.asarray(v, dtype=float) @ self.W_v.T

    def project_text(self, t: np.ndarray) -> np.ndarray:
        return np.asarray(t, dtype=float) @ self.W_t.T

    def logit(self, v: np.ndarray, t: np.ndarray) -> np.ndarray:
        """Matching-head output ``c(v, t)``; rows of ``v`` pair with rows of ``t``."""
        return (self.project_video(v) * self.project_text(t)) @ self.w + self.b


def similarity(model: EvaluatorModel, v, t) -> float:
    """Cosine of the projected video and text embeddings."""
    v = np.asarray(v, dtype=float)
    t = np.asarray(t, dtype=float)
    if v.shape != (model.d_e,) or t.shape != (model.d_e,):
        raise ValueError(f"expected vectors of dimension {model.d_e}, got {v.shape}, {t.shape}")
    pv = model.project_video(v)
    pt = model.project_text(t)
    nv = np.linalg.norm(pv)
    nt = np.linalg.norm(pt)
    if nv == 0 or nt == 0:
        raise DegenerateError("projection has zero norm")
    return float(pv @ pt / (nv * nt))


def pool_moment_embedding(frame_embeddings) -> np.ndarray:
    """Mean of the frame embeddings, unit-normalized."""
    arr = np.asarray(frame_embeddings, dtype=float)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError("need at least one frame embedding")
    mean = arr.mean(axis=0)
    norm = np.linalg.norm(mean)
    if norm < 1e-12:
        raise DegenerateError("frame embeddings average to the zero vector")
    return mean / norm


def score(model: EvaluatorModel, frame_embeddings, caption_embedding) -> float:
    """Matching confidence in (0, 1) for one caption against one moment."""
    v = pool_moment_embedding(frame_embeddings)
    return float(sigmoid(model.logit(v[None, :], np.asarray(caption_embedding)[None, :])[0]))


def score_pooled(model: EvaluatorModel, v, captions) -> np.ndarray:
    """Scores of many caption embeddings against one pooled moment embedding."""
    captions = np.atleast_2d(np.asarray(captions, dtype=float))
    vv = np.broadcast_to(np.asarray(v, dtype=float), captions.shape)
    return sigmoid(model.logit(vv, captions))
