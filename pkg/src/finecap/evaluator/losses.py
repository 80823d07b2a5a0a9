"""Hard-negative augmented contrastive and matching losses with analytic gradients.

A batch holds, per item ``i``: the pooled moment embedding ``v_i``, its
caption ``q_i``, the selected positive rewrite, and the selected static and
dynamic hard negatives. Every loss returns ``(value, grads)`` where ``grads``
is an :class:`EvaluatorModel` holding the partial derivatives.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .model import DegenerateError, EvaluatorModel


@dataclass(frozen=True)
class TrainingBatch:
    v: np.ndarray
    q: np.ndarray
    q_pos: np.ndarray
    s_neg: np.ndarray
    d_neg: np.ndarray

    def __post_init__(self):
        arrays = [np.atleast_2d(np.asarray(getattr(self, n), dtype=float))
                  for n in ("v", "q", "q_pos", "s_neg", "d_neg")]
        shape = arrays[0].shape
        if any(a.shape != shape for a in arrays):
            raise ValueError(f"batch arrays disagree in shape: {[a.shape for a in arrays]}")
        for name, a in zip(("v", "q", "q_pos", "s_neg", "d_neg"), arrays):
            object.__setattr__(self, name, a)

    @property
    def size(self) -> int:
        return self.v.shape[0]

    def with_positive(self) -> "TrainingBatch":
        """Same batch with each caption replaced by its positive rewrite."""
        return TrainingBatch(self.v, self.q_pos, self.q_pos, self.s_neg, self.d_neg)

    def take(self, idx) -> "TrainingBatch":
        return TrainingBatch(self.v[idx], self.q[idx], self.q_pos[idx], self.s_neg[idx],
                             self.d_neg[idx])


def _logsumexp(x: np.ndarray) -> np.ndarray:
    m = x.max(axis=1, keepdims=True)
    return (m + np.log(np.exp(x - m).sum(axis=1, keepdims=True)))[:, 0]


def _unit_rows(P: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(P, axis=1)
    if np.any(norms == 0):
        raise DegenerateError("a projected embedding has zero norm")
    return P / norms[:, None], norms


def _through_normalization(dU: np.ndarray, U: np.ndarray, norms: np.ndarray) -> np.ndarray:
    # d(P/|P|): (I - u u^T) / |P|
    return (dU - U * np.sum(dU * U, axis=1, keepdims=True)) / norms[:, None]


def _check_finite(value: float, what: str) -> None:
    if not np.isfinite(value):
        raise FloatingPointError(f"{what} is not finite")


def contrastive_terms(model: EvaluatorModel, batch: TrainingBatch, tau: float):
    """Per-item log-probabilities of the video->text and text->video directions.

    Returns ``(vt, tv, cache)``. Video ``i`` is scored against all captions
    and both hard negatives of every item (``3B`` candidates); caption ``i``
    is scored against the ``B`` videos.
    """
    if tau <= 0:
        raise ValueError("temperature must be > 0")
    B = batch.size
    texts = np.concatenate([batch.q, batch.s_neg, batch.d_neg])
    U, nv = _unit_rows(model.project_video(batch.v))
    Z, nt = _unit_rows(model.project_text(texts))
    S = U @ Z.T
    L1 = S / tau
    lse1 = _logsumexp(L1)
    L2 = S[:, :B].T / tau
    lse2 = _logsumexp(L2)
    diag = np.arange(B)
    vt = L1[diag, diag] - lse1
    tv = L2[diag, diag] - lse2
    return vt, tv, (texts, U, nv, Z, nt, L1, lse1, L2, lse2)


def contrastive_loss(model: EvaluatorModel, batch: TrainingBatch, tau: float
                     ) -> tuple[float, EvaluatorModel]:
    B = batch.size
    vt, tv, (texts, U, nv, Z, nt, L1, lse1, L2, lse2) = contrastive_terms(model, batch, tau)
    value = -(vt.sum() + tv.sum()) / (2 * B)
    _check_finite(value, "contrastive loss")

    eye = np.eye(B)
    G = np.exp(L1 - lse1[:, None])
    G[:, :B] -= eye
    G /= 2 * B * tau
    G2 = (np.exp(L2 - lse2[:, None]) - eye) / (2 * B * tau)
    G[:, :B] += G2.T

    dU = G @ Z
    dZ = G.T @ U
    dPv = _through_normalization(dU, U, nv)
    dPt = _through_normalization(dZ, Z, nt)
    grads = EvaluatorModel(dPv.T @ batch.v, dPt.T @ texts, np.zeros(model.d_p), 0.0)
    return float(value), grads


class TrivialNegatives(NamedTuple):
    # text_idx[i]: item whose caption is the sampled negative for video i
    text_idx: np.ndarray
    # video_idx[i]: item whose video is the sampled negative for caption i
    video_idx: np.ndarray


def sample_trivial_negatives(B: int, rng: np.random.Generator) -> TrivialNegatives:
    """One uniformly drawn ``j != i`` per anchor, for texts and for videos."""
    if B < 2:
        return TrivialNegatives(np.zeros(0, dtype=int), np.zeros(0, dtype=int))
    i = np.arange(B)
    t = rng.integers(0, B - 1, size=B)
    v = rng.integers(0, B - 1, size=B)
    return TrivialNegatives(t + (t >= i), v + (v >= i))


def matching_pairs(batch: TrainingBatch, negatives: TrivialNegatives):
    """Stack the scored (video, text, label) pairs.

    Per item: the positive pair, the two hard negatives, then (when ``B >= 2``)
    the sampled trivial caption and trivial video negatives.
    """
    B = batch.size
    idx = np.arange(B)
    vids = [batch.v, batch.v, batch.v]
    txts = [batch.q, batch.s_neg, batch.d_neg]
    labels = [np.ones(B), np.zeros(B), np.zeros(B)]
    kinds = ["positive", "hard_static", "hard_dynamic"]
    if B >= 2:
        if len(negatives.text_idx) != B or len(negatives.video_idx) != B:
            raise ValueError("trivial negatives do not match the batch size")
        if np.any(negatives.text_idx == idx) or np.any(negatives.video_idx == idx):
            raise ValueError("a trivial negative must come from another item")
        vids += [batch.v, batch.v[negatives.video_idx]]
        txts += [batch.q[negatives.text_idx], batch.q]
        labels += [np.zeros(B), np.zeros(B)]
        kinds += ["trivial_text", "trivial_video"]
    return np.concatenate(vids), np.concatenate(txts), np.concatenate(labels), kinds


def matching_loss(model: EvaluatorModel, batch: TrainingBatch,
                  rng: Optional[np.random.Generator] = None,
                  negatives: Optional[TrivialNegatives] = None) -> tuple[float, EvaluatorModel]:
    B = batch.size
    if negatives is None:
        negatives = sample_trivial_negatives(B, rng if rng is not None else np.random.default_rng())
    V, T, y, _ = matching_pairs(batch, negatives)
    Pv = model.project_video(V)
    Pt = model.project_text(T)
    feats = Pv * Pt
    c = feats @ model.w + model.b
    # -log sigma(c) = softplus(-c); -log(1 - sigma(c)) = softplus(c)
    value = float(np.sum(np.where(y == 1, np.logaddexp(0.0, -c), np.logaddexp(0.0, c))) / B)
    _check_finite(value, "matching loss")
    dc = (0.5 * (1.0 + np.tanh(0.5 * c)) - y) / B
    dPv = dc[:, None] * model.w * Pt
    dPt = dc[:, None] * model.w * Pv
    grads = EvaluatorModel(dPv.T @ V, dPt.T @ T, feats.T @ dc, float(dc.sum()))
    return value, grads


class TotalLoss(NamedTuple):
    value: float
    grads: EvaluatorModel
    parts: dict


def total_loss(model: EvaluatorModel, batch: TrainingBatch, cfg,
               rng: Optional[np.random.Generator] = None,
               negatives: Optional[TrivialNegatives] = None) -> TotalLoss:
    """Weighted sum of both losses on the original and the positive-rewrite captions.

    The positive-rewrite pass keeps the same hard negatives and the same
    sampled trivial-negative indices.
    """
    if negatives is None:
        negatives = sample_trivial_negatives(batch.size,
                                             rng if rng is not None else np.random.default_rng())
    pos = batch.with_positive()
    lc, gc = contrastive_loss(model, batch, cfg.tau)
    lcp, gcp = contrastive_loss(model, pos, cfg.tau)
    lm, gm = matching_loss(model, batch, negatives=negatives)
    lmp, gmp = matching_loss(model, pos, negatives=negatives)
    hc = cfg.lambda_c / 2
    hm = cfg.lambda_m / 2
    value = hc * (lc + lcp) + hm * (lm + lmp)
    grads = (gc + gcp).scale(hc) + (gm + gmp).scale(hm)
    parts = {"contrastive": lc, "contrastive_pos": lcp, "matching": lm, "matching_pos": lmp}
    return TotalLoss(float(value), grads, parts)
