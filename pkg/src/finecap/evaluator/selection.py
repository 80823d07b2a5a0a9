"""Scoring caption candidates and choosing one caption per moment."""
from __future__ import annotations

from dataclasses import replace
from typing import Optional, Sequence

import numpy as np

from ..records import AnnotatedMoment, CaptionCandidate
from .model import EvaluatorModel, score_pooled


def score_candidates(model: EvaluatorModel, moment_embedding,
                     candidates: Sequence[CaptionCandidate], caption_embeddings
                     ) -> list[CaptionCandidate]:
    if not candidates:
        return []
    scores = score_pooled(model, moment_embedding, caption_embeddings)
    return [replace(c, score=float(s)) for c, s in zip(candidates, scores)]


def best_candidate(annotated: AnnotatedMoment) -> Optional[tuple[str, int]]:
    """Highest score; statics win ties against dynamics, then lower index wins."""
    best = None
    best_score = -np.inf
    for kind, pool in (("static", annotated.statics), ("dynamic", annotated.dynamics)):
        for i, c in enumerate(pool):
            if c.score is None:
                raise ValueError(f"candidate {kind}[{i}] has no score")
            if c.score > best_score:
                best, best_score = (kind, i), c.score
    return best


def select_and_filter(annotated: AnnotatedMoment, threshold: Optional[float] = None
                      ) -> AnnotatedMoment:
    flags = [f for f in annotated.flags if f not in ("annotation-failed", "all-filtered")]
    if not annotated.candidates():
        return replace(annotated, selected=None, flags=tuple(flags + ["annotation-failed"]))
    selected = best_candidate(annotated)
    statics, dynamics = annotated.statics, annotated.dynamics
    if threshold is not None:
        statics = tuple(replace(c, filtered=c.score < threshold) for c in statics)
        dynamics = tuple(replace(c, filtered=c.score < threshold) for c in dynamics)
        if all(c.filtered for c in (*statics, *dynamics)):
            flags.append("all-filtered")
    return replace(annotated, statics=statics, dynamics=dynamics, selected=selected,
                   flags=tuple(flags))
