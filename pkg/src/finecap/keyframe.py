"""Key-frame selection by content-based scene segmentation.

A moment is cut wherever the content score between consecutive analysis
frames exceeds a threshold. The threshold is searched by bisection so the
moment splits into at most ``L`` segments, with as many segments as that cap
allows. The frame nearest each segment's temporal centre is its key frame.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .frames import Frame, FrameSequence, sample_frames
from .kernels import adjacent_scores, content_score

logger = logging.getLogger(__name__)

__all__ = ["SegmentationConfig", "Segment", "SegmentationResult", "content_score",
           "count_segments", "search_threshold", "segment_scores", "segment_moment"]


class SegmentationConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    L: int = Field(1, ge=1)
    initial_threshold: float = Field(27.0, gt=0)
    threshold_min: float = Field(1.0, gt=0)
    threshold_max: float = Field(100.0, gt=0)
    max_iterations: int = Field(20, ge=1)
    analysis_fps: Optional[float] = Field(2.0, gt=0)

    @model_validator(mode="after")
    def _bounds(self):
        if not self.threshold_min < self.threshold_max:
            raise ValueError("threshold_min must be < threshold_max")
        return self


@dataclass(frozen=True)
class Segment:
    start: float
    end: float
    mid_index: int
    mid: Frame

    def __post_init__(self):
        if not self.start <= self.mid.timestamp <= self.end:
            raise ValueError(f"key frame at {self.mid.timestamp} outside [{self.start}, {self.end}]")


@dataclass(frozen=True)
class SegmentationResult:
    segments: tuple[Segment, ...]
    threshold: float
    iterations: int
    # true when even the upper threshold bound left too many cuts
    capped: bool = False

    @property
    def keyframes(self) -> list[Frame]:
        return [s.mid for s in self.segments]


def count_segments(scores: np.ndarray, threshold: float) -> int:
    return 1 + int(np.count_nonzero(np.asarray(scores) > threshold))


def search_threshold(scores, L: int, lo: float, hi: float, max_iterations: int = 20,
                     initial: Optional[float] = None) -> tuple[float, int, bool]:
    """Smallest threshold in ``[lo, hi]`` giving at most ``L`` segments.

    Returns ``(threshold, iterations, capped)``. ``capped`` is set when no
    threshold in range satisfies the bound; ``hi`` is returned then.
    """
    scores = np.asarray(scores, dtype=float)
    if count_segments(scores, lo) <= L:
        return lo, 0, False
    if count_segments(scores, hi) > L:
        return hi, 0, True
    iterations = 0
    if initial is not None and lo < initial < hi and max_iterations > 0:
        iterations += 1
        if count_segments(scores, initial) <= L:
            hi = initial
        else:
            lo = initial
    while iterations < max_iterations:
        iterations += 1
        mid = 0.5 * (lo + hi)
        if count_segments(scores, mid) <= L:
            hi = mid
        else:
            lo = mid
    # the exact optimum is a score value inside the final bracket
    inside = np.sort(scores[(scores > lo) & (scores <= hi)])
    for cand in inside:
        if count_segments(scores, cand) <= L:
            return float(cand), iterations, False
    return float(hi), iterations, False


def _top_cuts(scores: np.ndarray, k: int) -> np.ndarray:
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    return np.array(sorted(order[:k]), dtype=int)


def _build_segments(frames: Sequence[Frame], cuts: Sequence[int]) -> tuple[Segment, ...]:
    """``cuts`` holds frame indices that open a new segment."""
    ts = [f.timestamp for f in frames]
    n = len(ts)
    starts = [0, *cuts]
    ends = [*cuts, n]
    segments = []
    for a, b in zip(starts, ends):
        start = ts[0] if a == 0 else 0.5 * (ts[a - 1] + ts[a])
        end = ts[-1] if b == n else 0.5 * (ts[b - 1] + ts[b])
        centre = 0.5 * (start + end)
        # first index wins on ties
        mid = min(range(a, b), key=lambda i: (abs(ts[i] - centre), i))
        segments.append(Segment(start, end, mid, frames[mid]))
    return tuple(segments)


def segment_scores(frames: Sequence[Frame], scores, cfg: SegmentationConfig) -> SegmentationResult:
    """Segment a frame list given precomputed adjacent content scores."""
    if len(frames) == 0:
        raise ValueError("cannot segment an empty frame sequence")
    scores = np.asarray(scores, dtype=float)
    if scores.shape != (len(frames) - 1,):
        raise ValueError(f"expected {len(frames) - 1} adjacent scores, got {scores.shape}")
    theta, iterations, capped = search_threshold(
        scores, cfg.L, cfg.threshold_min, cfg.threshold_max, cfg.max_iterations,
        cfg.initial_threshold)
    if capped:
        logger.warning("threshold bound %.3g still yields > %d segments; keeping strongest cuts",
                       theta, cfg.L)
        cut_idx = _top_cuts(scores, cfg.L - 1)
    else:
        cut_idx = np.flatnonzero(scores > theta)
    cuts = [int(i) + 1 for i in cut_idx]
    return SegmentationResult(_build_segments(frames, cuts), theta, iterations, capped)


def segment_moment(frames: FrameSequence, cfg: SegmentationConfig) -> SegmentationResult:
    if len(frames) == 0:
        raise ValueError(f"{frames.key}: empty frame sequence")
    if cfg.analysis_fps:
        ts = frames.timestamps
        frames = sample_frames(frames, {"kind": "fps", "value": cfg.analysis_fps}, ts[0], ts[-1])
    images = [f.load() for f in frames]
    return segment_scores(list(frames), adjacent_scores(images), cfg)
