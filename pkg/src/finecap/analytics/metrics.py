"""Recall@K at temporal IoU thresholds for corpus moment, single-video moment and video retrieval."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from ..records import DatasetError, dumps_line, iter_jsonl

logger = logging.getLogger(__name__)

TASKS = ("vcmr", "svmr", "vr")
DEFAULT_THRESHOLDS = (0.5, 0.7)
DEFAULT_KS = (1, 5, 10, 100)


@dataclass(frozen=True)
class Proposal:
    video_id: str
    t_s: float
    t_e: float
    score: float


@dataclass(frozen=True)
class GroundTruth:
    video_id: str
    t_s: float
    t_e: float


def t_iou(a: Sequence[float], b: Sequence[float]) -> float:
    a0, a1 = a
    b0, b1 = b
    if not a0 < a1 or not b0 < b1:
        raise ValueError(f"invalid span(s): {a!r}, {b!r}")
    inter = max(0.0, min(a1, b1) - max(a0, b0))
    union = (a1 - a0) + (b1 - b0) - inter
    return inter / union


def check_ranked(qid: str, ranked: Sequence[Proposal]) -> None:
    for prev, cur in zip(ranked, ranked[1:]):
        if cur.score > prev.score:
            raise ValueError(f"query {qid}: proposal scores must be non-increasing")


def _hit(ranked: Sequence[Proposal], gt: GroundTruth, task: str, m: float, k: int) -> bool:
    span = (gt.t_s, gt.t_e)
    if task == "vr":
        seen: list[str] = []
        for p in ranked:
            if p.video_id not in seen:
                seen.append(p.video_id)
                if len(seen) == k:
                    break
        return gt.video_id in seen
    if task == "svmr":
        ranked = [p for p in ranked if p.video_id == gt.video_id]
    return any(p.video_id == gt.video_id and t_iou((p.t_s, p.t_e), span) > m
               for p in ranked[:k])


def recall_at(preds: Mapping[str, Sequence[Proposal]], gt: Mapping[str, GroundTruth],
              task: str, m: float, k: int) -> float:
    """Fraction of ground-truth queries with a qualifying proposal in the top ``k``.

    A proposal qualifies when it is in the right video and its tIoU with the
    ground truth is strictly greater than ``m`` (``vr`` ignores ``m``).
    """
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}; expected one of {TASKS}")
    if k <= 0:
        raise ValueError("K must be positive")
    if task != "vr" and not 0.0 <= m <= 1.0:
        raise ValueError("tIoU threshold must lie in [0, 1]")
    if not gt:
        raise ValueError("no ground-truth queries")
    hits = 0
    missing = 0
    for qid, g in gt.items():
        ranked = preds.get(qid)
        if ranked is None:
            missing += 1
            continue
        hits += _hit(ranked, g, task, m, k)
    if missing:
        logger.warning("%d ground-truth queries have no predictions; counted as misses", missing)
    return hits / len(gt)


@dataclass(frozen=True)
class MetricRow:
    task: str
    m: float | None
    k: int
    recall: float

    @property
    def name(self) -> str:
        return f"r{self.k}" if self.m is None else f"{self.m}/r{self.k}"


def evaluate(preds, gt, tasks: Iterable[str] = TASKS,
             thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
             ks: Sequence[int] = DEFAULT_KS) -> list[MetricRow]:
    rows = []
    for task in tasks:
        for m in ((None,) if task == "vr" else thresholds):
            for k in ks:
                rows.append(MetricRow(task, m, k, recall_at(preds, gt, task, m or 0.0, k)))
    return rows


def render_report(rows: Sequence[MetricRow]) -> str:
    """Aligned text table (recall in percent)."""
    lines = []
    for task in dict.fromkeys(r.task for r in rows):
        sub = [r for r in rows if r.task == task]
        names = [r.name for r in sub]
        width = max(8, *(len(n) for n in names))
        lines.append(task.upper().ljust(6) + "".join(n.rjust(width + 1) for n in names))
        lines.append(" " * 6 + "".join(f"{100 * r.recall:.2f}".rjust(width + 1) for r in sub))
    return "\n".join(lines) + "\n"


def report_lines(rows: Sequence[MetricRow]) -> str:
    return "".join(dumps_line({"task": r.task, "m": r.m, "K": r.k, "recall": r.recall}) + "\n"
                   for r in rows)


def load_predictions(path) -> dict[str, list[Proposal]]:
    preds: dict[str, list[Proposal]] = {}
    for lineno, obj in iter_jsonl(path):
        try:
            qid = str(obj["query_id"])
            ranked = [Proposal(str(p["video_id"]), float(p["t_s"]), float(p["t_e"]),
                               float(p["score"])) for p in obj["ranked"]]
            check_ranked(qid, ranked)
        except (KeyError, TypeError, ValueError) as exc:
            raise DatasetError(path, lineno, f"bad prediction record: {exc}") from None
        if qid in preds:
            raise DatasetError(path, lineno, f"duplicate query_id {qid!r}", "query_id")
        preds[qid] = ranked
    return preds


def load_ground_truth(path) -> dict[str, GroundTruth]:
    gt: dict[str, GroundTruth] = {}
    for lineno, obj in iter_jsonl(path):
        try:
            qid = str(obj["query_id"])
            g = GroundTruth(str(obj["video_id"]), float(obj["t_s"]), float(obj["t_e"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise DatasetError(path, lineno, f"bad ground-truth record: {exc}") from None
        if not g.t_s < g.t_e:
            raise DatasetError(path, lineno, "invariant t_s < t_e violated", "t_s")
        gt[qid] = g
    return gt
