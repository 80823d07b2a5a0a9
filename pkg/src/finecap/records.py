"""Domain records and their line-delimited JSON serialization.

Every stage of the pipeline reads and writes ``.jsonl`` files with one record
per line. Keys are written in alphabetical order and floats use Python's
shortest round-trip ``repr`` so that re-saving a loaded canonical file gives
back the same bytes.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Iterator, Optional, Union

SPLITS = ("train", "val", "test")
KINDS = ("static", "dynamic")


class RecordError(ValueError):
    """A record violates a type invariant."""

    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(message)
        self.field = field


class DatasetError(ValueError):
    """A dataset line could not be parsed or validated."""

    def __init__(self, path, line: int, message: str, field: Optional[str] = None):
        where = f"{path}:{line}"
        if field:
            where += f" [{field}]"
        super().__init__(f"{where}: {message}")
        self.path = str(path)
        self.line = line
        self.field = field


def _as_float(value, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise RecordError(f"{name} must be a number, got {value!r}", name)
    value = float(value)
    if not math.isfinite(value):
        raise RecordError(f"{name} must be finite", name)
    return value


def _as_str(value, name: str) -> str:
    if not isinstance(value, str):
        raise RecordError(f"{name} must be a string, got {value!r}", name)
    return value


def _check_keys(d: dict, allowed: Iterable[str], required: Iterable[str], ctx: str) -> None:
    if not isinstance(d, dict):
        raise RecordError(f"{ctx} must be an object")
    unknown = set(d) - set(allowed)
    if unknown:
        name = sorted(unknown)[0]
        raise RecordError(f"unknown field {name!r} in {ctx}", name)
    for name in required:
        if name not in d:
            raise RecordError(f"missing field {name!r} in {ctx}", name)


@dataclass(frozen=True)
class MomentRecord:
    video_id: str
    t_s: float
    t_e: float
    q: str
    split: str = "train"

    def __post_init__(self):
        _as_str(self.video_id, "video_id")
        if not self.video_id:
            raise RecordError("video_id must be non-empty", "video_id")
        object.__setattr__(self, "t_s", _as_float(self.t_s, "t_s"))
        object.__setattr__(self, "t_e", _as_float(self.t_e, "t_e"))
        if self.t_s < 0:
            raise RecordError("t_s must be >= 0", "t_s")
        if not self.t_s < self.t_e:
            raise RecordError(f"invariant t_s < t_e violated ({self.t_s} >= {self.t_e})", "t_s")
        if not _as_str(self.q, "q").strip():
            raise RecordError("q must be non-empty after trimming", "q")
        if self.split not in SPLITS:
            raise RecordError(f"split must be one of {SPLITS}, got {self.split!r}", "split")

    @property
    def span_key(self) -> str:
        """Identity of the moment itself (video and span), ignoring the caption."""
        return f"{self.video_id}|{self.t_s!r}|{self.t_e!r}"

    @property
    def key(self) -> str:
        """Unique key of this annotation; several captions may share one span."""
        digest = hashlib.sha1(self.q.encode("utf-8")).hexdigest()[:10]
        return f"{self.span_key}|{digest}"

    def to_dict(self) -> dict:
        return {"video_id": self.video_id, "t_s": self.t_s, "t_e": self.t_e,
                "q": self.q, "split": self.split}

    @classmethod
    def from_dict(cls, d: dict) -> "MomentRecord":
        _check_keys(d, ("video_id", "t_s", "t_e", "q", "split"),
                    ("video_id", "t_s", "t_e", "q"), "moment")
        return cls(video_id=_as_str(d["video_id"], "video_id"), t_s=d["t_s"], t_e=d["t_e"],
                   q=d["q"], split=d.get("split", "train"))


@dataclass(frozen=True)
class CaptionCandidate:
    text: str
    kind: str
    score: Optional[float] = None
    filtered: bool = False

    def __post_init__(self):
        if not _as_str(self.text, "text").strip():
            raise RecordError("caption text must be non-empty", "text")
        if self.kind not in KINDS:
            raise RecordError(f"kind must be one of {KINDS}, got {self.kind!r}", "kind")
        if self.score is not None:
            score = _as_float(self.score, "score")
            if not 0.0 <= score <= 1.0:
                raise RecordError(f"score must lie in [0, 1], got {score}", "score")
            object.__setattr__(self, "score", score)
        if not isinstance(self.filtered, bool):
            raise RecordError("filtered must be a boolean", "filtered")

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"text": self.text, "kind": self.kind}
        if self.score is not None:
            d["score"] = self.score
        if self.filtered:
            d["filtered"] = True
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CaptionCandidate":
        _check_keys(d, ("text", "kind", "score", "filtered"), ("text", "kind"), "candidate")
        return cls(text=d["text"], kind=d["kind"], score=d.get("score"),
                   filtered=d.get("filtered", False))


@dataclass(frozen=True)
class AnnotatedMoment:
    moment: MomentRecord
    statics: tuple[CaptionCandidate, ...] = ()
    dynamics: tuple[CaptionCandidate, ...] = ()
    selected: Optional[tuple[str, int]] = None
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "statics", tuple(self.statics))
        object.__setattr__(self, "dynamics", tuple(self.dynamics))
        object.__setattr__(self, "flags", tuple(self.flags))
        if any(c.kind != "static" for c in self.statics):
            raise RecordError("statics must all have kind=static", "statics")
        if any(c.kind != "dynamic" for c in self.dynamics):
            raise RecordError("dynamics must all have kind=dynamic", "dynamics")
        if self.selected is not None:
            kind, index = self.selected
            pool = self.statics if kind == "static" else self.dynamics if kind == "dynamic" else None
            if pool is None or isinstance(index, bool) or not isinstance(index, int) \
                    or not 0 <= index < len(pool):
                raise RecordError(f"selected {self.selected!r} does not index a candidate",
                                  "selected")
            object.__setattr__(self, "selected", (kind, index))

    def candidates(self) -> list[CaptionCandidate]:
        return [*self.statics, *self.dynamics]

    def selected_candidate(self) -> Optional[CaptionCandidate]:
        if self.selected is None:
            return None
        kind, index = self.selected
        return (self.statics if kind == "static" else self.dynamics)[index]

    def to_dict(self) -> dict:
        d = self.moment.to_dict()
        d["statics"] = [c.to_dict() for c in self.statics]
        d["dynamics"] = [c.to_dict() for c in self.dynamics]
        if self.selected is not None:
            d["selected"] = {"kind": self.selected[0], "index": self.selected[1]}
        if self.flags:
            d["flags"] = list(self.flags)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AnnotatedMoment":
        _check_keys(d, ("video_id", "t_s", "t_e", "q", "split", "statics", "dynamics",
                        "selected", "flags"),
                    ("video_id", "t_s", "t_e", "q", "statics", "dynamics"), "annotated moment")
        moment = MomentRecord.from_dict({k: d[k] for k in ("video_id", "t_s", "t_e", "q", "split")
                                         if k in d})
        selected = d.get("selected")
        if selected is not None:
            _check_keys(selected, ("kind", "index"), ("kind", "index"), "selected")
            selected = (selected["kind"], selected["index"])
        for name in ("statics", "dynamics", "flags"):
            if not isinstance(d.get(name, []), list):
                raise RecordError(f"{name} must be a list", name)
        flags = d.get("flags", [])
        for f in flags:
            _as_str(f, "flags")
        return cls(moment=moment,
                   statics=tuple(CaptionCandidate.from_dict(c) for c in d["statics"]),
                   dynamics=tuple(CaptionCandidate.from_dict(c) for c in d["dynamics"]),
                   selected=selected, flags=tuple(flags))


@dataclass(frozen=True)
class DisturbedSet:
    source: MomentRecord
    positives: tuple[str, ...]
    static_negs: tuple[str, ...]
    dynamic_negs: tuple[str, ...]
    best_pos: str
    best_static_neg: str
    best_dynamic_neg: str
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        for name in ("positives", "static_negs", "dynamic_negs", "flags"):
            value = getattr(self, name)
            if isinstance(value, str) or not all(isinstance(v, str) for v in value):
                raise RecordError(f"{name} must be a list of strings", name)
            object.__setattr__(self, name, tuple(value))
        if self.best_pos not in self.positives:
            raise RecordError("best_pos must be one of positives", "best_pos")
        if self.best_static_neg not in self.static_negs:
            raise RecordError("best_static_neg must be one of static_negs", "best_static_neg")
        if self.best_dynamic_neg not in self.dynamic_negs:
            raise RecordError("best_dynamic_neg must be one of dynamic_negs", "best_dynamic_neg")

    def to_dict(self) -> dict:
        d = {"source": self.source.to_dict(), "positives": list(self.positives),
             "static_negs": list(self.static_negs), "dynamic_negs": list(self.dynamic_negs),
             "best_pos": self.best_pos, "best_static_neg": self.best_static_neg,
             "best_dynamic_neg": self.best_dynamic_neg}
        if self.flags:
            d["flags"] = list(self.flags)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DisturbedSet":
        names = ("source", "positives", "static_negs", "dynamic_negs", "best_pos",
                 "best_static_neg", "best_dynamic_neg")
        _check_keys(d, names + ("flags",), names, "disturbed set")
        return cls(source=MomentRecord.from_dict(d["source"]), positives=d["positives"],
                   static_negs=d["static_negs"], dynamic_negs=d["dynamic_negs"],
                   best_pos=d["best_pos"], best_static_neg=d["best_static_neg"],
                   best_dynamic_neg=d["best_dynamic_neg"], flags=d.get("flags", []))


SCHEMAS = {
    "coarse": MomentRecord,
    "fig": AnnotatedMoment,
    "disturbed": DisturbedSet,
}

Record = Union[MomentRecord, AnnotatedMoment, DisturbedSet]


def dumps_line(obj: Union[dict, list]) -> str:
    """Canonical single-line JSON: sorted keys, no spaces, UTF-8 text."""
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"),
                      allow_nan=False)


def iter_jsonl(path) -> Iterator[tuple[int, dict]]:
    """Yield ``(line_number, object)`` for each non-blank line."""
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(path, lineno, f"malformed JSON: {exc.msg}") from None


def load_dataset(path, schema: str = "coarse") -> list:
    if schema not in SCHEMAS:
        raise ValueError(f"unknown schema {schema!r}; expected one of {sorted(SCHEMAS)}")
    cls = SCHEMAS[schema]
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset not found: {path}")
    records = []
    for lineno, obj in iter_jsonl(path):
        try:
            records.append(cls.from_dict(obj))
        except RecordError as exc:
            raise DatasetError(path, lineno, str(exc), exc.field) from None
        except (TypeError, KeyError, AttributeError) as exc:
            raise DatasetError(path, lineno, f"invalid record: {exc}") from None
    return records


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to ``path`` through a temp file in the same directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_jsonl(path, objects: Iterable[Union[dict, list]]) -> None:
    atomic_write_text(path, "".join(dumps_line(o) + "\n" for o in objects))


def save_dataset(records: Iterable[Record], path) -> None:
    write_jsonl(path, (r.to_dict() for r in records))
