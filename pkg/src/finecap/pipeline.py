"""File-to-file pipeline stages.

Each stage reads its inputs from the work directory, writes its outputs
atomically, and records input/config digests plus per-moment outcomes in
``manifest.json``. A stage whose digests match the manifest is skipped.
"""
from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .backends import (ChatClient, HashEmbedder, HttpChatBackend, HttpEmbedder,
                       MockChatBackend, PixelProjectionEmbedder, RefusalError, ResponseCache)
from .config import PipelineConfig
from .dynamics import caption_dynamics
from .evaluator import (TrainingBatch, load_checkpoint, pool_moment_embedding, save_checkpoint,
                        score_candidates, select_and_filter, train, write_trace)
from .frames import DirectoryFrameProvider, Frame, sample_frames, uniform_indices
from .keyframe import SegmentationConfig, segment_moment
from .manifest import Manifest, digest_obj
from .perturb import build_training_corpus
from .records import (AnnotatedMoment, CaptionCandidate, MomentRecord,
                      iter_jsonl, load_dataset, save_dataset, write_jsonl)
from .statics import caption_statics

logger = logging.getLogger("finecap.pipeline")

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_ERROR = 2

STAGES = ("keyframes", "caption-statics", "caption-dynamics", "perturb", "embed",
          "train-evaluator", "score", "select")

FILES = {
    "moments": "moments.jsonl",
    "keyframes": "keyframes.jsonl",
    "statics_raw": "statics_raw.jsonl",
    "statics_candidates": "statics_candidates.jsonl",
    "dynamics_raw": "dynamics_raw.jsonl",
    "dynamics_candidates": "dynamics_candidates.jsonl",
    "disturbed": "disturbed.jsonl",
    "embeddings": "embeddings.jsonl",
    "checkpoint": "evaluator.ckpt",
    "trace": "loss_trace.csv",
    "scored": "scored.jsonl",
    "fig": "fig.jsonl",
    "manifest": "manifest.json",
}


class StageInputError(FileNotFoundError):
    pass


def log_event(stage: str, moment: str, event: str, **fields) -> None:
    extra = "".join(f" {k}={v}" for k, v in fields.items())
    logger.info("stage=%s moment=%s event=%s%s", stage, moment, event, extra)


@dataclass
class Context:
    cfg: PipelineConfig
    workdir: Path
    mock: bool = False
    force: bool = False
    frames_dir: Optional[Path] = None
    moments_path: Optional[Path] = None
    _client: Optional[ChatClient] = field(default=None, repr=False)
    _embedder: object = field(default=None, repr=False)

    def __post_init__(self):
        self.workdir = Path(self.workdir)
        self.frames_dir = Path(self.frames_dir) if self.frames_dir else self.workdir / "frames"
        self.moments_path = (Path(self.moments_path) if self.moments_path
                             else self.workdir / FILES["moments"])

    def path(self, name: str) -> Path:
        if name == "moments":
            return self.moments_path
        if name == "frames":
            return self.frames_dir
        return self.workdir / FILES[name]

    @property
    def cache(self) -> ResponseCache:
        root = self.cfg.cache_dir or (self.workdir / ".cache")
        return ResponseCache(root)

    @property
    def client(self) -> ChatClient:
        if self._client is None:
            b = self.cfg.backends
            if self.mock:
                mock = MockChatBackend.from_file(b.mock_rules)
                backends = {role: mock for role in ("llm", "image_lmm", "video_lmm")}
            else:
                backends = {role: HttpChatBackend(getattr(b, role))
                            for role in ("llm", "image_lmm", "video_lmm")}
            self._client = ChatClient(backends, self.cache)
        return self._client

    @property
    def embedder(self):
        if self._embedder is None:
            e = self.cfg.backends.embedder
            if self.mock:
                self._embedder = HashEmbedder(e.dim, self.cfg.seed, cache=self.cache)
            else:
                self._embedder = HttpEmbedder(e, e.dim, cache=self.cache)
        return self._embedder

    def temperature(self, role: str) -> float:
        return 0.0 if self.mock else getattr(self.cfg.backends, role).temperature

    def config_digest(self, stage: str) -> str:
        return digest_obj({"stage": stage, "config": self.cfg.model_dump(mode="json"),
                           "mock": self.mock, "frames": str(self.frames_dir)})

    def parallel_map(self, fn: Callable, items, workers: int) -> list:
        """Ordered map over items; exceptions are returned in place of results."""
        def safe(item):
            try:
                return fn(item)
            except Exception as exc:
                return exc
        items = list(items)
        if workers <= 1 or len(items) <= 1:
            return [safe(i) for i in items]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(safe, items))


def _require(ctx: Context, *names: str) -> None:
    for name in names:
        p = ctx.path(name)
        if not p.exists():
            raise StageInputError(f"missing input for stage: {p}")


def _keyed(path) -> dict:
    return {obj["key"]: obj for _, obj in iter_jsonl(path)}


def _outcomes(moments, results) -> tuple[dict, int]:
    status = {}
    for m, r in zip(moments, results):
        status[m.key] = "ok" if not isinstance(r, BaseException) else f"{type(r).__name__}: {r}"
    failed = sum(1 for v in status.values() if v != "ok")
    return status, failed


# stage implementations: each returns (outputs, per-moment status)

def stage_keyframes(ctx: Context):
    _require(ctx, "moments", "frames")
    moments = load_dataset(ctx.path("moments"), "coarse")
    provider = DirectoryFrameProvider(ctx.path("frames"))
    kcfg = ctx.cfg.keyframe
    seg_cfg = SegmentationConfig(L=kcfg.L, initial_threshold=kcfg.initial_threshold,
                                 threshold_min=kcfg.threshold_min,
                                 threshold_max=kcfg.threshold_max,
                                 max_iterations=kcfg.max_iterations,
                                 analysis_fps=kcfg.analysis_fps)

    def work(m: MomentRecord):
        seq = provider.frames(m.video_id, m.t_s, m.t_e, m.key)
        res = segment_moment(seq, seg_cfg)
        log_event("keyframes", m.key, "segmented", segments=len(res.segments),
                  threshold=round(res.threshold, 4))
        return {"key": m.key, "threshold": res.threshold, "iterations": res.iterations,
                "capped": res.capped,
                "segments": [{"start": s.start, "end": s.end, "timestamp": s.mid.timestamp,
                              "frame": Path(s.mid.handle).relative_to(ctx.path("frames")).as_posix()}
                             for s in res.segments]}

    results = ctx.parallel_map(work, moments, ctx.cfg.workers)
    status, _ = _outcomes(moments, results)
    write_jsonl(ctx.path("keyframes"), [r for r in results if isinstance(r, dict)])
    return ["moments", "frames"], ["keyframes"], status


def stage_caption_statics(ctx: Context):
    _require(ctx, "moments", "keyframes", "frames")
    moments = load_dataset(ctx.path("moments"), "coarse")
    keyframes = _keyed(ctx.path("keyframes"))
    n_s = ctx.cfg.statics.N_s

    def work(m: MomentRecord):
        if m.key not in keyframes:
            raise LookupError("no key frames for this moment")
        frames = [Frame(s["timestamp"], ctx.path("frames") / s["frame"])
                  for s in keyframes[m.key]["segments"]]
        descs, cands = caption_statics(ctx.client, frames, m.q, n_s, seed=ctx.cfg.seed,
                                       temperature=ctx.temperature("llm"))
        log_event("caption-statics", m.key, "captioned", candidates=len(cands.items),
                  undercount=cands.undercount)
        flags = ["statics-undercount"] if cands.undercount else []
        return ({"key": m.key, "descriptions": [d.to_dict() for d in descs]},
                {"key": m.key, "candidates": list(cands.items), "flags": flags})

    results = ctx.parallel_map(work, moments, ctx.cfg.workers_for("statics"))
    status, _ = _outcomes(moments, results)
    ok = [r for r in results if isinstance(r, tuple)]
    write_jsonl(ctx.path("statics_raw"), [r[0] for r in ok])
    write_jsonl(ctx.path("statics_candidates"), [r[1] for r in ok])
    return ["moments", "keyframes"], ["statics_raw", "statics_candidates"], status


def stage_caption_dynamics(ctx: Context):
    _require(ctx, "moments", "frames")
    moments = load_dataset(ctx.path("moments"), "coarse")
    provider = DirectoryFrameProvider(ctx.path("frames"))
    dcfg = ctx.cfg.dynamics

    def work(m: MomentRecord):
        seq = sample_frames(provider.frames(m.video_id, m.t_s, m.t_e, m.key),
                            dcfg.frame_policy, m.t_s, m.t_e)
        try:
            bundle, cands = caption_dynamics(ctx.client, seq, m.q, dcfg.N_qa, dcfg.N_d,
                                             seed=ctx.cfg.seed,
                                             temperature=ctx.temperature("video_lmm"))
        except RefusalError as exc:
            log_event("caption-dynamics", m.key, "refused", detail=str(exc))
            return ({"key": m.key, "failed": "refused"},
                    {"key": m.key, "candidates": [], "flags": ["dynamics-failed"]})
        flags = ["dynamics-undercount"] if cands.undercount or bundle.undercount else []
        log_event("caption-dynamics", m.key, "captioned", frames=len(seq),
                  candidates=len(cands.items))
        return ({"key": m.key, "bundle": bundle.to_dict(), "frames": len(seq)},
                {"key": m.key, "candidates": list(cands.items), "flags": flags})

    results = ctx.parallel_map(work, moments, ctx.cfg.workers_for("dynamics"))
    status, _ = _outcomes(moments, results)
    ok = [r for r in results if isinstance(r, tuple)]
    write_jsonl(ctx.path("dynamics_raw"), [r[0] for r in ok])
    write_jsonl(ctx.path("dynamics_candidates"), [r[1] for r in ok])
    return ["moments", "frames"], ["dynamics_raw", "dynamics_candidates"], status


def stage_perturb(ctx: Context):
    _require(ctx, "moments")
    moments = load_dataset(ctx.path("moments"), "coarse")
    p = ctx.cfg.perturb
    workers = ctx.cfg.workers_for("perturb")

    def map_fn(fn, items):
        return ctx.parallel_map(fn, items, workers)

    sets, skips = build_training_corpus(moments, ctx.client, ctx.embedder, p.N_pos, p.N_neg,
                                        single_call=p.single_call, seed=ctx.cfg.seed,
                                        temperature=ctx.temperature("llm"), map_fn=map_fn)
    save_dataset(sets, ctx.path("disturbed"))
    status = {s.source.key: "ok" for s in sets}
    status.update({s.key: f"skipped: {s.error}" for s in skips})
    for s in skips:
        log_event("perturb", s.key, "skipped", error=s.error)
    return ["moments"], ["disturbed"], status


def _load_candidates(path) -> dict:
    return _keyed(path) if Path(path).exists() else {}


def moment_embedding(ctx: Context, frame_embedder, provider, m: MomentRecord) -> np.ndarray:
    seq = provider.frames(m.video_id, m.t_s, m.t_e, m.key)
    idx = uniform_indices(len(seq), ctx.cfg.evaluator.frames_per_moment)
    if not idx:
        raise LookupError("no frames inside the moment")
    return pool_moment_embedding(frame_embedder.embed_frames([seq[i].handle for i in idx]))


def stage_embed(ctx: Context):
    _require(ctx, "moments", "frames")
    moments = load_dataset(ctx.path("moments"), "coarse")
    provider = DirectoryFrameProvider(ctx.path("frames"))
    frame_embedder = PixelProjectionEmbedder(ctx.cfg.backends.embedder.dim, ctx.cfg.seed)
    texts: dict[str, None] = {}
    if ctx.path("disturbed").exists():
        for s in load_dataset(ctx.path("disturbed"), "disturbed"):
            for t in (s.source.q, s.best_pos, s.best_static_neg, s.best_dynamic_neg):
                texts[t] = None
    for name in ("statics_candidates", "dynamics_candidates"):
        for rec in _load_candidates(ctx.path(name)).values():
            for t in rec["candidates"]:
                texts[t] = None
    for m in moments:
        texts[m.q] = None

    def work(m: MomentRecord):
        return moment_embedding(ctx, frame_embedder, provider, m)

    results = ctx.parallel_map(work, moments, ctx.cfg.workers)
    status, _ = _outcomes(moments, results)
    text_list = list(texts)
    vecs = ctx.embedder.embed(text_list) if text_list else np.zeros((0, 0))
    rows = [{"kind": "moment", "key": m.key, "vector": r.tolist()}
            for m, r in zip(moments, results) if not isinstance(r, BaseException)]
    rows += [{"kind": "text", "key": t, "vector": v.tolist()} for t, v in zip(text_list, vecs)]
    write_jsonl(ctx.path("embeddings"), rows)
    log_event("embed", "*", "embedded", moments=sum(1 for r in rows if r["kind"] == "moment"),
              texts=len(text_list))
    inputs = ["moments", "frames"] + [n for n in ("disturbed", "statics_candidates",
                                                  "dynamics_candidates")
                                      if ctx.path(n).exists()]
    return inputs, ["embeddings"], status


def load_embeddings(path) -> tuple[dict, dict]:
    moments, texts = {}, {}
    for _, obj in iter_jsonl(path):
        (moments if obj["kind"] == "moment" else texts)[obj["key"]] = np.array(obj["vector"])
    return moments, texts


def stage_train_evaluator(ctx: Context):
    _require(ctx, "disturbed", "embeddings")
    sets = load_dataset(ctx.path("disturbed"), "disturbed")
    mvecs, tvecs = load_embeddings(ctx.path("embeddings"))
    usable = [s for s in sets if s.source.key in mvecs]
    train_sets = [s for s in usable if s.source.split == "train"] or usable
    if not train_sets:
        raise StageInputError("no disturbed sets with moment embeddings to train on")
    data = TrainingBatch(
        np.stack([mvecs[s.source.key] for s in train_sets]),
        np.stack([tvecs[s.source.q] for s in train_sets]),
        np.stack([tvecs[s.best_pos] for s in train_sets]),
        np.stack([tvecs[s.best_static_neg] for s in train_sets]),
        np.stack([tvecs[s.best_dynamic_neg] for s in train_sets]))
    result = train(data, ctx.cfg.evaluator)
    save_checkpoint(ctx.path("checkpoint"), result.model, ctx.cfg.evaluator)
    write_trace(ctx.path("trace"), result.trace)
    log_event("train-evaluator", "*", "trained", samples=data.size,
              final_loss=round(result.trace[-1].total, 6) if result.trace else None)
    status = {s.source.key: "ok" for s in train_sets}
    return ["disturbed", "embeddings"], ["checkpoint", "trace"], status


def stage_score(ctx: Context):
    _require(ctx, "moments", "embeddings", "checkpoint")
    moments = load_dataset(ctx.path("moments"), "coarse")
    model, _ = load_checkpoint(ctx.path("checkpoint"))
    mvecs, tvecs = load_embeddings(ctx.path("embeddings"))
    statics = _load_candidates(ctx.path("statics_candidates"))
    dynamics = _load_candidates(ctx.path("dynamics_candidates"))
    out, status = [], {}
    for m in moments:
        s_rec = statics.get(m.key, {"candidates": [], "flags": ["statics-failed"]})
        d_rec = dynamics.get(m.key, {"candidates": [], "flags": ["dynamics-failed"]})
        flags = list(dict.fromkeys(s_rec.get("flags", []) + d_rec.get("flags", [])))
        s_c = [CaptionCandidate(t, "static") for t in s_rec["candidates"]]
        d_c = [CaptionCandidate(t, "dynamic") for t in d_rec["candidates"]]
        if m.key not in mvecs:
            status[m.key] = "missing moment embedding"
            continue
        try:
            v = mvecs[m.key]
            s_c = score_candidates(model, v, s_c, [tvecs[c.text] for c in s_c])
            d_c = score_candidates(model, v, d_c, [tvecs[c.text] for c in d_c])
        except KeyError as exc:
            status[m.key] = f"missing text embedding for {exc}"
            continue
        out.append(AnnotatedMoment(m, tuple(s_c), tuple(d_c), None, tuple(flags)))
        status[m.key] = "ok"
    save_dataset(out, ctx.path("scored"))
    inputs = ["moments", "embeddings", "checkpoint"] + [
        n for n in ("statics_candidates", "dynamics_candidates") if ctx.path(n).exists()]
    return inputs, ["scored"], status


def stage_select(ctx: Context):
    _require(ctx, "scored")
    scored = load_dataset(ctx.path("scored"), "fig")
    out = [select_and_filter(a, ctx.cfg.select.threshold) for a in scored]
    save_dataset(out, ctx.path("fig"))
    status = {}
    for a in out:
        failed = "annotation-failed" in a.flags
        status[a.moment.key] = "annotation-failed" if failed else "ok"
        log_event("select", a.moment.key, "selected", choice=a.selected)
    return ["scored"], ["fig"], status


STAGE_FUNCS = {
    "keyframes": stage_keyframes,
    "caption-statics": stage_caption_statics,
    "caption-dynamics": stage_caption_dynamics,
    "perturb": stage_perturb,
    "embed": stage_embed,
    "train-evaluator": stage_train_evaluator,
    "score": stage_score,
    "select": stage_select,
}


def run_stage(stage: str, ctx: Context) -> int:
    """Run one stage with manifest bookkeeping; returns the exit code."""
    fn = STAGE_FUNCS[stage]
    manifest = Manifest(ctx.path("manifest"))
    digest = ctx.config_digest(stage)
    declared = _declared_inputs(stage, ctx)
    if not ctx.force and manifest.matches(stage, declared, digest):
        log_event(stage, "*", "manifest match", action="skip")
        return manifest.exit_code(stage)
    t0 = time.perf_counter()
    inputs, outputs, status = fn(ctx)
    failed = sum(1 for v in status.values() if v != "ok")
    code = EXIT_PARTIAL if failed else EXIT_OK
    manifest.record(stage, {n: ctx.path(n) for n in inputs}, digest,
                    {n: ctx.path(n) for n in outputs}, status, code)
    log_event(stage, "*", "done", seconds=round(time.perf_counter() - t0, 3),
              moments=len(status), failed=failed)
    return code


def _declared_inputs(stage: str, ctx: Context) -> dict:
    """Inputs recorded for ``stage`` last time (for the skip check)."""
    entry = Manifest(ctx.path("manifest")).data["stages"].get(stage, {})
    return {n: ctx.path(n) for n in entry.get("inputs", {})}


def run_pipeline(ctx: Context, stages=STAGES) -> int:
    worst = EXIT_OK
    for stage in stages:
        worst = max(worst, run_stage(stage, ctx))
    return worst
