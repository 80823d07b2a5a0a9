"""Disturbed caption generation and hard-example selection for evaluator training."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .backends import ChatClient, ChatRequest, Embedder, semantic_distance
from .generation import request_list
from .parsing import normalize_caption, parse_headed_lists
from .prompts import render
from .records import DisturbedSet, MomentRecord

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Disturbed:
    positives: tuple[str, ...]
    static_negs: tuple[str, ...]
    dynamic_negs: tuple[str, ...]
    flags: tuple[str, ...] = ()


@dataclass(frozen=True)
class SkipRecord:
    key: str
    error: str


def _drop_copies(q: str, negs: Sequence[str]) -> tuple[tuple[str, ...], bool]:
    target = normalize_caption(q)
    kept = tuple(n for n in negs if normalize_caption(n) != target)
    return kept, len(kept) != len(negs)


def generate_disturbed(client: ChatClient, q: str, n_pos: int = 3, n_neg: int = 3, *,
                       single_call: bool = False, seed: int = 0,
                       temperature: float = 0.0) -> Disturbed:
    if not q.strip():
        raise ValueError("coarse caption must be non-empty")
    flags = []
    if single_call:
        prompt = render("disturb_all", q=q, n_pos=n_pos, n_neg=n_neg)
        reply = client.chat("llm", ChatRequest(user=prompt.user, system=prompt.system,
                                               seed=seed, temperature=temperature)).text
        lists = parse_headed_lists(reply)
        pos = tuple(lists["POSITIVE"][:n_pos])
        s_neg = tuple(lists["STATIC"][:n_neg])
        d_neg = tuple(lists["DYNAMIC"][:n_neg])
        for name, got, want in (("positive", pos, n_pos), ("static", s_neg, n_neg),
                                ("dynamic", d_neg, n_neg)):
            if len(got) < want:
                flags.append(f"{name}-undercount")
    else:
        results = {}
        for name, stage, n in (("positive", "disturb_positive", n_pos),
                               ("static", "disturb_static", n_neg),
                               ("dynamic", "disturb_dynamic", n_neg)):
            res = request_list(client, "llm", render(stage, q=q, n=n), n, seed=seed,
                               temperature=temperature)
            if res.undercount:
                flags.append(f"{name}-undercount")
            results[name] = res.items
        pos, s_neg, d_neg = results["positive"], results["static"], results["dynamic"]
    s_neg, dropped_s = _drop_copies(q, s_neg)
    d_neg, dropped_d = _drop_copies(q, d_neg)
    if dropped_s:
        flags.append("static-copy-dropped")
    if dropped_d:
        flags.append("dynamic-copy-dropped")
    return Disturbed(pos, s_neg, d_neg, tuple(flags))


def _argmin(values) -> int:
    # np.argmin/argmax return the first occurrence, which is the tie rule we want
    return int(np.argmin(np.asarray(values)))


def _argmax(values) -> int:
    return int(np.argmax(np.asarray(values)))


def select_best(q: str, positives: Sequence[str], static_negs: Sequence[str],
                dynamic_negs: Sequence[str], embedder: Embedder) -> tuple[str, str, str]:
    """Closest positive and farthest static/dynamic negatives to ``q``.

    All texts go through a single embed call, so ``q`` is embedded once.
    """
    for name, lst in (("positives", positives), ("static_negs", static_negs),
                      ("dynamic_negs", dynamic_negs)):
        if not lst:
            raise ValueError(f"{name} is empty")
    texts = [q, *positives, *static_negs, *dynamic_negs]
    vecs = embedder.embed(texts)
    qv = vecs[0]
    dist = [semantic_distance(v, qv) for v in vecs[1:]]
    a, b = len(positives), len(positives) + len(static_negs)
    return (positives[_argmin(dist[:a])], static_negs[_argmax(dist[a:b])],
            dynamic_negs[_argmax(dist[b:])])


def disturb_moment(client: ChatClient, embedder: Embedder, moment: MomentRecord,
                   n_pos: int = 3, n_neg: int = 3, *, single_call: bool = False,
                   seed: int = 0, temperature: float = 0.0) -> DisturbedSet:
    dist = generate_disturbed(client, moment.q, n_pos, n_neg, single_call=single_call,
                              seed=seed, temperature=temperature)
    best = select_best(moment.q, dist.positives, dist.static_negs, dist.dynamic_negs, embedder)
    return DisturbedSet(moment, dist.positives, dist.static_negs, dist.dynamic_negs,
                        *best, flags=dist.flags)


def build_training_corpus(moments: Sequence[MomentRecord], client: ChatClient,
                          embedder: Embedder, n_pos: int = 3, n_neg: int = 3, *,
                          single_call: bool = False, seed: int = 0, temperature: float = 0.0,
                          map_fn: Optional[Callable] = None
                          ) -> tuple[list[DisturbedSet], list[SkipRecord]]:
    """One :class:`DisturbedSet` per moment; failing moments become skip records.

    ``map_fn(fn, items)`` may run the per-moment work in parallel; it must
    return results in input order.
    """
    def work(m: MomentRecord):
        try:
            return disturb_moment(client, embedder, m, n_pos, n_neg, single_call=single_call,
                                  seed=seed, temperature=temperature)
        except Exception as exc:
            logger.warning("moment %s skipped: %s", m.key, exc)
            return SkipRecord(m.key, f"{type(exc).__name__}: {exc}")

    results = list((map_fn or map)(work, moments))
    sets = [r for r in results if isinstance(r, DisturbedSet)]
    skips = [r for r in results if isinstance(r, SkipRecord)]
    return sets, skips
