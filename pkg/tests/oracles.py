"""Straight-line reference implementations used as test oracles.

Everything here is written with plain Python loops and ``math`` so that it
shares no code path with the vectorized library.
"""
from __future__ import annotations

import math


def dot(a, b):
    return sum(x * y for x, y in zip(a, b))


def matvec(W, x):
    return [dot(row, x) for row in W]


def cosine(a, b):
    return dot(a, b) / (math.sqrt(dot(a, a)) * math.sqrt(dot(b, b)))


def sim(W_v, W_t, v, t):
    return cosine(matvec(W_v, v), matvec(W_t, t))


def logit(W_v, W_t, w, b, v, t):
    pv = matvec(W_v, v)
    pt = matvec(W_t, t)
    return sum(w[k] * pv[k] * pt[k] for k in range(len(w))) + b


def log_sigmoid(x):
    # log(1 / (1 + e^-x)), stable in both directions
    if x >= 0:
        return -math.log1p(math.exp(-x))
    return x - math.log1p(math.exp(x))


def contrastive_from_sims(S_pos, S_all_texts, S_videos, tau):
    """``S_pos[i]`` = s(v_i, q_i); ``S_all_texts[i]`` = s(v_i, every text in the batch);
    ``S_videos[i]`` = s(every video, q_i)."""
    B = len(S_pos)
    total = 0.0
    for i in range(B):
        den = sum(math.exp(s / tau) for s in S_all_texts[i])
        total += S_pos[i] / tau - math.log(den)
        den = sum(math.exp(s / tau) for s in S_videos[i])
        total += S_pos[i] / tau - math.log(den)
    return -total / (2 * B)


def contrastive(W_v, W_t, v, q, s_neg, d_neg, tau):
    B = len(v)
    texts = list(q) + list(s_neg) + list(d_neg)
    S_pos = [sim(W_v, W_t, v[i], q[i]) for i in range(B)]
    S_all = [[sim(W_v, W_t, v[i], t) for t in texts] for i in range(B)]
    S_vid = [[sim(W_v, W_t, v[j], q[i]) for j in range(B)] for i in range(B)]
    return contrastive_from_sims(S_pos, S_all, S_vid, tau)


def matching_from_logits(pos, neg_text, neg_video):
    """Per item: the positive logit, logits against negative texts, logits of negative videos."""
    B = len(pos)
    total = 0.0
    for i in range(B):
        total += log_sigmoid(pos[i])
        total += sum(log_sigmoid(-c) for c in neg_text[i])
        total += sum(log_sigmoid(-c) for c in neg_video[i])
    return -total / B


def matching(W_v, W_t, w, b, v, q, s_neg, d_neg, text_idx, video_idx):
    B = len(v)
    c = lambda vv, tt: logit(W_v, W_t, w, b, vv, tt)  # noqa: E731
    pos = [c(v[i], q[i]) for i in range(B)]
    neg_t, neg_v = [], []
    for i in range(B):
        nt = [c(v[i], s_neg[i]), c(v[i], d_neg[i])]
        nv = []
        if B >= 2:
            nt.append(c(v[i], q[text_idx[i]]))
            nv.append(c(v[video_idx[i]], q[i]))
        neg_t.append(nt)
        neg_v.append(nv)
    return matching_from_logits(pos, neg_t, neg_v)


def t_iou(a, b):
    inter = max(0.0, min(a[1], b[1]) - max(a[0], b[0]))
    return inter / ((a[1] - a[0]) + (b[1] - b[0]) - inter)


def recall_bruteforce(preds, gt, task, m, k):
    hits = 0
    for qid, g in gt.items():
        ranked = preds.get(qid, [])
        if task == "vr":
            videos = []
            for p in ranked:
                if p[0] not in videos:
                    videos.append(p[0])
            hits += g[0] in videos[:k]
            continue
        if task == "svmr":
            ranked = [p for p in ranked if p[0] == g[0]]
        ok = False
        for p in ranked[:k]:
            if p[0] == g[0] and t_iou((p[1], p[2]), (g[1], g[2])) > m:
                ok = True
        hits += ok
    return hits / len(gt)


def argmin_first(values):
    best = 0
    for i in range(1, len(values)):
        if values[i] < values[best]:
            best = i
    return best


def argmax_first(values):
    best = 0
    for i in range(1, len(values)):
        if values[i] > values[best]:
            best = i
    return best
