"""Caption corpus statistics and many-to-many caption counting."""
from __future__ import annotations

import logging
import re
from collections import defaultdict
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Mapping, Optional, Protocol, Sequence

from ..parsing import normalize_caption

logger = logging.getLogger(__name__)

# label written next to many-to-many counts in reports
MANY_TO_MANY_DEFINITION = "definition v1"

_TOKEN = re.compile(r"[a-z0-9]+(?:'[a-z]+)?")


def tokenize(caption: str) -> list[str]:
    """Lowercased tokens split on whitespace and punctuation."""
    return _TOKEN.findall(caption.lower())


class Tagger(Protocol):
    def tag(self, tokens: Sequence[str]) -> list[Optional[str]]:
        """One of ``"noun"``, ``"verb"``, ``"adj"`` or ``None`` per token."""
        ...


class LexiconTagger:
    """Word-list part-of-speech tagger; approximate by design."""

    def __init__(self, lexicon: Optional[Mapping[str, str]] = None):
        if lexicon is None:
            lexicon = self.bundled()
        self.lexicon = {k.lower(): v for k, v in lexicon.items()}

    @staticmethod
    def bundled() -> dict[str, str]:
        text = resources.files("finecap.data").joinpath("lexicon.txt").read_text("utf-8")
        out = {}
        for line in text.splitlines():
            if line and not line.startswith("#"):
                word, tag = line.split("\t")
                out[word] = tag
        return out

    def tag(self, tokens: Sequence[str]) -> list[Optional[str]]:
        return [self.lexicon.get(t) for t in tokens]


@dataclass(frozen=True)
class DatasetStats:
    vocab_size: int
    avg_words: float
    avg_nouns: float
    avg_verbs: float
    avg_adjs: float
    num_captions: int

    def to_dict(self) -> dict:
        return {"vocab_size": self.vocab_size, "avg_words": self.avg_words,
                "avg_nouns": self.avg_nouns, "avg_verbs": self.avg_verbs,
                "avg_adjs": self.avg_adjs, "num_captions": self.num_captions}


def compute_stats(captions: Sequence[str], tagger: Optional[Tagger] = None) -> DatasetStats:
    if not captions:
        raise ValueError("no captions to summarize")
    tagger = tagger or LexiconTagger()
    vocab: set[str] = set()
    words = nouns = verbs = adjs = 0
    used = 0
    for caption in captions:
        tokens = tokenize(caption)
        try:
            tags = tagger.tag(tokens)
        except Exception as exc:
            logger.warning("tagger failed on %r, skipping: %s", caption, exc)
            continue
        used += 1
        vocab.update(tokens)
        words += len(tokens)
        nouns += tags.count("noun")
        verbs += tags.count("verb")
        adjs += tags.count("adj")
    if used == 0:
        raise ValueError("the tagger failed on every caption")
    return DatasetStats(len(vocab), words / used, nouns / used, verbs / used, adjs / used, used)


def count_many_to_many(records: Iterable[tuple[str, str]]) -> tuple[int, int]:
    """Count normalized captions shared by two or more distinct moments.

    Returns ``(num_classes, num_instances)`` where instances counts every
    ``(caption, moment)`` record that falls in such a class.
    """
    moments: dict[str, set] = defaultdict(set)
    records_per: dict[str, int] = defaultdict(int)
    for caption, moment in records:
        key = normalize_caption(caption)
        moments[key].add(moment)
        records_per[key] += 1
    classes = [k for k, ms in moments.items() if len(ms) >= 2]
    return len(classes), sum(records_per[k] for k in classes)
