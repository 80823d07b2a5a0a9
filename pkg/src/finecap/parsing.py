"""Parsers for the structured replies the prompt templates ask for."""
from __future__ import annotations

import re
from typing import Optional


class ParseError(ValueError):
    pass


_FENCE = re.compile(r"^\s*```[\w-]*\s*$", re.M)
_NUMBERED = re.compile(r"^\s*(?:[-*•]\s*)?\(?(\d+)[.):]\s*(.+?)\s*$")
_BULLET = re.compile(r"^\s*[-*•]\s+(.+?)\s*$")


def strip_fences(text: str) -> str:
    return _FENCE.sub("", text)


def _clean_item(item: str) -> str:
    item = item.strip()
    if len(item) >= 2 and item[0] == item[-1] and item[0] in "\"'":
        item = item[1:-1].strip()
    return item


def parse_numbered(text: str) -> list[str]:
    """Items of a numbered list, in emission order.

    Tolerates code fences, leading bullets and ``1)``/``1:`` styles. Falls
    back to plain bullet items when no numbered line is present.
    """
    lines = strip_fences(text).splitlines()
    items = [_clean_item(m.group(2)) for m in map(_NUMBERED.match, lines) if m]
    if not items:
        items = [_clean_item(m.group(1)) for m in map(_BULLET.match, lines) if m]
    return [i for i in items if i]


_SECTION = re.compile(r"\b(FG|BG|FULL)\s*:\s*(.*?)(?=\s*(?:\|\s*)?\b(?:FG|BG|FULL)\s*:|\Z)",
                      re.S | re.I)


def parse_sections(text: str) -> dict[str, str]:
    """Parse ``FG: .. | BG: .. | FULL: ..`` (pipes or newlines between labels)."""
    out: dict[str, str] = {}
    for label, body in _SECTION.findall(strip_fences(text)):
        body = body.strip().strip("|").strip()
        if body and label.upper() not in out:
            out[label.upper()] = body
    return out


_ANSWER = re.compile(r"^\s*A(\d+)\s*[:.)]\s*(.*?)\s*$", re.I)
_DESCRIPTION = re.compile(r"^\s*DESCRIPTION\s*:\s*(.*)$", re.I | re.S | re.M)


def parse_answers(text: str, n: int) -> tuple[list[Optional[str]], Optional[str]]:
    """Positional answers ``A1..An`` and the trailing description.

    Missing answer slots come back as ``None``.
    """
    text = strip_fences(text)
    desc = None
    m = _DESCRIPTION.search(text)
    if m:
        desc = " ".join(m.group(1).split()) or None
        text = text[:m.start()]
    answers: list[Optional[str]] = [None] * n
    current = None
    for line in text.splitlines():
        am = _ANSWER.match(line)
        if am:
            k = int(am.group(1))
            current = k if 1 <= k <= n else None
            if current is not None and answers[k - 1] is None:
                answers[k - 1] = am.group(2)
            continue
        # continuation lines extend the previous answer
        if current is not None and line.strip() and answers[current - 1] is not None:
            answers[current - 1] = f"{answers[current - 1]} {line.strip()}"
    answers = [a.strip() if a and a.strip() else None for a in answers]
    return answers, desc


_HEADINGS = ("POSITIVE", "STATIC", "DYNAMIC")


def parse_headed_lists(text: str) -> dict[str, list[str]]:
    """Split a reply into ``POSITIVE:``/``STATIC:``/``DYNAMIC:`` numbered lists."""
    pattern = re.compile(r"^\s*(?:#+\s*)?\**(POSITIVE|STATIC|DYNAMIC)\**\s*:?\s*(.*)$", re.I)
    out: dict[str, list[str]] = {h: [] for h in _HEADINGS}
    current = None
    buf: dict[str, list[str]] = {h: [] for h in _HEADINGS}
    for line in strip_fences(text).splitlines():
        m = pattern.match(line)
        if m and not _NUMBERED.match(line):
            current = m.group(1).upper()
            if m.group(2).strip():
                buf[current].append(m.group(2))
            continue
        if current is not None:
            buf[current].append(line)
    for h in _HEADINGS:
        out[h] = parse_numbered("\n".join(buf[h]))
    return out


def normalize_caption(text: str) -> str:
    """Lowercase, collapse whitespace and strip terminal punctuation."""
    text = " ".join(text.lower().split())
    return text.rstrip(".!?;:,。 ").strip()
