"""Versioned prompt templates, one file per pipeline stage.

Files are ``string.Template`` texts with ``[system]`` and ``[user]`` sections
and a ``# version: N`` header line.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from string import Template


@dataclass(frozen=True)
class Prompt:
    stage: str
    version: int
    system: str
    user: str


@lru_cache(maxsize=None)
def _load(stage: str) -> tuple[int, str, str]:
    try:
        text = resources.files(__name__).joinpath(f"{stage}.txt").read_text("utf-8")
    except FileNotFoundError:
        raise KeyError(f"no prompt template for stage {stage!r}") from None
    m = re.match(r"#\s*version:\s*(\d+)\s*\n", text)
    if not m:
        raise ValueError(f"prompt template {stage!r} lacks a version header")
    body = text[m.end():]
    sections = dict(re.findall(r"^\[(system|user)\]\n(.*?)(?=^\[(?:system|user)\]\n|\Z)",
                               body, re.M | re.S))
    return int(m.group(1)), sections.get("system", "").strip(), sections.get("user", "").strip()


def render(stage: str, **values) -> Prompt:
    version, system, user = _load(stage)
    values = {k: str(v) for k, v in values.items()}
    return Prompt(stage, version, Template(system).substitute(values),
                  Template(user).substitute(values))
