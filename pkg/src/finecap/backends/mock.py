"""Rule-driven deterministic mock backends.

A rules file is a YAML list of ``{pattern, output, role?}`` entries. The
first rule whose regex ``pattern`` matches the user prompt (searched, with
``re.MULTILINE``) produces ``match.expand(output)``, so outputs may reference
groups as ``\\1`` or ``\\g<name>``. Two special outputs exist: ``!refuse``
raises :class:`RefusalError` and ``!error`` raises :class:`BackendError`.
Without a matching rule the mock answers with an empty string.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional

import yaml

from .base import BackendError, ChatRequest, RefusalError


@dataclass(frozen=True)
class MockRule:
    pattern: re.Pattern
    output: str
    role: Optional[str] = None

    @classmethod
    def from_dict(cls, d: dict) -> "MockRule":
        unknown = set(d) - {"pattern", "output", "role"}
        if unknown:
            raise ValueError(f"unknown mock rule keys: {sorted(unknown)}")
        return cls(re.compile(d["pattern"], re.MULTILINE | re.DOTALL), str(d["output"]),
                   d.get("role"))


def load_rules(path=None) -> list[MockRule]:
    """Load a rules file; ``None`` loads the bundled pipeline rules."""
    if path is None:
        text = resources.files("finecap.data").joinpath("mock_rules.yaml").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    raw = yaml.safe_load(text) or []
    if isinstance(raw, dict):
        raw = raw.get("rules", [])
    return [MockRule.from_dict(r) for r in raw]


class MockChatBackend:
    def __init__(self, rules: Iterable[MockRule], model: str = "mock"):
        self.rules = list(rules)
        self.model = model
        self.calls: list[tuple[str, ChatRequest]] = []

    @classmethod
    def from_file(cls, path=None, model: str = "mock") -> "MockChatBackend":
        return cls(load_rules(path), model)

    def complete(self, role: str, req: ChatRequest) -> tuple[str, int]:
        self.calls.append((role, req))
        for rule in self.rules:
            if rule.role is not None and rule.role != role:
                continue
            m = rule.pattern.search(req.user)
            if m is None:
                continue
            if rule.output == "!refuse":
                raise RefusalError(f"mock {role} refused")
            if rule.output == "!error":
                raise BackendError(f"mock {role} failure")
            return m.expand(rule.output), 1
        return "", 1
