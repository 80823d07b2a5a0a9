"""Shared helpers for prompting a backend for a numbered list of items."""
from __future__ import annotations

import logging
from dataclasses import dataclass

from .backends import ChatClient, ChatRequest
from .parsing import parse_numbered
from .prompts import Prompt, render

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ListResult:
    items: tuple[str, ...]
    # fewer items than requested survived the re-prompt
    undercount: bool = False
    reprompted: bool = False


def request_list(client: ChatClient, role: str, prompt: Prompt, n: int, *, seed: int = 0,
                 temperature: float = 0.0, **attachments) -> ListResult:
    """Ask for ``n`` numbered items; re-prompt once on a wrong count.

    Surplus items are truncated. A shortfall after the re-prompt is accepted
    and flagged rather than padded.
    """
    req = ChatRequest(user=prompt.user, system=prompt.system, seed=seed,
                      temperature=temperature, **attachments)
    items = parse_numbered(client.chat(role, req).text)
    reprompted = False
    if len(items) != n:
        reprompted = True
        retry = render("reprompt_count", previous=prompt.user, n=n)
        req2 = ChatRequest(user=retry.user, system=prompt.system, seed=seed,
                           temperature=temperature, **attachments)
        second = parse_numbered(client.chat(role, req2).text)
        logger.info("%s: %d items for n=%d, re-prompt gave %d", prompt.stage, len(items), n,
                    len(second))
        if len(second) >= len(items):
            items = second
    items = items[:n]
    return ListResult(tuple(items), undercount=len(items) < n, reprompted=reprompted)
