"""Static-detail captioning: per-key-frame descriptions, then LLM rewriting."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

from .backends import ChatClient, ChatRequest
from .frames import Frame
from .generation import ListResult, request_list
from .parsing import ParseError, parse_sections
from .prompts import render

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FrameDescription:
    foreground: str
    background: str
    full: str
    timestamp: float

    def __post_init__(self):
        if not (self.foreground.strip() and self.background.strip() and self.full.strip()):
            raise ValueError("frame description sections must be non-empty")

    def to_dict(self) -> dict:
        return {"foreground": self.foreground, "background": self.background,
                "full": self.full, "timestamp": self.timestamp}

    @classmethod
    def from_dict(cls, d: dict) -> "FrameDescription":
        return cls(d["foreground"], d["background"], d["full"], float(d["timestamp"]))


def describe_keyframe(client: ChatClient, frame: Frame, q: str, *, seed: int = 0,
                      temperature: float = 0.0) -> FrameDescription:
    if not q.strip():
        raise ValueError("coarse caption must be non-empty")
    ts = f"{frame.timestamp:.2f}"
    for stage in ("describe_keyframe", "describe_keyframe_strict"):
        prompt = render(stage, q=q, timestamp=ts)
        reply = client.chat("image_lmm", ChatRequest(
            user=prompt.user, system=prompt.system, images=(frame.handle,), seed=seed,
            temperature=temperature)).text
        sections = parse_sections(reply)
        missing = [k for k in ("FG", "BG", "FULL") if k not in sections]
        if not missing:
            return FrameDescription(sections["FG"], sections["BG"], sections["FULL"],
                                    frame.timestamp)
        logger.warning("key frame at %ss: reply lacks %s", ts, ", ".join(missing))
    raise ParseError(f"image LMM reply for frame at {ts}s lacks section(s): {', '.join(missing)}")


def format_descriptions(descriptions: Sequence[FrameDescription]) -> str:
    return "\n".join(
        f"[t={d.timestamp:.2f}s] Foreground: {d.foreground} Background: {d.background} "
        f"Full: {d.full}" for d in descriptions)


def rewrite_statics(client: ChatClient, descriptions: Sequence[FrameDescription], q: str,
                    n: int = 3, *, seed: int = 0, temperature: float = 0.0) -> ListResult:
    if not descriptions:
        raise ValueError("need at least one frame description")
    if n < 1:
        raise ValueError("n must be >= 1")
    prompt = render("rewrite_statics", q=q, descriptions=format_descriptions(descriptions), n=n)
    return request_list(client, "llm", prompt, n, seed=seed, temperature=temperature)


def caption_statics(client: ChatClient, keyframes: Sequence[Frame], q: str, n: int = 3, *,
                    seed: int = 0, temperature: float = 0.0
                    ) -> tuple[list[FrameDescription], ListResult]:
    """Describe each key frame in order, then rewrite into ``n`` candidates."""
    descriptions = [describe_keyframe(client, f, q, seed=seed, temperature=temperature)
                    for f in keyframes]
    return descriptions, rewrite_statics(client, descriptions, q, n, seed=seed,
                                         temperature=temperature)
