"""Dynamic-detail captioning through video question answering."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

from .backends import ChatClient, ChatRequest
from .frames import FrameSequence
from .generation import ListResult, request_list
from .parsing import ParseError, parse_answers
from .prompts import render

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class VqaPair:
    question: str
    answer: str

    def __post_init__(self):
        if not self.question.strip() or not self.answer.strip():
            raise ValueError("question and answer must be non-empty")


@dataclass(frozen=True)
class DynamicsBundle:
    pairs: tuple[VqaPair, ...]
    description: str
    undercount: bool = False

    def to_dict(self) -> dict:
        d = {"pairs": [{"question": p.question, "answer": p.answer} for p in self.pairs],
             "description": self.description}
        if self.undercount:
            d["undercount"] = True
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DynamicsBundle":
        return cls(tuple(VqaPair(p["question"], p["answer"]) for p in d["pairs"]),
                   d["description"], d.get("undercount", False))


def generate_questions(client: ChatClient, q: str, n: int = 5, *, seed: int = 0,
                       temperature: float = 0.0) -> ListResult:
    if not q.strip():
        raise ValueError("coarse caption must be non-empty")
    if n < 1:
        raise ValueError("n must be >= 1")
    prompt = render("generate_questions", q=q, n=n)
    return request_list(client, "llm", prompt, n, seed=seed, temperature=temperature)


def answer_and_describe(client: ChatClient, frames: FrameSequence, questions: Sequence[str],
                        q: str, *, seed: int = 0, temperature: float = 0.0) -> DynamicsBundle:
    """One video-LMM call answering every question, then describing the dynamics."""
    if frames is None or len(frames) == 0:
        raise ValueError("answer_and_describe needs a non-empty frame sequence")
    if not questions:
        raise ValueError("need at least one question")
    n = len(questions)
    listing = "\n".join(f"Q{i}: {qq}" for i, qq in enumerate(questions, 1))
    prompt = render("answer_and_describe", q=q, questions=listing, n=n)
    user = prompt.user
    for attempt in range(2):
        reply = client.chat("video_lmm", ChatRequest(
            user=user, system=prompt.system, frames=frames, seed=seed,
            temperature=temperature)).text
        answers, desc = parse_answers(reply, n)
        missing = [f"A{i}" for i, a in enumerate(answers, 1) if a is None]
        if not desc:
            missing.append("DESCRIPTION")
        if not missing:
            pairs = tuple(VqaPair(qq, a) for qq, a in zip(questions, answers))
            return DynamicsBundle(pairs, desc)
        logger.warning("%s: video LMM reply lacks %s", frames.key, ", ".join(missing))
        user = (f"{prompt.user}\nYour previous reply was missing {', '.join(missing)}. "
                f"Give every labelled answer A1 to A{n} and the DESCRIPTION line.")
    raise ParseError(f"{frames.key}: video LMM reply lacks {', '.join(missing)}")


def rewrite_dynamics(client: ChatClient, bundle: DynamicsBundle, q: str, n: int = 3, *,
                     seed: int = 0, temperature: float = 0.0) -> ListResult:
    if n < 1:
        raise ValueError("n must be >= 1")
    qa = "\n".join(f"Q{i}: {p.question}\nA{i}: {p.answer}" for i, p in enumerate(bundle.pairs, 1))
    prompt = render("rewrite_dynamics", q=q, qa=qa, description=bundle.description, n=n)
    return request_list(client, "llm", prompt, n, seed=seed, temperature=temperature)


def caption_dynamics(client: ChatClient, frames: FrameSequence, q: str, n_qa: int = 5,
                     n: int = 3, *, seed: int = 0, temperature: float = 0.0
                     ) -> tuple[DynamicsBundle, ListResult]:
    questions = generate_questions(client, q, n_qa, seed=seed, temperature=temperature)
    if not questions.items:
        raise ParseError("question generation produced no questions")
    bundle = answer_and_describe(client, frames, questions.items, q, seed=seed,
                                 temperature=temperature)
    if questions.undercount:
        bundle = DynamicsBundle(bundle.pairs, bundle.description, undercount=True)
    return bundle, rewrite_dynamics(client, bundle, q, n, seed=seed, temperature=temperature)
