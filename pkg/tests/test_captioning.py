import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import Scripted
from finecap.backends import ChatClient, MockChatBackend
from finecap.dynamics import DynamicsBundle, answer_and_describe, caption_dynamics
from finecap.frames import FRAME_POLICIES, Frame, FrameSequence, policy_count, sample_frames
from finecap.generation import request_list
from finecap.parsing import (ParseError, normalize_caption, parse_answers, parse_headed_lists,
                             parse_numbered, parse_sections)
from finecap.prompts import render
from finecap.statics import FrameDescription, caption_statics, describe_keyframe

IMG = np.zeros((4, 4, 3), np.uint8)


def _frames(n, step=0.125):
    return FrameSequence("k", tuple(Frame(i * step, IMG) for i in range(n)))


def test_parse_numbered_variants():
    text = "```\n1. first\n2) \"second\"\n 3: third\nnoise\n```"
    assert parse_numbered(text) == ["first", "second", "third"]
    assert parse_numbered("- a\n* b") == ["a", "b"]
    assert parse_numbered("no list here") == []


def test_parse_sections_pipes_and_lines():
    assert parse_sections("FG: a man | BG: a room | FULL: a man in a room") == \
        {"FG": "a man", "BG": "a room", "FULL": "a man in a room"}
    assert parse_sections("fg: x\nbg: y\nFULL: z") == {"FG": "x", "BG": "y", "FULL": "z"}
    assert "BG" not in parse_sections("FG: x | FULL: z")


def test_parse_answers_positional():
    answers, desc = parse_answers("A1: yes\nA3: left\n  then right\nDESCRIPTION: it moves", 3)
    assert answers == ["yes", None, "left then right"]
    assert desc == "it moves"
    assert parse_answers("A1: x", 1) == (["x"], None)


def test_parse_headed_lists():
    text = "POSITIVE:\n1. p1\n2. p2\n**STATIC**:\n1. s1\nDYNAMIC: 1. d1\n2. d2"
    assert parse_headed_lists(text) == {"POSITIVE": ["p1", "p2"], "STATIC": ["s1"],
                                        "DYNAMIC": ["d1", "d2"]}


@given(st.text())
def test_normalize_caption_idempotent(s):
    assert normalize_caption(normalize_caption(s)) == normalize_caption(s)


def test_request_list_truncates_and_flags():
    prompt = render("generate_questions", q="a dog runs", n=3)
    b = Scripted("1. a\n2. b\n3. c\n4. d\n5. e", "1. a\n2. b\n3. c\n4. d")
    res = request_list(ChatClient({"llm": b}), "llm", prompt, 3)
    assert res.items == ("a", "b", "c") and res.reprompted and not res.undercount
    b = Scripted("1. a", "1. x\n2. y")
    res = request_list(ChatClient({"llm": b}), "llm", prompt, 3)
    assert res.items == ("x", "y") and res.undercount
    assert "exactly 3 numbered items" in b.prompts[1][1]
    b = Scripted("1. a\n2. b\n3. c")
    assert not request_list(ChatClient({"llm": b}), "llm", prompt, 3).reprompted


def test_describe_keyframe_strict_reprompt():
    b = Scripted("FG: a man", "FG: a man | BG: a room | FULL: a man in a room")
    d = describe_keyframe(ChatClient({"image_lmm": b}), Frame(1.5, IMG), "a man waits")
    assert d == FrameDescription("a man", "a room", "a man in a room", 1.5)
    assert "previous reply could not be parsed" in b.prompts[1][1]
    b = Scripted("nothing", "still nothing")
    with pytest.raises(ParseError):
        describe_keyframe(ChatClient({"image_lmm": b}), Frame(1.5, IMG), "a man waits")


def test_caption_statics_with_bundled_mock():
    mock = MockChatBackend.from_file()
    client = ChatClient({"llm": mock, "image_lmm": mock})
    frames = [Frame(1.0, IMG), Frame(3.0, IMG)]
    descs, res = caption_statics(client, frames, "a woman reads a book", n=3)
    assert [d.timestamp for d in descs] == [1.0, 3.0]
    assert len(res.items) == 3 and all(i.startswith("a woman reads a book") for i in res.items)
    rewrite = [u for r, u in ((r, q.user) for r, q in mock.calls) if "rewrite-statics" in u][0]
    assert rewrite.index("t=1.00s") < rewrite.index("t=3.00s")


def test_answer_and_describe_single_call_and_reprompt():
    qs = ["q1?", "q2?"]
    b = Scripted("A1: yes\nDESCRIPTION: d", "A1: yes\nA2: no\nDESCRIPTION: it moves")
    bundle = answer_and_describe(ChatClient({"video_lmm": b}), _frames(3), qs, "x")
    assert [p.answer for p in bundle.pairs] == ["yes", "no"]
    assert "missing A2" in b.prompts[1][1]
    b = Scripted("A1: yes", "A1: yes")
    with pytest.raises(ParseError):
        answer_and_describe(ChatClient({"video_lmm": b}), _frames(3), qs, "x")
    with pytest.raises(ValueError):
        answer_and_describe(ChatClient({"video_lmm": b}), FrameSequence("k", ()), qs, "x")


def test_caption_dynamics_with_bundled_mock():
    mock = MockChatBackend.from_file()
    client = ChatClient({"llm": mock, "video_lmm": mock})
    bundle, res = caption_dynamics(client, _frames(10), "a boy jumps", n_qa=5, n=3)
    assert len(bundle.pairs) == 5 and bundle.description and not bundle.undercount
    assert len(res.items) == 3
    assert sum(r == "video_lmm" for r, _ in mock.calls) == 1
    assert DynamicsBundle.from_dict(bundle.to_dict()) == bundle


@pytest.mark.parametrize("duration,n_avail,want", [
    (2.0, 100, 17), (0.5, 100, 5), (2.0, 10, 10), (30.0, 1000, 241),
])
def test_fps8_policy(duration, n_avail, want):
    seq = FrameSequence("k", tuple(Frame(i * duration / max(n_avail - 1, 1), IMG)
                                   for i in range(n_avail)))
    assert len(sample_frames(seq, "fps8", 0.0, duration)) == want


def test_uniform64_policy():
    seq = _frames(500, 0.5)
    out = sample_frames(seq, "uniform64", 0.0, 250.0)
    assert len(out) == 64
    assert out.frames[0].timestamp == 0.0 and out.frames[-1].timestamp == seq.frames[-1].timestamp
    assert len(sample_frames(_frames(10), "uniform64", 0, 1)) == 10
    assert policy_count(FRAME_POLICIES["uniform64"], 999.0) == 64
