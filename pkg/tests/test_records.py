import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from finecap.records import (AnnotatedMoment, CaptionCandidate, DatasetError, DisturbedSet,
                             MomentRecord, RecordError, dumps_line, load_dataset, save_dataset)

texts = st.text(min_size=1, max_size=30).filter(lambda s: s.strip())
scores = st.one_of(st.none(), st.floats(0, 1, allow_nan=False))


@st.composite
def annotated(draw):
    t_s = draw(st.floats(0, 1e4, allow_nan=False))
    t_e = t_s + draw(st.floats(1e-3, 1e3, allow_nan=False))
    m = MomentRecord(draw(texts), t_s, t_e, draw(texts),
                     draw(st.sampled_from(["train", "val", "test"])))
    cand = lambda kind: st.builds(CaptionCandidate, texts, st.just(kind), scores,  # noqa: E731
                                  st.booleans())
    statics = draw(st.lists(cand("static"), max_size=3))
    dynamics = draw(st.lists(cand("dynamic"), max_size=3))
    options = [("static", i) for i in range(len(statics))] + \
              [("dynamic", i) for i in range(len(dynamics))]
    selected = draw(st.one_of(st.none(), st.sampled_from(options))) if options else None
    flags = draw(st.lists(st.sampled_from(["all-filtered", "undercount:statics"]), max_size=2,
                          unique=True))
    return AnnotatedMoment(m, statics, dynamics, selected, flags)


@settings(max_examples=100, deadline=None)
@given(st.lists(annotated(), max_size=4))
def test_fig_round_trip_is_byte_stable(tmp_path_factory, records):
    path = tmp_path_factory.mktemp("rt") / "fig.jsonl"
    save_dataset(records, path)
    first = path.read_bytes()
    loaded = load_dataset(path, "fig")
    assert loaded == records
    save_dataset(loaded, path)
    assert path.read_bytes() == first


def test_empty_list_writes_empty_file(tmp_path):
    save_dataset([], tmp_path / "x.jsonl")
    assert (tmp_path / "x.jsonl").read_bytes() == b""
    assert load_dataset(tmp_path / "x.jsonl", "fig") == []


def test_score_serialization_is_shortest_repr():
    c = CaptionCandidate("a dog", "static", 0.5)
    assert dumps_line(c.to_dict()) == '{"kind":"static","score":0.5,"text":"a dog"}'
    assert "score" not in CaptionCandidate("x", "dynamic").to_dict()


def test_bad_span_reports_line_and_field(tmp_path):
    p = tmp_path / "m.jsonl"
    good = {"video_id": "v", "t_s": 0, "t_e": 1, "q": "x"}
    bad = dict(good, t_s=3, t_e=3)
    p.write_text(json.dumps(good) + "\n\n" + json.dumps(bad) + "\n")
    with pytest.raises(DatasetError) as err:
        load_dataset(p, "coarse")
    assert err.value.line == 3
    assert err.value.field == "t_s"
    assert "t_s < t_e" in str(err.value)


@pytest.mark.parametrize("change,field", [
    ({"q": "   "}, "q"), ({"t_s": -1}, "t_s"), ({"t_e": "5"}, "t_e"), ({"split": "dev"}, "split"),
    ({"extra": 1}, "extra"),
])
def test_moment_validation(change, field):
    d = dict({"video_id": "v", "t_s": 0.0, "t_e": 1.0, "q": "x"}, **change)
    with pytest.raises(RecordError) as err:
        MomentRecord.from_dict(d)
    assert err.value.field == field


def test_malformed_json_line(tmp_path):
    p = tmp_path / "m.jsonl"
    p.write_text('{"video_id": "v"\n')
    with pytest.raises(DatasetError, match=":1"):
        load_dataset(p)


def test_selected_must_point_at_a_candidate():
    m = MomentRecord("v", 0, 1, "q")
    with pytest.raises(RecordError):
        AnnotatedMoment(m, [CaptionCandidate("a", "static")], [], ("dynamic", 0))
    with pytest.raises(RecordError):
        AnnotatedMoment(m, [CaptionCandidate("a", "dynamic")])


def test_keys_separate_captions_of_one_span():
    a = MomentRecord("v", 1.0, 2.0, "a man runs")
    b = MomentRecord("v", 1.0, 2.0, "a man walks")
    assert a.span_key == b.span_key
    assert a.key != b.key


def test_disturbed_set_round_trip(tmp_path):
    d = DisturbedSet(MomentRecord("v", 0, 1, "q"), ["p1", "p2"], ["s"], ["d"], "p2", "s", "d",
                     ["dropped-copy"])
    save_dataset([d], tmp_path / "d.jsonl")
    assert load_dataset(tmp_path / "d.jsonl", "disturbed") == [d]
    with pytest.raises(RecordError):
        DisturbedSet(d.source, ["p"], ["s"], ["d"], "zzz", "s", "d")


def test_unicode_kept_verbatim(tmp_path):
    m = MomentRecord("v", 0, 1, "un café à Paris")
    save_dataset([m], tmp_path / "u.jsonl")
    assert "café" in (tmp_path / "u.jsonl").read_text(encoding="utf-8")
