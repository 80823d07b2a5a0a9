import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from finecap.frames import DirectoryFrameProvider, Frame, save_frame
from finecap.keyframe import (SegmentationConfig, count_segments, search_threshold,
                              segment_moment, segment_scores)

score_lists = st.lists(st.floats(0, 150, allow_nan=False), max_size=40)


def _optimal_threshold(scores, L, lo, hi):
    # L-th largest score; any threshold at or above it leaves at most L-1 cuts
    ranked = sorted(scores, reverse=True)
    need = ranked[L - 1] if len(ranked) >= L else -np.inf
    return max(lo, need)


@settings(max_examples=300, deadline=None)
@given(score_lists, st.integers(1, 6))
def test_threshold_is_the_smallest_feasible(scores, L):
    theta, iterations, capped = search_threshold(scores, L, 1.0, 100.0, 20, 27.0)
    want = _optimal_threshold(scores, L, 1.0, 100.0)
    assert iterations <= 20
    if want > 100.0:
        assert capped and theta == 100.0
    else:
        assert not capped
        assert theta == want
        assert count_segments(np.array(scores), theta) <= L


def test_initial_probe_counts_as_an_iteration():
    scores = [50.0, 10.0, 5.0]
    _, it, _ = search_threshold(scores, 1, 1.0, 100.0, 1, 27.0)
    assert it == 1
    _, it, _ = search_threshold(scores, 1, 1.0, 100.0, 20, None)
    assert it == 20


def test_already_feasible_needs_no_search():
    assert search_threshold([0.5, 0.2], 1, 1.0, 100.0) == (1.0, 0, False)


def test_capped_keeps_strongest_cuts():
    frames = [Frame(float(i), None) for i in range(6)]
    scores = [150.0, 120.0, 150.0, 200.0, 110.0]
    res = segment_scores(frames, scores, SegmentationConfig(L=3))
    assert res.capped
    # strongest two: index 3 (200), then index 0 (150, earlier than index 2)
    assert [(s.start, s.end) for s in res.segments] == [(0.0, 0.5), (0.5, 3.5), (3.5, 5.0)]


def test_single_frame_gives_zero_length_segment():
    res = segment_scores([Frame(2.0, None)], [], SegmentationConfig(L=3))
    assert len(res.segments) == 1
    seg = res.segments[0]
    assert (seg.start, seg.end, seg.mid_index) == (2.0, 2.0, 0)


def test_mid_frame_tie_goes_to_first():
    frames = [Frame(float(t), None) for t in (0, 1, 2, 3)]
    res = segment_scores(frames, [0, 0, 0], SegmentationConfig(L=1))
    assert res.segments[0].mid_index == 1


def test_bad_inputs():
    with pytest.raises(ValueError):
        segment_scores([], [], SegmentationConfig())
    with pytest.raises(ValueError):
        segment_scores([Frame(0.0, None), Frame(1.0, None)], [1.0, 2.0], SegmentationConfig())
    with pytest.raises(ValueError):
        SegmentationConfig(threshold_min=50, threshold_max=10)


def test_segments_recover_planted_cuts(tmp_path):
    colours = [(200, 30, 30)] * 4 + [(30, 200, 30)] * 3 + [(30, 30, 200)] * 3
    for i, c in enumerate(colours):
        save_frame(np.full((8, 8, 3), c, np.uint8), tmp_path, "v", i * 0.5)
    seq = DirectoryFrameProvider(tmp_path).frames("v", 0.0, 4.5)
    res = segment_moment(seq, SegmentationConfig(L=3, analysis_fps=None))
    assert [(s.start, s.end) for s in res.segments] == [(0.0, 1.75), (1.75, 3.25), (3.25, 4.5)]
    assert [f.timestamp for f in res.keyframes] == [1.0, 2.5, 4.0]
    one = segment_moment(seq, SegmentationConfig(L=1, analysis_fps=None))
    assert len(one.segments) == 1 and one.keyframes[0].timestamp == 2.0
