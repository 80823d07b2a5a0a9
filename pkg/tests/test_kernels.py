import colorsys
import importlib
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis.extra.numpy import arrays

from finecap import _kernels_py, kernels

try:
    from finecap import _kernels as compiled
except ImportError:  # extension not built
    compiled = None

frames = arrays(np.uint8, (4, 5, 3))


def _oracle_score(a, b):
    # per-pixel colorsys conversion, hue rescaled to the 0..255 range
    def hsv(img):
        out = np.empty(img.shape, dtype=float)
        for idx in np.ndindex(img.shape[:2]):
            h, s, v = colorsys.rgb_to_hsv(*(img[idx] / 255.0))
            out[idx] = (h * 255.0, s * 255.0, v * 255.0)
        return out
    return np.abs(hsv(a) - hsv(b)).mean(axis=(0, 1)).mean() * 100 / 255


def test_black_white_is_a_third():
    black = np.zeros((3, 3, 3), np.uint8)
    white = np.full((3, 3, 3), 255, np.uint8)
    assert kernels.content_score(black, white) == pytest.approx(100 / 3, abs=1e-12)
    assert kernels.content_score(black, black) == 0.0


@settings(max_examples=60, deadline=None)
@given(frames, frames)
def test_python_kernel_matches_colorsys(a, b):
    assert _kernels_py.content_score(a, b) == pytest.approx(_oracle_score(a, b), abs=1e-9)


@pytest.mark.skipif(compiled is None, reason="compiled kernels not built")
@settings(max_examples=60, deadline=None)
@given(frames, frames)
def test_compiled_matches_python(a, b):
    assert compiled.content_score(a, b) == pytest.approx(_kernels_py.content_score(a, b),
                                                         abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(frames, frames)
def test_symmetric_and_bounded(a, b):
    s = kernels.content_score(a, b)
    assert s == pytest.approx(kernels.content_score(b, a), abs=1e-12)
    assert 0 <= s <= 100


def test_adjacent_scores_shape_and_values():
    rng = np.random.default_rng(0)
    seq = [rng.integers(0, 256, (6, 6, 3), dtype=np.uint8) for _ in range(5)]
    out = kernels.adjacent_scores(seq)
    assert out.shape == (4,)
    for i in range(4):
        assert out[i] == pytest.approx(_kernels_py.content_score(seq[i], seq[i + 1]), abs=1e-9)
    assert kernels.adjacent_scores(seq[:1]).shape == (0,)


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        kernels.content_score(np.zeros((2, 2, 3), np.uint8), np.zeros((3, 2, 3), np.uint8))


def test_env_var_forces_pure_python(monkeypatch):
    monkeypatch.setenv("FINECAP_PURE_PYTHON", "1")
    try:
        mod = importlib.reload(kernels)
        assert mod.BACKEND == "python"
    finally:
        monkeypatch.delenv("FINECAP_PURE_PYTHON")
        importlib.reload(kernels)
    assert kernels.BACKEND == ("compiled" if compiled is not None else "python")
    assert os.environ.get("FINECAP_PURE_PYTHON") is None
