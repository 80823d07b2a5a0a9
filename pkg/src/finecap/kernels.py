"""Selects the compiled kernels when available, else the numpy fallback.

Set ``FINECAP_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
if not os.environ.get("FINECAP_PURE_PYTHON"):
    try:
        from . import _kernels as _impl
        BACKEND = "compiled"
    except ImportError:
        _impl = _kernels_py
else:
    _impl = _kernels_py

content_score = _impl.content_score
adjacent_scores = _impl.adjacent_scores
rgb_to_hsv = _kernels_py.rgb_to_hsv

__all__ = ["BACKEND", "content_score", "adjacent_scores", "rgb_to_hsv"]
