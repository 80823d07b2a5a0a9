# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled frame-difference kernels; see ``_kernels_py`` for the reference."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()

cdef double SCALE = 100.0 / 255.0


cdef inline void _hsv(double r, double g, double b, double* h, double* s, double* v) nogil:
    cdef double vmax = r, vmin = r, delta, hue
    if g > vmax: vmax = g
    if b > vmax: vmax = b
    if g < vmin: vmin = g
    if b < vmin: vmin = b
    delta = vmax - vmin
    if delta > 0:
        if vmax == r:
            hue = 60.0 * (g - b) / delta
        elif vmax == g:
            hue = 60.0 * ((b - r) / delta + 2.0)
        else:
            hue = 60.0 * ((r - g) / delta + 4.0)
        if hue < 0:
            hue += 360.0
        h[0] = hue * (255.0 / 360.0)
    else:
        h[0] = 0.0
    if vmax > 0:
        s[0] = delta / vmax * 255.0
    else:
        s[0] = 0.0
    v[0] = vmax


cdef double _score(const cnp.uint8_t[:, :, ::1] a, const cnp.uint8_t[:, :, ::1] b) nogil:
    cdef Py_ssize_t i, j, rows = a.shape[0], cols = a.shape[1]
    cdef double ha, sa, va, hb, sb, vb
    cdef double dh = 0.0, ds = 0.0, dv = 0.0
    cdef double n = <double>(rows * cols)
    for i in range(rows):
        for j in range(cols):
            _hsv(a[i, j, 0], a[i, j, 1], a[i, j, 2], &ha, &sa, &va)
            _hsv(b[i, j, 0], b[i, j, 1], b[i, j, 2], &hb, &sb, &vb)
            dh += fabs(ha - hb)
            ds += fabs(sa - sb)
            dv += fabs(va - vb)
    if n == 0:
        return 0.0
    return (dh / n + ds / n + dv / n) / 3.0 * SCALE


def content_score(a, b):
    a = np.ascontiguousarray(a, dtype=np.uint8)
    b = np.ascontiguousarray(b, dtype=np.uint8)
    if a.shape[0] != b.shape[0] or a.shape[1] != b.shape[1] or a.ndim != 3 or b.ndim != 3 \
            or a.shape[2] != 3 or b.shape[2] != 3:
        raise ValueError(f"frame shapes differ: {a.shape} vs {b.shape}")
    return _score(a, b)


def adjacent_scores(frames):
    cdef Py_ssize_t i, n = len(frames)
    arrs = [np.ascontiguousarray(f, dtype=np.uint8) for f in frames]
    out = np.empty(max(n - 1, 0))
    for i in range(1, n):
        out[i - 1] = content_score(arrs[i - 1], arrs[i])
    return out
