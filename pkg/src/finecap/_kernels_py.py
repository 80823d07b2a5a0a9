"""Pure numpy versions of the frame-difference kernels.

Used when the compiled ``_kernels`` extension is unavailable. Both versions
must agree to within floating-point summation order.
"""
import numpy as np

# maps an 8-bit channel difference onto [0, 100]
SCALE = 100.0 / 255.0


def rgb_to_hsv(frame):
    """HSV planes of a uint8 RGB frame, each channel scaled to [0, 255]."""
    rgb = np.asarray(frame, dtype=np.float64)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    vmax = rgb.max(axis=-1)
    vmin = rgb.min(axis=-1)
    delta = vmax - vmin
    safe = np.where(delta > 0, delta, 1.0)
    hue = np.where(vmax == r, 60.0 * (g - b) / safe,
                   np.where(vmax == g, 60.0 * ((b - r) / safe + 2.0),
                            60.0 * ((r - g) / safe + 4.0)))
    hue = np.where(hue < 0, hue + 360.0, hue)
    hue = np.where(delta > 0, hue, 0.0) * (255.0 / 360.0)
    sat = np.where(vmax > 0, delta / np.where(vmax > 0, vmax, 1.0) * 255.0, 0.0)
    return np.stack([hue, sat, vmax])


def content_score(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"frame shapes differ: {a.shape} vs {b.shape}")
    ha = rgb_to_hsv(a)
    hb = rgb_to_hsv(b)
    per_channel = np.abs(ha - hb).reshape(3, -1).mean(axis=1)
    return float(per_channel.mean() * SCALE)


def adjacent_scores(frames):
    """Content score between each frame and its predecessor (length n-1)."""
    hsv = [rgb_to_hsv(f) for f in frames]
    for i in range(1, len(hsv)):
        if hsv[i].shape != hsv[0].shape:
            raise ValueError(f"frame {i} shape differs from frame 0")
    out = np.empty(max(len(hsv) - 1, 0))
    for i in range(1, len(hsv)):
        out[i - 1] = np.abs(hsv[i] - hsv[i - 1]).reshape(3, -1).mean(axis=1).mean() * SCALE
    return out
