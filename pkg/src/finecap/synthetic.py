"""Synthetic work directories for demos and tests.

Each video is a run of flat-coloured frames with a few abrupt colour
changes, so scene cuts and key frames are known by construction.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .frames import save_frame
from .records import MomentRecord, save_dataset

SUBJECTS = ["a man", "a woman", "a child", "a dog", "two people", "a girl", "an old man"]
ACTIONS = ["opens the door", "runs across the room", "picks up a cup", "sits on the sofa",
           "waves at the camera", "throws a ball", "washes the dishes", "reads a book"]


def make_workdir(root, n_moments: int = 20, seed: int = 0, fps: float = 4.0,
                 size: int = 16) -> list[MomentRecord]:
    """Write ``frames/`` and ``moments.jsonl`` under ``root``; one video per moment."""
    root = Path(root)
    rng = np.random.default_rng(seed)
    moments = []
    for i in range(n_moments):
        vid = f"vid{i:03d}"
        duration = float(rng.integers(3, 7))
        n_frames = int(duration * fps)
        cuts = sorted(rng.choice(np.arange(2, n_frames - 1), size=int(rng.integers(0, 3)),
                                 replace=False).tolist()) if n_frames > 4 else []
        colour = rng.integers(0, 256, size=3)
        for k in range(n_frames):
            if k in cuts:
                colour = rng.integers(0, 256, size=3)
            frame = np.broadcast_to(colour, (size, size, 3)).astype(np.uint8).copy()
            # light texture so frames are not all identical
            frame[k % size, :, :] //= 2
            save_frame(frame, root / "frames", vid, k / fps)
        q = f"{SUBJECTS[i % len(SUBJECTS)]} {ACTIONS[(i * 3) % len(ACTIONS)]}"
        split = "test" if i % 5 == 4 else "train"
        moments.append(MomentRecord(vid, 0.0, (n_frames - 1) / fps, q, split))
    save_dataset(moments, root / "moments.jsonl")
    return moments
