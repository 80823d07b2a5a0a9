"""Frame sequences, on-disk frame layout and frame sampling policies.

Frames live under ``<root>/<video_id>/<timestamp_ms>.png`` where the
timestamp is in milliseconds from the start of the video. Video decoding is
not done in-process; :func:`extract_frames` shells out to an external decoder
to populate that layout.
"""
from __future__ import annotations

import logging
import shutil
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from PIL import Image

logger = logging.getLogger(__name__)

FrameHandle = Union[np.ndarray, Path, str]

# named frame sampling presets for video LMM input
FRAME_POLICIES = {
    "fps8": {"kind": "fps", "value": 8},
    "uniform64": {"kind": "uniform", "value": 64},
}


class FrameError(ValueError):
    pass


@dataclass(frozen=True)
class Frame:
    timestamp: float
    handle: FrameHandle

    def load(self) -> np.ndarray:
        return load_frame(self.handle)


@dataclass(frozen=True)
class FrameSequence:
    key: str
    frames: tuple[Frame, ...]

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        ts = [f.timestamp for f in self.frames]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise FrameError(f"{self.key}: frame timestamps must be strictly increasing")

    def __len__(self):
        return len(self.frames)

    def __iter__(self):
        return iter(self.frames)

    def __getitem__(self, i):
        return self.frames[i]

    @property
    def timestamps(self) -> list[float]:
        return [f.timestamp for f in self.frames]

    def check_within(self, t_s: float, t_e: float) -> None:
        for f in self.frames:
            if not t_s <= f.timestamp <= t_e:
                raise FrameError(f"{self.key}: frame at {f.timestamp}s outside [{t_s}, {t_e}]")

    def subset(self, indices: Sequence[int]) -> "FrameSequence":
        return FrameSequence(self.key, tuple(self.frames[i] for i in indices))


def load_frame(handle: FrameHandle) -> np.ndarray:
    """Return an ``HxWx3`` uint8 RGB array for a frame handle."""
    if isinstance(handle, np.ndarray):
        arr = handle
    else:
        with Image.open(handle) as img:
            arr = np.asarray(img.convert("RGB"))
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise FrameError(f"expected an HxWx3 RGB frame, got shape {arr.shape}")
    return np.ascontiguousarray(arr, dtype=np.uint8)


def frame_bytes(handle: FrameHandle) -> bytes:
    """PNG bytes for a handle; files are passed through unchanged."""
    if not isinstance(handle, np.ndarray):
        return Path(handle).read_bytes()
    import io

    buf = io.BytesIO()
    Image.fromarray(load_frame(handle)).save(buf, format="PNG")
    return buf.getvalue()


def save_frame(arr: np.ndarray, root, video_id: str, timestamp: float) -> Path:
    path = Path(root) / video_id / f"{int(round(timestamp * 1000))}.png"
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.asarray(arr, dtype=np.uint8)).save(path)
    return path


class DirectoryFrameProvider:
    """Serves frames from the ``<root>/<video_id>/<timestamp_ms>.png`` layout."""

    def __init__(self, root):
        self.root = Path(root)
        self._index: dict[str, list[tuple[float, Path]]] = {}

    def _frames_of(self, video_id: str) -> list[tuple[float, Path]]:
        if video_id not in self._index:
            vdir = self.root / video_id
            if not vdir.is_dir():
                raise FrameError(f"no frame directory for video {video_id!r} under {self.root}")
            entries = []
            for p in vdir.glob("*.png"):
                try:
                    entries.append((int(p.stem) / 1000.0, p))
                except ValueError:
                    logger.warning("ignoring frame file with non-numeric name: %s", p)
            entries.sort()
            self._index[video_id] = entries
        return self._index[video_id]

    def frames(self, video_id: str, t_s: float, t_e: float, key: Optional[str] = None) -> FrameSequence:
        inside = [Frame(t, p) for t, p in self._frames_of(video_id) if t_s <= t <= t_e]
        return FrameSequence(key or video_id, tuple(inside))


def uniform_indices(n: int, count: int) -> list[int]:
    """``min(n, count)`` distinct indices spread evenly over ``range(n)``."""
    if n <= 0 or count <= 0:
        return []
    if count >= n:
        return list(range(n))
    if count == 1:
        return [(n - 1) // 2]
    return [int(round(x)) for x in np.linspace(0, n - 1, count)]


def policy_count(policy: dict, duration: float) -> int:
    if policy["kind"] == "uniform":
        return int(policy["value"])
    if policy["kind"] == "fps":
        return int(np.floor(duration * policy["value"] + 1e-9)) + 1
    raise ValueError(f"unknown frame policy kind {policy['kind']!r}")


def sample_frames(seq: FrameSequence, policy: Union[str, dict], t_s: float, t_e: float) -> FrameSequence:
    """Apply a sampling policy to the frames of a moment.

    The result has ``min(len(seq), policy count)`` frames, evenly spaced by
    index over the available ones.
    """
    if isinstance(policy, str):
        if policy not in FRAME_POLICIES:
            raise ValueError(f"unknown frame policy {policy!r}; known: {sorted(FRAME_POLICIES)}")
        policy = FRAME_POLICIES[policy]
    count = policy_count(policy, t_e - t_s)
    return seq.subset(uniform_indices(len(seq), count))


def extract_frames(video_path, video_id: str, out_root, fps: float = 8.0,
                   t_s: Optional[float] = None, t_e: Optional[float] = None,
                   decoder: str = "ffmpeg") -> list[Path]:
    """Decode frames with an external binary into the frame directory layout."""
    exe = shutil.which(decoder) or (decoder if Path(decoder).exists() else None)
    if exe is None:
        raise FileNotFoundError(f"decoder binary not found: {decoder}")
    start = t_s or 0.0
    out_dir = Path(out_root) / video_id
    out_dir.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory(dir=out_dir) as tmp:
        cmd = [exe, "-hide_banner", "-loglevel", "error", "-ss", f"{start:.3f}"]
        if t_e is not None:
            cmd += ["-to", f"{t_e:.3f}"]
        cmd += ["-i", str(video_path), "-vf", f"fps={fps}", str(Path(tmp) / "%08d.png")]
        subprocess.run(cmd, check=True)
        written = []
        for i, p in enumerate(sorted(Path(tmp).glob("*.png"))):
            ts_ms = int(round((start + i / fps) * 1000))
            dest = out_dir / f"{ts_ms}.png"
            p.replace(dest)
            written.append(dest)
    return written
