"""Per-workdir stage manifest used to skip stages whose inputs did not change."""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Optional

from .records import atomic_write_text


def file_digest(path) -> Optional[str]:
    path = Path(path)
    if path.is_dir():
        # frame directories: digest the listing (names and sizes), not the pixels
        h = hashlib.sha256()
        for p in sorted(path.rglob("*")):
            if p.is_file():
                h.update(f"{p.relative_to(path).as_posix()}\0{p.stat().st_size}\n".encode())
        return "dir:" + h.hexdigest()
    if not path.exists():
        return None
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def digest_obj(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class Manifest:
    def __init__(self, path):
        self.path = Path(path)
        self.data: dict = {"stages": {}}
        if self.path.exists():
            self.data = json.loads(self.path.read_text(encoding="utf-8"))
            self.data.setdefault("stages", {})

    def matches(self, stage: str, inputs: dict, config_digest: str) -> bool:
        entry = self.data["stages"].get(stage)
        if not entry:
            return False
        if entry.get("config") != config_digest:
            return False
        if entry.get("inputs") != {k: file_digest(p) for k, p in inputs.items()}:
            return False
        for name, (path, digest) in entry.get("outputs", {}).items():
            if file_digest(path) != digest:
                return False
        return True

    def record(self, stage: str, inputs: dict, config_digest: str, outputs: dict,
               moments: dict, exit_code: int) -> None:
        self.data["stages"][stage] = {
            "inputs": {k: file_digest(p) for k, p in inputs.items()},
            "config": config_digest,
            "outputs": {k: [str(p), file_digest(p)] for k, p in outputs.items()},
            "moments": moments,
            "exit_code": exit_code,
        }
        atomic_write_text(self.path, json.dumps(self.data, sort_keys=True, indent=1) + "\n")

    def exit_code(self, stage: str) -> int:
        return self.data["stages"].get(stage, {}).get("exit_code", 0)
