"""Mini-batch gradient descent for the evaluator, plus checkpoint I/O."""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..records import atomic_write_text
from .losses import TrainingBatch, sample_trivial_negatives, total_loss
from .model import EvaluatorModel

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"FINECAP-EVALUATOR"
CHECKPOINT_VERSION = 1


class TrainerConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    tau: float = Field(0.07, gt=0)
    lambda_c: float = Field(1.0, ge=0)
    lambda_m: float = Field(1.0, ge=0)
    batch_size: int = Field(16, ge=1)
    learning_rate: float = Field(0.1, gt=0)
    epochs: int = Field(10, ge=0)
    seed: int = 0
    frames_per_moment: int = Field(20, ge=1)
    projection_dim: Optional[int] = Field(None, ge=1)


class TrainingDiverged(FloatingPointError):
    def __init__(self, epoch: int, step: int, detail: str):
        super().__init__(f"training diverged at epoch {epoch}, step {step}: {detail}")
        self.epoch = epoch
        self.step = step


@dataclass
class EpochStats:
    epoch: int
    contrastive: float
    matching: float
    total: float


@dataclass
class TrainResult:
    model: EvaluatorModel
    trace: list[EpochStats] = field(default_factory=list)


def train(data: TrainingBatch, cfg: TrainerConfig,
          model: Optional[EvaluatorModel] = None) -> TrainResult:
    """Plain gradient descent over shuffled mini-batches; fully seeded."""
    if data.size == 0:
        raise ValueError("training corpus is empty")
    if model is None:
        model = EvaluatorModel.initialize(data.v.shape[1], cfg.projection_dim)
    rng = np.random.default_rng(cfg.seed)
    trace = []
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(data.size)
        sums = np.zeros(3)
        steps = 0
        for step, start in enumerate(range(0, data.size, cfg.batch_size), 1):
            batch = data.take(order[start:start + cfg.batch_size])
            negatives = sample_trivial_negatives(batch.size, rng)
            # overflow surfaces through the finiteness checks below
            with np.errstate(over="ignore", invalid="ignore"):
                try:
                    res = total_loss(model, batch, cfg, negatives=negatives)
                except FloatingPointError as exc:
                    raise TrainingDiverged(epoch, step, str(exc)) from None
                model = model + res.grads.scale(-cfg.learning_rate)
            if not np.isfinite(res.value) or not model.is_finite():
                raise TrainingDiverged(epoch, step, "non-finite loss or parameters")
            p = res.parts
            sums += [(p["contrastive"] + p["contrastive_pos"]) / 2,
                     (p["matching"] + p["matching_pos"]) / 2, res.value]
            steps += 1
        stats = EpochStats(epoch, *(sums / steps))
        logger.info("epoch %d: l_c=%.5f l_m=%.5f l=%.5f", epoch, stats.contrastive,
                    stats.matching, stats.total)
        trace.append(stats)
    return TrainResult(model, trace)


def write_trace(path, trace: list[EpochStats]) -> None:
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["epoch", "l_c", "l_m", "l"])
    for s in trace:
        writer.writerow([s.epoch, repr(s.contrastive), repr(s.matching), repr(s.total)])
    atomic_write_text(path, buf.getvalue())


def save_checkpoint(path, model: EvaluatorModel, cfg: Optional[TrainerConfig] = None) -> None:
    """Header line, JSON metadata line, then little-endian float64 blocks in row-major order."""
    blocks = [("W_v", model.W_v), ("W_t", model.W_t), ("w", model.w),
              ("b", np.array([model.b]))]
    meta = {
        "version": CHECKPOINT_VERSION, "d_e": model.d_e, "d_p": model.d_p,
        "blocks": [{"name": n, "shape": list(a.shape)} for n, a in blocks],
        "config": cfg.model_dump() if cfg is not None else None,
        "seed": cfg.seed if cfg is not None else None,
    }
    payload = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for _, a in blocks)
    data = (CHECKPOINT_MAGIC + b" v%d\n" % CHECKPOINT_VERSION
            + json.dumps(meta, sort_keys=True).encode("utf-8") + b"\n" + payload)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp")
    tmp.write_bytes(data)
    tmp.replace(path)


def load_checkpoint(path) -> tuple[EvaluatorModel, dict]:
    raw = Path(path).read_bytes()
    header, _, rest = raw.partition(b"\n")
    if not header.startswith(CHECKPOINT_MAGIC):
        raise ValueError(f"{path}: not an evaluator checkpoint")
    version = int(header.split(b" v")[-1])
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    meta_line, _, payload = rest.partition(b"\n")
    meta = json.loads(meta_line)
    arrays = {}
    offset = 0
    for block in meta["blocks"]:
        count = int(np.prod(block["shape"]))
        arr = np.frombuffer(payload, dtype="<f8", count=count, offset=offset)
        arrays[block["name"]] = arr.reshape(block["shape"]).astype(float)
        offset += 8 * count
    if offset != len(payload):
        raise ValueError(f"{path}: checkpoint payload has {len(payload) - offset} trailing bytes")
    model = EvaluatorModel(arrays["W_v"], arrays["W_t"], arrays["w"], float(arrays["b"][0]))
    return model, meta
