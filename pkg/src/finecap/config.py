"""Pipeline configuration: defaults, dataset presets and validation."""
from __future__ import annotations

from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .backends import BackendConfig
from .evaluator import TrainerConfig
from .frames import FRAME_POLICIES

# per-dataset key-frame cap and video-LMM frame sampling
DATASET_PRESETS = {
    "didemo": {"L": 1, "frame_policy": "fps8"},
    "charades": {"L": 1, "frame_policy": "fps8"},
    "activitynet": {"L": 5, "frame_policy": "uniform64"},
}


class ConfigError(ValueError):
    pass


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class KeyframeSection(_Section):
    L: Optional[int] = Field(None, ge=1)
    initial_threshold: float = Field(27.0, gt=0)
    threshold_min: float = Field(1.0, gt=0)
    threshold_max: float = Field(100.0, gt=0)
    max_iterations: int = Field(20, ge=1)
    analysis_fps: Optional[float] = Field(2.0, gt=0)

    @model_validator(mode="after")
    def _bounds(self):
        if not self.threshold_min < self.threshold_max:
            raise ValueError("threshold_min must be < threshold_max")
        return self


class StaticsSection(_Section):
    N_s: int = Field(3, ge=1)
    workers: Optional[int] = Field(None, ge=1)


class DynamicsSection(_Section):
    N_qa: int = Field(5, ge=1)
    N_d: int = Field(3, ge=1)
    frame_policy: Optional[str] = None
    workers: Optional[int] = Field(None, ge=1)

    @model_validator(mode="after")
    def _policy(self):
        if self.frame_policy is not None and self.frame_policy not in FRAME_POLICIES:
            raise ValueError(f"frame_policy must be one of {sorted(FRAME_POLICIES)}")
        return self


class PerturbSection(_Section):
    N_pos: int = Field(3, ge=1)
    N_neg: int = Field(3, ge=1)
    single_call: bool = False
    workers: Optional[int] = Field(None, ge=1)


class SelectSection(_Section):
    threshold: Optional[float] = Field(None, ge=0, le=1)


class EmbedderConfig(BackendConfig):
    endpoint: str = "http://localhost:8000/v1/embeddings"
    dim: int = Field(64, ge=1)


class BackendsSection(_Section):
    llm: BackendConfig = BackendConfig()
    image_lmm: BackendConfig = BackendConfig()
    video_lmm: BackendConfig = BackendConfig()
    embedder: EmbedderConfig = EmbedderConfig()
    mock_rules: Optional[str] = None


class PipelineConfig(_Section):
    dataset: Literal["didemo", "charades", "activitynet"] = "charades"
    seed: int = 0
    workers: int = Field(4, ge=1)
    cache_dir: Optional[str] = None
    decoder: str = "ffmpeg"
    keyframe: KeyframeSection = KeyframeSection()
    statics: StaticsSection = StaticsSection()
    dynamics: DynamicsSection = DynamicsSection()
    perturb: PerturbSection = PerturbSection()
    evaluator: TrainerConfig = TrainerConfig()
    select: SelectSection = SelectSection()
    backends: BackendsSection = BackendsSection()

    @model_validator(mode="after")
    def _fill_presets(self):
        preset = DATASET_PRESETS[self.dataset]
        if self.keyframe.L is None:
            object.__setattr__(self, "keyframe", self.keyframe.model_copy(update={"L": preset["L"]}))
        if self.dynamics.frame_policy is None:
            object.__setattr__(self, "dynamics", self.dynamics.model_copy(
                update={"frame_policy": preset["frame_policy"]}))
        return self

    def workers_for(self, stage: str) -> int:
        section = getattr(self, stage, None)
        return getattr(section, "workers", None) or self.workers

    def dump(self) -> dict:
        d = self.model_dump(mode="json")
        d["presets"] = {"datasets": DATASET_PRESETS, "frame_policies": FRAME_POLICIES}
        return d


def _format_errors(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(x) for x in err["loc"]) or "<root>"
        parts.append(f"{loc}: {err['msg']}")
    return "; ".join(parts)


def parse_config(data: Optional[dict], overrides: Optional[dict] = None) -> PipelineConfig:
    data = dict(data or {})
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    try:
        return PipelineConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from None


def validate_config(path=None, overrides: Optional[dict] = None) -> PipelineConfig:
    """Load a YAML/JSON config file (empty file = all defaults) and validate it."""
    data = None
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"config file not found: {path}")
        try:
            data = yaml.safe_load(path.read_text(encoding="utf-8"))
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: not valid YAML/JSON: {exc}") from None
        if data is not None and not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
    return parse_config(data, overrides)
