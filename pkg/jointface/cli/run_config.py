"""
JointFace — Run Configs

One pydantic model per CLI command. Values resolve in three layers:

    model defaults  <  --config JSON file  <  explicit flags

Unknown keys in the JSON file are rejected. The resolved config is written
as resolved-config.json next to the command's outputs, so any run can be
repeated from its snapshot alone.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Type, TypeVar

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from jointface.config import settings
from jointface.errors import ConfigurationError

RESOLVED_NAME = "resolved-config.json"

FusionChoice = Literal["tensor", "concat", "audio", "text"]
FUSION_MODES = {"tensor": "tensor", "concat": "concat", "audio": "audio_only", "text": "text_only"}


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    def snapshot(self) -> Dict[str, Any]:
        return {"command": self.command_name(), **self.model_dump(mode="json")}

    @classmethod
    def command_name(cls) -> str:
        return cls.__name__.replace("RunConfig", "").lower()


class _Embeddings(RunConfig):
    embeddings: str = "pseudo"
    embedding_seed: int = 0

    @field_validator("embeddings")
    @classmethod
    def provider_choice(cls, v: str) -> str:
        if v != "pseudo" and not v.startswith("file:"):
            raise ValueError("embeddings must be 'pseudo' or 'file:PATH'")
        return v


class _Widths(RunConfig):
    audio_dim: int = Field(default=128, ge=1)
    text_hidden: int = Field(default=128, ge=1)
    text_dim: int = Field(default=64, ge=1)
    dec_hidden: int = Field(default=128, ge=1)
    blstm_hidden: int = Field(default=128, ge=1)

    def widths(self) -> Dict[str, int]:
        return {k: getattr(self, k) for k in ("audio_dim", "text_hidden", "text_dim", "dec_hidden", "blstm_hidden")}


class SynthRunConfig(RunConfig):
    out: str
    seed: int = 0
    speakers: int = Field(default=2, ge=1)
    utterances_per_speaker: int = Field(default=8, ge=1)
    rows: int = Field(default=26, ge=2)
    cols: int = Field(default=13, ge=1)
    workers: int = Field(default_factory=lambda: settings.WORKERS, ge=1)


class TrainRunConfig(_Embeddings, _Widths):
    manifest: str
    out: str
    epochs: int = Field(default=100, ge=1)
    lr: float = Field(default=1e-4, gt=0)
    seed: int = 0
    fusion: FusionChoice = "tensor"
    checkpoint_every: Optional[int] = Field(default=None, ge=1)
    split: str = "train"
    normalize_loss: bool = True


class InferRunConfig(_Embeddings):
    checkpoint: str
    audio: str
    alignment: str
    template: str
    out: str
    speaker: str = "0"

    @field_validator("speaker")
    @classmethod
    def speaker_choice(cls, v: str) -> str:
        v = str(v).strip().lower()
        if v != "all" and not (v.isdigit()):
            raise ValueError("speaker must be a non-negative integer or 'all'")
        return v


class EvalRunConfig(RunConfig):
    pred: str
    truth: str
    mask: str
    out: str


class AblateRunConfig(_Embeddings, _Widths):
    manifest: str
    out: str
    seeds: List[int] = Field(default_factory=lambda: [1, 2, 3], min_length=1)
    epochs: int = Field(default=30, ge=1)
    lr: float = Field(default=1e-4, gt=0)
    normalize_loss: bool = True


class CorrelateRunConfig(_Embeddings):
    checkpoint: str
    manifest: str
    out: str
    modality: Literal["audio", "text"] = "text"
    reduction: Literal["mean", "max"] = "mean"
    split: str = "test"


class ExportEmbeddingsRunConfig(_Embeddings):
    checkpoint: str
    audio: str
    alignment: str
    out: str

    @classmethod
    def command_name(cls) -> str:
        return "export-embeddings"


C = TypeVar("C", bound=RunConfig)


class UsageError(ConfigurationError):
    """Config problems the user fixes on the command line (exit code 2)."""


def load_config_file(path: Optional[str]) -> Dict[str, Any]:
    if not path:
        return {}
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise UsageError(f"Config file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise UsageError(f"Config file {path} is not valid JSON: {e.msg}") from e
    if not isinstance(raw, dict):
        raise UsageError(f"Config file {path} must hold a JSON object")
    # snapshot-only keys, so a resolved-config.json can be fed back in
    raw.pop("command", None)
    raw.pop("provenance", None)
    return raw


def resolve(model: Type[C], config_path: Optional[str], flags: Dict[str, Any]) -> C:
    values = load_config_file(config_path)
    values.update({k: v for k, v in flags.items() if v is not None})
    try:
        return model.model_validate(values)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}" for err in e.errors()
        )
        raise UsageError(f"Invalid {model.command_name()} config: {problems}") from e


def write_resolved(config: RunConfig, directory: Path, extra: Optional[Dict[str, Any]] = None) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    snapshot = config.snapshot()
    if extra:
        snapshot["provenance"] = extra
    path = directory / RESOLVED_NAME
    path.write_text(json.dumps(snapshot, indent=2, sort_keys=True) + "\n")
    return path
