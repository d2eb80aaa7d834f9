"""
JointFace — Training Loop

    for epoch in 1..epochs:
        order ← seeded permutation of the training samples
        for each sample (batch size 1):
            Ỹ = template + net(mel, text, one-hot)
            L = Σ‖Ỹ − Y‖²   (÷ T·V when normalize_loss)
            grads = gradients(L); adam_step(grads)
        log + CSV row: epoch, mean_loss[, val_loss]
        checkpoint every k epochs, and always at the end

Everything that can vary between runs (initial weights, sample order) is
drawn from the config seed, so (seed, config, data) fixes the trajectory.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence

import pandas as pd
import structlog
import torch
from pydantic import BaseModel, ConfigDict, Field, field_validator

from jointface.core.mesh import TemplateMesh
from jointface.errors import ConfigurationError, DimensionError, TrainingAborted
from jointface.model.checkpoint import save_checkpoint
from jointface.model.grads import gradients
from jointface.model.network import FusionMode, JointFaceNet, ModelDims
from jointface.train.dataset import Sample
from jointface.train.loss import mse_loss
from jointface.train.optim import AdamState, adam_step

logger = structlog.get_logger()

StepCallback = Callable[[int, str, float], None]


# ===========================================
# Config
# ===========================================

class TrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    lr: float = Field(default=1e-4, gt=0)
    batch_size: int = 1
    epochs: int = Field(default=100, ge=1)
    seed: int = 0
    fusion_mode: str = FusionMode.TENSOR.value
    normalize_loss: bool = True
    checkpoint_every: Optional[int] = Field(default=None, ge=1)
    out_dir: Optional[str] = None

    # network widths; inputs and outputs come from the data
    audio_dim: int = Field(default=128, ge=1)
    text_hidden: int = Field(default=128, ge=1)
    text_dim: int = Field(default=64, ge=1)
    dec_hidden: int = Field(default=128, ge=1)
    blstm_hidden: int = Field(default=128, ge=1)

    @field_validator("batch_size")
    @classmethod
    def single_utterance_batches(cls, v: int) -> int:
        if v != 1:
            raise ValueError("only batch_size 1 is supported")
        return v

    @field_validator("fusion_mode")
    @classmethod
    def known_fusion_mode(cls, v: str) -> str:
        try:
            return FusionMode.parse(v).value
        except Exception:
            raise ValueError(f"unknown fusion mode {v!r}") from None

    def model_dims(self, speakers: int, vertices: int, mel_channels: int, text_in: int) -> ModelDims:
        return ModelDims(
            vertices=vertices, speakers=speakers, mel_channels=mel_channels,
            audio_dim=self.audio_dim, text_in=text_in, text_hidden=self.text_hidden,
            text_dim=self.text_dim, dec_hidden=self.dec_hidden, blstm_hidden=self.blstm_hidden,
        )


@dataclass
class TrainResult:
    model: JointFaceNet
    epoch_losses: List[float] = field(default_factory=list)
    val_losses: List[float] = field(default_factory=list)
    steps: int = 0
    checkpoint_hash: Optional[str] = None
    checkpoint_dir: Optional[Path] = None


# ===========================================
# Loop
# ===========================================

def sample_loss(model: JointFaceNet, sample: Sample, template: TemplateMesh, normalize: bool) -> torch.Tensor:
    pred = model.predict_vertices(sample.mel, sample.text, sample.speaker, template)
    return mse_loss(pred, sample.truth, normalize=normalize)


def validation_loss(model: JointFaceNet, samples: Sequence[Sample], template: TemplateMesh,
                    normalize: bool = True) -> float:
    with torch.no_grad():
        losses = [float(sample_loss(model, s, template, normalize)) for s in samples]
    return sum(losses) / len(losses)


def _check_dataset(dataset: Sequence[Sample], template: TemplateMesh, speakers: int) -> None:
    if not dataset:
        raise ConfigurationError("Training set is empty")
    for s in dataset:
        if s.truth is None:
            raise ConfigurationError(f"Utterance {s.utterance_id!r} has no ground-truth meshes")
        if s.truth.vertex_count != template.vertex_count:
            raise DimensionError(
                f"Utterance {s.utterance_id!r} has {s.truth.vertex_count} vertices, "
                f"template has {template.vertex_count}"
            )
        if not 0 <= s.speaker < speakers:
            raise ConfigurationError(f"Utterance {s.utterance_id!r}: speaker {s.speaker} not in [0, {speakers})")


def train(
    config: TrainConfig,
    dataset: Sequence[Sample],
    template: TemplateMesh,
    speakers: int,
    val_set: Optional[Sequence[Sample]] = None,
    step_callback: Optional[StepCallback] = None,
) -> TrainResult:
    _check_dataset(dataset, template, speakers)
    first = dataset[0]
    dims = config.model_dims(speakers, template.vertex_count, first.mel.channels, first.text.dimension)
    model = JointFaceNet(dims, config.fusion_mode, seed=config.seed)
    model.train()

    state = AdamState()
    shuffler = torch.Generator().manual_seed(config.seed)
    out_dir = Path(config.out_dir) if config.out_dir else None
    result = TrainResult(model)
    history = []

    logger.info(
        "training_started",
        utterances=len(dataset),
        epochs=config.epochs,
        fusion_mode=config.fusion_mode,
        parameters=sum(p.numel() for p in model.parameters()),
    )

    for epoch in range(1, config.epochs + 1):
        order = torch.randperm(len(dataset), generator=shuffler).tolist()
        total = 0.0
        for i in order:
            sample = dataset[i]
            loss = sample_loss(model, sample, template, config.normalize_loss)
            value = float(loss)
            if not math.isfinite(value):
                raise TrainingAborted("non-finite loss", utterance_id=sample.utterance_id)
            adam_step(model, gradients(loss, model), state, config.lr)
            result.steps += 1
            total += value
            if step_callback is not None:
                step_callback(result.steps, sample.utterance_id, value)

        mean_loss = total / len(dataset)
        result.epoch_losses.append(mean_loss)
        row = {"epoch": epoch, "mean_loss": mean_loss}
        if val_set:
            val = validation_loss(model, val_set, template, config.normalize_loss)
            result.val_losses.append(val)
            row["val_loss"] = val
        history.append(row)
        logger.info("epoch_completed", **row)

        if out_dir is not None:
            out_dir.mkdir(parents=True, exist_ok=True)
            pd.DataFrame(history).to_csv(out_dir / "loss.csv", index=False, float_format="%.9g")
            if config.checkpoint_every and epoch % config.checkpoint_every == 0 and epoch != config.epochs:
                _save(model, out_dir / f"checkpoint-epoch{epoch:04d}", config, state)

    model.eval()
    if out_dir is not None:
        result.checkpoint_dir = out_dir / "checkpoint"
        result.checkpoint_hash = _save(model, result.checkpoint_dir, config, state)
    logger.info("training_completed", steps=result.steps, final_loss=result.epoch_losses[-1])
    return result


def _save(model: JointFaceNet, directory: Path, config: TrainConfig, state: AdamState) -> str:
    return save_checkpoint(
        model, directory, seed=config.seed,
        optimizer={"lr": config.lr, **state.hyperparameters()},
        extra={"normalize_loss": config.normalize_loss},
    )
