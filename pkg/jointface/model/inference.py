"""
JointFace — Inference

Runs a trained network on prepared features. Changing the speaker one-hot
while keeping audio and text fixed changes the speaking style, so the sweep
renders the same utterance once per training identity.
"""
from __future__ import annotations

from typing import Dict, Union

import structlog

from jointface.config import FRAME_RATE
from jointface.core.mesh import MeshSequence, TemplateMesh
from jointface.errors import CheckpointError
from jointface.model.network import JointFaceNet, forward

logger = structlog.get_logger()


def infer(
    model: JointFaceNet,
    mel,
    text,
    speaker: int,
    template: TemplateMesh,
    frame_rate: int = FRAME_RATE,
) -> MeshSequence:
    if template.vertex_count != model.dims.vertices:
        raise CheckpointError(
            f"Template has {template.vertex_count} vertices, checkpoint predicts {model.dims.vertices}"
        )
    if not 0 <= int(speaker) < model.dims.speakers:
        raise CheckpointError(f"Speaker {speaker} not in [0, {model.dims.speakers}) for this checkpoint")
    model.eval()
    return forward(mel, text, int(speaker), template, model, frame_rate=frame_rate)


def infer_all_speakers(
    model: JointFaceNet,
    mel,
    text,
    template: TemplateMesh,
    frame_rate: int = FRAME_RATE,
) -> Dict[int, MeshSequence]:
    out = {k: infer(model, mel, text, k, template, frame_rate) for k in range(model.dims.speakers)}
    logger.info("speaker_sweep", speakers=len(out), frames=next(iter(out.values())).frame_count)
    return out


def parse_speaker(value: Union[str, int]) -> Union[int, str]:
    """'all' or a non-negative integer index."""
    if isinstance(value, str) and value.strip().lower() == "all":
        return "all"
    index = int(value)
    if index < 0:
        raise ValueError(f"speaker index must be ≥ 0, got {index}")
    return index
