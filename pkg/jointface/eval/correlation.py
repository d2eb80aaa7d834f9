"""
JointFace — Modality/Vertex Correlation

For each vertex v, how strongly does an encoded modality track its motion?

    m_v(t)   = ‖offset_v(t)‖                    magnitude series, T long
    r_d,v    = Pearson(feature_d(t), m_v(t))    per feature dimension d
    score_v  = mean_d |r_d,v|   (or max_d)

A constant series (zero variance) contributes r = 0. Scores lie in [0, 1].
Audio features are expected to light up the mouth, text features the brows.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
import structlog
import torch

from jointface.core.mesh import MeshSequence, OffsetSequence, TemplateMesh, to_offsets
from jointface.core.regions import RegionMask
from jointface.errors import DimensionError, InputError
from jointface.model.network import JointFaceNet

logger = structlog.get_logger()

Reduction = Literal["mean", "max"]
Modality = Literal["audio", "text"]

MIN_FRAMES = 3


@dataclass(frozen=True)
class CorrelationMap:
    scores: np.ndarray          # V
    modality: str = ""
    reduction: str = "mean"

    def region_means(self, mask: RegionMask) -> dict:
        mask.check_vertex_count(self.scores.size)
        return {
            "upper": float(self.scores[mask.upper_indices()].mean()),
            "lower": float(self.scores[mask.lower_indices()].mean()),
        }


def _magnitudes(offsets) -> np.ndarray:
    if isinstance(offsets, OffsetSequence):
        return offsets.magnitudes()
    o = np.asarray(offsets, dtype=np.float64)
    if o.ndim == 3 and o.shape[2] == 3:
        return np.linalg.norm(o, axis=2)
    if o.ndim == 2:
        return o
    raise DimensionError(f"Offsets must be T×V×3 or T×V magnitudes, got shape {o.shape}")


def _centered_unit(x: np.ndarray) -> np.ndarray:
    """Columns centered and scaled to unit norm; constant columns become zero."""
    c = x - x.mean(axis=0, keepdims=True)
    norm = np.linalg.norm(c, axis=0, keepdims=True)
    scale = np.max(np.abs(x), axis=0, keepdims=True) + 1.0
    flat = norm <= 1e-12 * scale * np.sqrt(x.shape[0])
    return np.where(flat, 0.0, c / np.where(flat, 1.0, norm))


def pearson_map(features, offsets, reduction: Reduction = "mean", modality: str = "") -> CorrelationMap:
    f = np.asarray(features.detach().cpu() if isinstance(features, torch.Tensor) else features, dtype=np.float64)
    m = _magnitudes(offsets)
    if f.ndim != 2:
        raise DimensionError(f"Features must be T×D, got shape {f.shape}")
    if f.shape[0] != m.shape[0]:
        raise DimensionError(f"Features have {f.shape[0]} frames, offsets have {m.shape[0]}")
    if f.shape[0] < MIN_FRAMES:
        raise InputError(f"Correlation needs at least {MIN_FRAMES} frames, got {f.shape[0]}")
    if reduction not in ("mean", "max"):
        raise InputError(f"Unknown reduction {reduction!r}")

    r = np.abs(_centered_unit(f).T @ _centered_unit(m))          # D × V
    scores = r.mean(axis=0) if reduction == "mean" else r.max(axis=0)
    return CorrelationMap(np.clip(scores, 0.0, 1.0), modality, reduction)


def encoded_features(model: JointFaceNet, sample, modality: Modality) -> np.ndarray:
    with torch.no_grad():
        if modality == "audio":
            h = model.audio_encode(sample.mel, sample.speaker)
        elif modality == "text":
            h = model.text_encode(sample.text)
        else:
            raise InputError(f"Unknown modality {modality!r}")
    return h.cpu().numpy().astype(np.float64)


def correlate_model(
    model: JointFaceNet,
    samples: Sequence,
    template: TemplateMesh,
    modality: Modality,
    reduction: Reduction = "mean",
) -> CorrelationMap:
    """
    Encoded features against the model's own predicted offsets, with frames
    pooled over all samples.
    """
    feats, mags = [], []
    with torch.no_grad():
        for s in samples:
            feats.append(encoded_features(model, s, modality))
            pred = MeshSequence(model.predict_vertices(s.mel, s.text, s.speaker, template).cpu().numpy())
            mags.append(to_offsets(pred, template).magnitudes())
    result = pearson_map(np.concatenate(feats), np.concatenate(mags), reduction, modality)
    logger.info("correlation_computed", modality=modality, utterances=len(samples),
                frames=int(sum(len(f) for f in feats)))
    return result

