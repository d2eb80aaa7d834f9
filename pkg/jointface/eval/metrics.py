"""
JointFace — Region Errors

Mean Euclidean vertex error over the upper and lower face. These are
vertex-space proxies for the action-unit errors of a rendered evaluation:
upper ≈ brows/eyes, lower ≈ mouth/jaw.

A report keeps one row per utterance and pools the aggregate over every
(frame, vertex) pair, so long utterances weigh more.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, List, Sequence

import numpy as np
import pandas as pd
import structlog

from jointface.core.mesh import MeshSequence, TemplateMesh
from jointface.core.regions import RegionMask
from jointface.errors import ConfigurationError, DimensionError, InputError
from jointface.model.inference import infer
from jointface.model.network import JointFaceNet

logger = structlog.get_logger()


@dataclass(frozen=True)
class RegionErrors:
    upper: float
    lower: float


@dataclass(frozen=True)
class UtteranceErrors:
    utterance_id: str
    frames: int
    upper_mae: float
    lower_mae: float


@dataclass
class RegionErrorReport:
    rows: List[UtteranceErrors] = field(default_factory=list)
    upper_vertices: int = 0
    lower_vertices: int = 0

    @property
    def upper_mae(self) -> float:
        return self._pooled("upper_mae")

    @property
    def lower_mae(self) -> float:
        return self._pooled("lower_mae")

    def _pooled(self, column: str) -> float:
        if not self.rows:
            return float("nan")
        frames = np.array([r.frames for r in self.rows], dtype=np.float64)
        values = np.array([getattr(r, column) for r in self.rows], dtype=np.float64)
        return float((frames * values).sum() / frames.sum())

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame([r.__dict__ for r in self.rows], columns=["utterance_id", "frames", "upper_mae", "lower_mae"])
        total = {"utterance_id": "ALL", "frames": int(df["frames"].sum()) if len(df) else 0,
                 "upper_mae": self.upper_mae, "lower_mae": self.lower_mae}
        return pd.concat([df, pd.DataFrame([total])], ignore_index=True)


def _region_distances(pred: MeshSequence, truth: MeshSequence, mask: RegionMask) -> tuple[np.ndarray, np.ndarray]:
    if pred.vertices.shape != truth.vertices.shape:
        raise DimensionError(f"Prediction {pred.vertices.shape} and truth {truth.vertices.shape} differ")
    mask.check_vertex_count(pred.vertex_count)
    dist = np.linalg.norm(pred.vertices.astype(np.float64) - truth.vertices.astype(np.float64), axis=2)
    return dist[:, mask.upper_indices()], dist[:, mask.lower_indices()]


def region_mae(pred: MeshSequence, truth: MeshSequence, mask: RegionMask) -> RegionErrors:
    if not mask.upper or not mask.lower:
        raise ConfigurationError("Region mask has an empty region")
    upper, lower = _region_distances(pred, truth, mask)
    return RegionErrors(float(upper.mean()), float(lower.mean()))


def merge_reports(reports: Iterable[RegionErrorReport]) -> RegionErrorReport:
    """Union of rows ordered by utterance id; an id may appear only once."""
    rows = {}
    merged = RegionErrorReport()
    for report in reports:
        for row in report.rows:
            if row.utterance_id in rows:
                raise InputError(f"Utterance {row.utterance_id!r} appears in more than one report")
            rows[row.utterance_id] = row
        merged.upper_vertices = merged.upper_vertices or report.upper_vertices
        merged.lower_vertices = merged.lower_vertices or report.lower_vertices
    merged.rows = [rows[k] for k in sorted(rows)]
    return merged


def report_for(pairs: Iterable[tuple[str, MeshSequence, MeshSequence]], mask: RegionMask) -> RegionErrorReport:
    report = RegionErrorReport(upper_vertices=len(mask.upper), lower_vertices=len(mask.lower))
    for utterance_id, pred, truth in pairs:
        errors = region_mae(pred, truth, mask)
        report.rows.append(UtteranceErrors(utterance_id, truth.frame_count, errors.upper, errors.lower))
    report.rows.sort(key=lambda r: r.utterance_id)
    return report


def evaluate_model(model: JointFaceNet, samples: Sequence, template: TemplateMesh, mask: RegionMask) -> RegionErrorReport:
    """Inference on every sample with its own speaker, scored against its ground truth."""
    pairs = []
    for s in samples:
        if s.truth is None:
            raise InputError(f"Utterance {s.utterance_id!r} has no ground truth to evaluate against")
        pred = infer(model, s.mel, s.text, s.speaker, template, s.truth.frame_rate)
        pairs.append((s.utterance_id, pred, s.truth))
    report = report_for(pairs, mask)
    logger.info("model_evaluated", utterances=len(report.rows),
                upper_mae=round(report.upper_mae, 6), lower_mae=round(report.lower_mae, 6))
    return report
