"""
JointFace — Modality Ablation

Trains and scores the four input/fusion variants per seed:

    label               fusion mode
    Audio Only          audio_only
    Text Only           text_only
    Audio+Text (C)      concat
    Audio+Text (TF)     tensor

Every variant of a seed sees the same initial seed and the same sample
order; only the fusion (and the encoders it needs) differs. The summary is
mean and spread (population std) of upper/lower error over seeds.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import pandas as pd
import structlog

from jointface.core.mesh import TemplateMesh
from jointface.core.regions import RegionMask
from jointface.errors import ConfigurationError
from jointface.eval.metrics import evaluate_model
from jointface.model.network import FusionMode
from jointface.train.loop import TrainConfig, train

logger = structlog.get_logger()

VARIANTS = (
    ("Audio Only", FusionMode.AUDIO_ONLY),
    ("Text Only", FusionMode.TEXT_ONLY),
    ("Audio+Text (C)", FusionMode.CONCAT),
    ("Audio+Text (TF)", FusionMode.TENSOR),
)


@dataclass
class AblationResult:
    rows: pd.DataFrame       # label, fusion_mode, seed, upper_mae, lower_mae, final_loss, checkpoint_hash
    summary: pd.DataFrame    # label, upper_mean, upper_std, lower_mean, lower_std, seeds

    def mean(self, label: str, region: str) -> float:
        row = self.summary[self.summary["label"] == label]
        return float(row[f"{region}_mean"].iloc[0])

    @property
    def checkpoint_hash(self) -> Optional[str]:
        """sha256 over the sorted per-run checkpoint hashes; None when runs were not saved."""
        hashes = self.rows["checkpoint_hash"]
        if hashes.isna().any():
            return None
        return hashlib.sha256("\n".join(sorted(hashes)).encode()).hexdigest()


def run_ablation(
    base_config: TrainConfig,
    dataset: Sequence,
    test_set: Sequence,
    template: TemplateMesh,
    speakers: int,
    mask: RegionMask,
    seeds: Sequence[int],
    out_dir: Optional[Path] = None,
) -> AblationResult:
    if not seeds:
        raise ConfigurationError("Ablation needs at least one seed")
    if not test_set:
        raise ConfigurationError("Ablation needs a non-empty test set")

    records = []
    for seed in seeds:
        for label, mode in VARIANTS:
            variant_dir = Path(out_dir) / f"seed{seed}" / mode.value if out_dir else None
            config = base_config.model_copy(update={
                "seed": int(seed),
                "fusion_mode": mode.value,
                "out_dir": str(variant_dir) if variant_dir else None,
            })
            result = train(config, dataset, template, speakers)
            report = evaluate_model(result.model, test_set, template, mask)
            records.append({
                "label": label,
                "fusion_mode": mode.value,
                "seed": int(seed),
                "upper_mae": report.upper_mae,
                "lower_mae": report.lower_mae,
                "final_loss": result.epoch_losses[-1],
                "checkpoint_hash": result.checkpoint_hash,
            })
            logger.info("ablation_variant_done", label=label, seed=seed,
                        upper_mae=round(report.upper_mae, 6), lower_mae=round(report.lower_mae, 6))

    rows = pd.DataFrame(records)
    order = {label: i for i, (label, _) in enumerate(VARIANTS)}
    summary = (
        rows.groupby("label", sort=False)
        .agg(
            upper_mean=("upper_mae", "mean"),
            upper_std=("upper_mae", lambda s: s.std(ddof=0)),
            lower_mean=("lower_mae", "mean"),
            lower_std=("lower_mae", lambda s: s.std(ddof=0)),
            seeds=("seed", "count"),
        )
        .reset_index()
    )
    summary = summary.sort_values("label", key=lambda s: s.map(order)).reset_index(drop=True)
    return AblationResult(rows, summary)
