"""
JointFace — Training Package
Re-exports for convenience.
"""
from jointface.train.dataset import (
    Corpus,
    CorpusManifest,
    Sample,
    load_manifest,
    prepare_dataset,
    prepare_inputs,
    resolve_provider,
)
from jointface.train.loop import TrainConfig, TrainResult, train
from jointface.train.loss import mse_loss
from jointface.train.optim import AdamState, adam_step
