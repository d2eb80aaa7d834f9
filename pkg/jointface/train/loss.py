"""
JointFace — Vertex Loss

    L = Σ_t Σ_v ‖ỹ_t,v − y_t,v‖²

With normalize=True (the training default) the sum is divided by T·V, so the
same learning rate works for a 338-vertex test face and a 23370-vertex scan.
"""
from __future__ import annotations

import numpy as np
import torch

from jointface.core.mesh import MeshSequence
from jointface.errors import DimensionError


def _as_tensor(x, like: torch.Tensor | None = None) -> torch.Tensor:
    if isinstance(x, MeshSequence):
        x = x.vertices
    if isinstance(x, torch.Tensor):
        return x
    dtype = like.dtype if like is not None else torch.float64
    return torch.as_tensor(np.asarray(x), dtype=dtype)


def mse_loss(pred, truth, normalize: bool = False) -> torch.Tensor:
    """pred and truth are T × V × 3 (tensors, arrays or MeshSequences)."""
    p = _as_tensor(pred)
    y = _as_tensor(truth, like=p).to(p.dtype)
    if p.shape != y.shape:
        raise DimensionError(f"Prediction shape {tuple(p.shape)} does not match truth {tuple(y.shape)}")
    if p.dim() != 3 or p.shape[2] != 3:
        raise DimensionError(f"Expected T × V × 3, got {tuple(p.shape)}")
    total = ((p - y) ** 2).sum()
    if normalize:
        total = total / (p.shape[0] * p.shape[1])
    return total
