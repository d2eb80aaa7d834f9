"""
JointFace — Network Building Blocks

    dilated_conv1d   temporal convolution with taps at t−l, t, t+l, zero outside
    tensor_fuse      flattened outer product [h_a; 1] ⊗ [h_l; 1]
    concat_fuse      [h_a; h_l], the fusion baseline

Fused layout (row-major, audio indexes rows), for one frame:

    index(i, j) = i · (d_l + 1) + j      i ∈ [0, d_a], j ∈ [0, d_l]
    i = d_a row    → h_l                 (audio constant)
    j = d_l column → h_a                 (text constant)
    (d_a, d_l)     → 1, the last entry

All functions take (..., features) tensors and broadcast over leading axes.
"""
from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F

from jointface.errors import DimensionError, InputError

DILATIONS = (1, 2, 4, 8)
LEAKY_SLOPE = 0.01


@dataclass(frozen=True)
class DilatedConvSpec:
    filters: int = 128
    kernel_size: int = 3
    dilation: int = 1
    negative_slope: float = LEAKY_SLOPE

    def __post_init__(self):
        if self.dilation not in DILATIONS:
            raise InputError(f"Dilation must be one of {DILATIONS}, got {self.dilation}")
        if self.kernel_size % 2 != 1:
            raise InputError(f"Kernel size must be odd, got {self.kernel_size}")

    @property
    def radius(self) -> int:
        """How far one layer reaches on each side."""
        return (self.kernel_size // 2) * self.dilation


def dilated_conv1d(x: torch.Tensor, spec: DilatedConvSpec, weight: torch.Tensor, bias: torch.Tensor) -> torch.Tensor:
    """T×C input → T×F output, before activation."""
    if x.dim() != 2:
        raise DimensionError(f"Expected a T×C input, got shape {tuple(x.shape)}")
    expected = (spec.filters, x.shape[1], spec.kernel_size)
    if tuple(weight.shape) != expected:
        raise DimensionError(f"Weights must be {expected}, got {tuple(weight.shape)}")
    if tuple(bias.shape) != (spec.filters,):
        raise DimensionError(f"Bias must be ({spec.filters},), got {tuple(bias.shape)}")
    out = F.conv1d(x.T.unsqueeze(0), weight, bias, padding=spec.radius, dilation=spec.dilation)
    return out.squeeze(0).T


def augment(h: torch.Tensor) -> torch.Tensor:
    """Append the constant 1 along the feature axis."""
    return torch.cat([h, torch.ones_like(h[..., :1])], dim=-1)


def tensor_fuse(h_a: torch.Tensor, h_l: torch.Tensor) -> torch.Tensor:
    outer = augment(h_a).unsqueeze(-1) * augment(h_l).unsqueeze(-2)
    return outer.flatten(start_dim=-2)


def concat_fuse(h_a: torch.Tensor, h_l: torch.Tensor) -> torch.Tensor:
    return torch.cat([h_a, h_l], dim=-1)


def fused_slices(fused: torch.Tensor, d_a: int, d_l: int) -> tuple[torch.Tensor, torch.Tensor]:
    """Recover (h_a, h_l) from tensor-fused frames via the constant column and row."""
    if fused.shape[-1] != (d_a + 1) * (d_l + 1):
        raise DimensionError(f"Fused width {fused.shape[-1]} does not match ({d_a}+1)·({d_l}+1)")
    grid = fused.unflatten(-1, (d_a + 1, d_l + 1))
    return grid[..., :d_a, d_l], grid[..., d_a, :d_l]
