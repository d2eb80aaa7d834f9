"""
JointFace — Adam

Bias-corrected Adam on top of torch.optim.Adam. AdamState owns the optimizer
so the moments persist across steps; gradients are handed in explicitly (as
returned by `gradients`) and checked for finiteness before anything moves.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional

import torch
import torch.nn as nn

from jointface.errors import InputError, TrainingAborted

BETA1 = 0.9
BETA2 = 0.999
EPSILON = 1e-8


@dataclass
class AdamState:
    beta1: float = BETA1
    beta2: float = BETA2
    epsilon: float = EPSILON
    step: int = 0
    optimizer: Optional[torch.optim.Adam] = field(default=None, repr=False)

    def hyperparameters(self) -> Dict[str, float]:
        return {"beta1": self.beta1, "beta2": self.beta2, "epsilon": self.epsilon}

    def moments(self, params: nn.Module) -> Dict[str, tuple]:
        """(m, v) per parameter name; empty before the first step."""
        if self.optimizer is None:
            return {}
        out = {}
        for name, p in params.named_parameters():
            s = self.optimizer.state.get(p)
            if s:
                out[name] = (s["exp_avg"], s["exp_avg_sq"])
        return out


def adam_step(params: nn.Module, grads: Mapping[str, torch.Tensor], state: AdamState, lr: float) -> None:
    if not lr > 0:
        raise InputError(f"Learning rate must be positive, got {lr}")
    named = list(params.named_parameters())
    for name, _ in named:
        g = grads.get(name)
        if g is None:
            raise InputError(f"No gradient supplied for parameter {name}")
        if not bool(torch.isfinite(g).all()):
            raise TrainingAborted("non-finite gradient", parameter=name)

    if state.optimizer is None:
        state.optimizer = torch.optim.Adam(
            [p for _, p in named], lr=lr, betas=(state.beta1, state.beta2), eps=state.epsilon,
        )
    for group in state.optimizer.param_groups:
        group["lr"] = lr

    for name, p in named:
        p.grad = grads[name].to(p.dtype)
    state.optimizer.step()
    state.step += 1

    for name, p in named:
        if not math.isfinite(float(p.detach().abs().max())):
            raise TrainingAborted("parameter became non-finite", parameter=name)
