"""
JointFace — Gradients

    gradients                 reverse-mode gradient for every parameter of the
                              network (zeros where a parameter did not reach the
                              loss), plus any requested inputs
    finite_difference_check   central-difference oracle in float64, one entry
                              at a time; returns the relative error per parameter

The finite-difference check is O(parameters) forward passes and is meant for
the tiny test network, not the full-size one.
"""
from __future__ import annotations

from typing import Callable, Dict, Optional, Sequence

import structlog
import torch
import torch.nn as nn

logger = structlog.get_logger()

FD_EPSILON = 1e-5


def gradients(
    loss: torch.Tensor,
    params: nn.Module,
    inputs: Optional[Sequence[torch.Tensor]] = None,
    retain_graph: bool = False,
) -> Dict[str, torch.Tensor]:
    """
    Keys are parameter names; requested inputs come back as "input.0", "input.1", ...
    Every key is present even when its gradient is identically zero.
    """
    named = list(params.named_parameters())
    targets = [p for _, p in named] + list(inputs or [])
    grads = torch.autograd.grad(loss, targets, allow_unused=True, retain_graph=retain_graph)

    names = [n for n, _ in named] + [f"input.{i}" for i in range(len(inputs or []))]
    return {
        name: (g if g is not None else torch.zeros_like(t)).detach()
        for name, g, t in zip(names, grads, targets)
    }


def relative_error(analytic: torch.Tensor, numeric: torch.Tensor) -> float:
    """‖a − n‖ / max(‖a‖, ‖n‖); 0 when both vanish."""
    scale = max(float(analytic.norm()), float(numeric.norm()))
    if scale == 0.0:
        return 0.0
    return float((analytic - numeric).norm()) / scale


def finite_difference_check(
    model: nn.Module,
    loss_fn: Callable[[nn.Module], torch.Tensor],
    eps: float = FD_EPSILON,
) -> Dict[str, float]:
    """
    `loss_fn(model)` must rebuild the scalar loss from scratch on every call.
    The model is switched to float64 for the duration of the check and
    handed back in its original dtype.
    """
    dtype = next(model.parameters()).dtype
    model.double()
    try:
        analytic = gradients(loss_fn(model), model)
        errors: Dict[str, float] = {}
        with torch.no_grad():
            for name, p in model.named_parameters():
                flat = p.view(-1)
                numeric = torch.zeros_like(flat)
                for i in range(flat.numel()):
                    original = flat[i].item()
                    flat[i] = original + eps
                    plus = loss_fn(model).item()
                    flat[i] = original - eps
                    minus = loss_fn(model).item()
                    flat[i] = original
                    numeric[i] = (plus - minus) / (2 * eps)
                errors[name] = relative_error(analytic[name].view(-1), numeric)
    finally:
        model.to(dtype)

    worst = max(errors, key=errors.get) if errors else None
    logger.info(
        "finite_difference_check",
        parameters=len(errors),
        worst_parameter=worst,
        worst_error=errors.get(worst) if worst else 0.0,
    )
    return errors
