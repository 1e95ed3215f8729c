"""Two-term training loss.

The action head is scored with cross-entropy against the integer action code
(the class order of the head's three outputs is the wire order: 0 pen-up,
1 pen-down, 2 draw-finish), the position head with mean squared error against
the dense target map, and the two combine as ``CE + weight * MSE`` with a
default weight of 1.  Both terms are batch means, so a uniform action output
scores ln 3 regardless of batch size.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import torch

from .model import ACTION_CLASSES, ShapeMismatch

_LOG_FLOOR = 1e-12


@dataclass(frozen=True)
class LossParts:
    """Total loss plus its two ingredients, all differentiable scalars."""

    total: torch.Tensor
    action_ce: torch.Tensor
    position_mse: torch.Tensor


def compute_loss(
    outputs: Tuple[torch.Tensor, torch.Tensor],
    targets: Tuple[torch.Tensor, torch.Tensor],
    weight: float = 1.0,
) -> LossParts:
    """Score model ``outputs`` (position map, action probabilities) against
    ``targets`` (target maps, integer action codes)."""
    position, probs = outputs
    target_map, actions = targets
    if probs.ndim != 2 or probs.shape[1] != ACTION_CLASSES:
        raise ShapeMismatch(f"action probabilities must be (B, {ACTION_CLASSES}), got {tuple(probs.shape)}")
    if actions.shape != probs.shape[:1]:
        raise ShapeMismatch(f"need {probs.shape[0]} action targets, got {tuple(actions.shape)}")
    if position.shape != target_map.shape:
        raise ShapeMismatch(
            f"position map {tuple(position.shape)} vs target {tuple(target_map.shape)}"
        )
    picked = probs[torch.arange(probs.shape[0]), actions.long()]
    action_ce = -torch.log(picked.clamp_min(_LOG_FLOOR)).mean()
    position_mse = ((position - target_map) ** 2).mean()
    return LossParts(
        total=action_ce + weight * position_mse,
        action_ce=action_ce,
        position_mse=position_mse,
    )
