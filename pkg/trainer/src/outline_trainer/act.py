"""Turning network outputs into environment actions.

The action kind is the argmax of the three probabilities (wire order: pen-up,
pen-down, draw-finish).  A pen-down also needs a position, read off the
position map: the global maximum when the pen is up, otherwise the maximum
inside a 50-pixel disk around the current pen position, since the environment
rejects longer jumps.

Both the phase and the pen position are recovered from the observation
itself: its fifth channel marks the last pen position with 1.0 while the pen
is down and is all-zero otherwise, so no side channel is needed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import torch

from .formats import ACTION_NAMES

NEIGHBORHOOD_RADIUS = 50.0
PEN_CHANNEL = 4


@dataclass(frozen=True)
class ChosenAction:
    kind: str
    position: Optional[Tuple[int, int]] = None


def global_argmax(position_map: np.ndarray) -> Tuple[int, int]:
    """(x, y) of the map maximum; row-major first on ties."""
    y, x = np.unravel_index(int(np.argmax(position_map)), position_map.shape)
    return int(x), int(y)


def neighborhood_argmax(
    position_map: np.ndarray, center: Tuple[int, int], radius: float = NEIGHBORHOOD_RADIUS
) -> Tuple[int, int]:
    """(x, y) of the map maximum within ``radius`` pixels of ``center``."""
    cx, cy = center
    h, w = position_map.shape
    yy, xx = np.ogrid[:h, :w]
    inside = (xx - cx) ** 2 + (yy - cy) ** 2 <= radius * radius
    masked = np.where(inside, position_map, -np.inf)
    return global_argmax(masked)


def act(model, observation: np.ndarray) -> ChosenAction:
    """Pick the greedy action for one (5, S, S) observation."""
    obs = torch.as_tensor(np.asarray(observation, dtype=np.float32)).unsqueeze(0)
    with torch.inference_mode():
        position_map, probs = model(obs)
    kind = ACTION_NAMES[int(torch.argmax(probs[0]))]
    if kind != "pen-down":
        return ChosenAction(kind)
    pmap = position_map[0].numpy()
    pen = np.asarray(observation)[PEN_CHANNEL]
    if pen.max() > 0.5:
        return ChosenAction(kind, neighborhood_argmax(pmap, global_argmax(pen)))
    return ChosenAction(kind, global_argmax(pmap))
