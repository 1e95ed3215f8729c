"""Supervised training loop and replay-derived value targets.

Training follows the reference recipe: RMSProp at learning rate 1e-6,
mini-batches of 5, loss = action cross-entropy + position MSE.  The loop is
fully deterministic for a given seed (weight init, batch order and torch ops
all derive from it).  Raising the learning rate to 1e-3 lets the toy network
overfit a ten-sample dataset in well under 2000 steps, which is the cheap
end-to-end health check for the whole stack.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
import torch

from .data import SupervisionDataset
from .losses import compute_loss
from .model import NetworkSpec, OutlineNet, build_network

log = logging.getLogger(__name__)

DEFAULT_LR = 1e-6
DEFAULT_BATCH = 5
DEFAULT_GAMMA = 0.95


def train_supervised(
    manifest_path,
    steps: int,
    seed: int = 0,
    scale: Union[str, NetworkSpec] = "toy",
    lr: float = DEFAULT_LR,
    batch_size: int = DEFAULT_BATCH,
    weight: float = 1.0,
    out_dir=None,
    model: Optional[OutlineNet] = None,
) -> List[float]:
    """Train on an exported dataset; returns the per-step loss curve.

    Zero steps return an empty curve.  When ``out_dir`` is given, the final
    weights land in ``checkpoint.pt`` and the curve in ``loss_curve.json``.
    A caller-supplied ``model`` continues training in place; otherwise a
    fresh seeded network is built at ``scale``.
    """
    if model is None:
        model = build_network(scale, seed=seed)
    dataset = SupervisionDataset(manifest_path, model.spec.input_size)
    if steps and not len(dataset):
        raise ValueError(f"{manifest_path}: dataset is empty")
    rng = np.random.default_rng(seed)
    optimizer = torch.optim.RMSprop(model.parameters(), lr=lr)
    curve: List[float] = []
    model.train()
    for _ in range(steps):
        indices = rng.integers(0, len(dataset), size=batch_size)
        obs, maps, actions = dataset.batch(indices.tolist())
        optimizer.zero_grad()
        parts = compute_loss(model(obs), (maps, actions), weight=weight)
        parts.total.backward()
        optimizer.step()
        curve.append(float(parts.total.detach()))
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        torch.save(model.state_dict(), out_dir / "checkpoint.pt")
        (out_dir / "loss_curve.json").write_text(json.dumps(curve))
        log.info("saved checkpoint and %d-step loss curve to %s", len(curve), out_dir)
    return curve


def discounted_targets(
    rewards: Sequence[float],
    dones: Sequence[bool],
    gamma: float = DEFAULT_GAMMA,
) -> np.ndarray:
    """Discounted returns over a step sequence, cut at episode boundaries.

    ``G[t] = r[t] + gamma * G[t+1]`` with the bootstrap zeroed where
    ``dones[t]`` is set.  Feed it the per-step reward totals of replay-queue
    entries (oldest first) to build value targets.
    """
    if len(rewards) != len(dones):
        raise ValueError(f"{len(rewards)} rewards vs {len(dones)} done flags")
    out = np.zeros(len(rewards), dtype=np.float64)
    running = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        running = float(rewards[t]) + (0.0 if dones[t] else gamma * running)
        out[t] = running
    return out
