"""Exported-dataset loading and resolution reduction.

Blobs arrive at the export resolution (640 for the real pipeline); the toy
network trains at 32.  Downsampling is factor-exact pooling: image channels
are mean-pooled, while the two state-map channels and the target position map
are max-pooled so their sparse 1.0 markers survive the reduction.
"""

from __future__ import annotations

from typing import List, Sequence, Tuple

import numpy as np
import torch

from .formats import SampleRecord, load_blob, load_manifest

IMAGE_CHANNELS = 3


def _pool(arr: np.ndarray, factor: int, reduce: str) -> np.ndarray:
    h, w = arr.shape[-2:]
    blocked = arr.reshape(*arr.shape[:-2], h // factor, factor, w // factor, factor)
    op = blocked.max if reduce == "max" else blocked.mean
    return np.ascontiguousarray(op(axis=(-3, -1)), dtype=np.float32)


def _factor(current: int, size: int) -> int:
    if current % size:
        raise ValueError(f"cannot pool {current} px down to {size} px exactly")
    return current // size


def downsample_map(target_map: np.ndarray, size: int) -> np.ndarray:
    """Max-pool a (H, H) map to (size, size), preserving its peak value."""
    return _pool(np.asarray(target_map), _factor(target_map.shape[-1], size), "max")


def downsample_observation(obs: np.ndarray, size: int) -> np.ndarray:
    """Pool a (5, H, H) observation to (5, size, size)."""
    obs = np.asarray(obs)
    factor = _factor(obs.shape[-1], size)
    rgb = _pool(obs[:IMAGE_CHANNELS], factor, "mean")
    maps = _pool(obs[IMAGE_CHANNELS:], factor, "max")
    return np.concatenate([rgb, maps], axis=0)


class SupervisionDataset:
    """All samples of one exported manifest, pooled to ``input_size``.

    Samples are loaded once at construction (one blob pair at a time) and
    kept at the reduced resolution, so memory stays proportional to the
    pooled size rather than the export size.
    """

    def __init__(self, manifest_path, input_size: int):
        self.input_size = input_size
        self.records: List[SampleRecord] = load_manifest(manifest_path)
        self._obs: List[np.ndarray] = []
        self._maps: List[np.ndarray] = []
        self._actions: List[int] = []
        for rec in self.records:
            obs = load_blob(rec.observation_path)
            tmap = load_blob(rec.position_map_path)
            if obs.ndim != 3 or obs.shape[0] != 5 or obs.shape[1:] != tmap.shape:
                raise ValueError(
                    f"{rec.observation_path.name}: observation {obs.shape} does not "
                    f"pair with map {tmap.shape}"
                )
            self._obs.append(downsample_observation(obs, input_size))
            self._maps.append(downsample_map(tmap, input_size))
            self._actions.append(rec.action)

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, i: int) -> Tuple[np.ndarray, np.ndarray, int]:
        return self._obs[i], self._maps[i], self._actions[i]

    def batch(self, indices: Sequence[int]) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """Stack the given samples into (obs, target map, action) tensors."""
        obs = torch.from_numpy(np.stack([self._obs[i] for i in indices]))
        maps = torch.from_numpy(np.stack([self._maps[i] for i in indices]))
        actions = torch.tensor([self._actions[i] for i in indices], dtype=torch.long)
        return obs, maps, actions
