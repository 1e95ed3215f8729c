"""Toy-scale drawing agent: network, loss, training loop and action picker,
fed entirely by the outline tooling's exported files."""

from .act import ChosenAction, act, global_argmax, neighborhood_argmax
from .data import SupervisionDataset, downsample_map, downsample_observation
from .formats import load_blob, load_manifest, load_queue
from .losses import LossParts, compute_loss
from .model import FULL_SPEC, TOY_SPEC, NetworkSpec, OutlineNet, ShapeMismatch, build_network
from .train import discounted_targets, train_supervised

__version__ = "0.1.0"

__all__ = [
    "ChosenAction",
    "act",
    "global_argmax",
    "neighborhood_argmax",
    "SupervisionDataset",
    "downsample_map",
    "downsample_observation",
    "load_blob",
    "load_manifest",
    "load_queue",
    "LossParts",
    "compute_loss",
    "FULL_SPEC",
    "TOY_SPEC",
    "NetworkSpec",
    "OutlineNet",
    "ShapeMismatch",
    "build_network",
    "discounted_targets",
    "train_supervised",
    "__version__",
]
