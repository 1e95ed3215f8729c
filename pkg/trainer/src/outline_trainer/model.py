"""The two-headed drawing network.

The body is a stack of dual-resolution blocks.  Each block runs three 3x3
stride-1 convolutions at its width (ReLU after every convolution), hands its
features sideways through a three-convolution 48-channel branch, and passes
them down through a 2x2 max pool to the next block.  Coming back up, each
block's sideways features are concatenated with the upsampled output of the
block below and refined by another three 48-channel convolutions; the deepest
block has no lower input and refines its sideways features alone.

Two heads read the result: a single-channel 3x3 convolution with a sigmoid
turns the top block's up-branch output into a position map at input
resolution (values in (0,1), not normalized to sum to 1), and three fully
connected layers (128, 128, 3) with a softmax turn the deepest features into
action probabilities.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import torch
from torch import nn

log = logging.getLogger(__name__)

BRANCH_CHANNELS = 48
ACTION_CLASSES = 3


class ShapeMismatch(Exception):
    """Input or configuration does not fit the network's fixed geometry."""


@dataclass(frozen=True)
class NetworkSpec:
    """Geometry of one network variant."""

    input_size: int
    widths: Tuple[int, ...]
    in_channels: int = 5
    action_hidden: int = 128

    def __post_init__(self):
        if not self.widths:
            raise ShapeMismatch("at least one block width required")
        poolings = len(self.widths) - 1
        if self.input_size % (2**poolings):
            raise ShapeMismatch(
                f"input size {self.input_size} does not survive {poolings} 2x2 poolings"
            )

    @property
    def lowest_resolution(self) -> int:
        return self.input_size // (2 ** (len(self.widths) - 1))


FULL_SPEC = NetworkSpec(input_size=640, widths=(96, 128, 128, 256, 256, 512, 512))
TOY_SPEC = NetworkSpec(input_size=32, widths=(16, 32))


def _conv_stack(channels: Sequence[int]) -> nn.Sequential:
    layers = []
    for cin, cout in zip(channels, channels[1:]):
        layers += [nn.Conv2d(cin, cout, kernel_size=3, padding=1), nn.ReLU(inplace=True)]
    return nn.Sequential(*layers)


class DualResBlock(nn.Module):
    """One block: three convs at ``width``, plus the two 48-channel branches."""

    def __init__(self, in_channels: int, width: int, deepest: bool):
        super().__init__()
        self.down = _conv_stack((in_channels, width, width, width))
        self.horizontal = _conv_stack((width, BRANCH_CHANNELS, BRANCH_CHANNELS, BRANCH_CHANNELS))
        up_in = BRANCH_CHANNELS if deepest else 2 * BRANCH_CHANNELS
        self.upward = _conv_stack((up_in, BRANCH_CHANNELS, BRANCH_CHANNELS, BRANCH_CHANNELS))

    def descend(self, x: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        """Returns (features for the next block, sideways branch output)."""
        feat = self.down(x)
        return feat, self.horizontal(feat)

    def ascend(self, side: torch.Tensor, below: Optional[torch.Tensor]) -> torch.Tensor:
        if below is None:
            return self.upward(side)
        up = nn.functional.interpolate(below, scale_factor=2, mode="nearest")
        return self.upward(torch.cat([side, up], dim=1))


class OutlineNet(nn.Module):
    """Stacked dual-resolution blocks with position and action heads."""

    def __init__(self, spec: NetworkSpec):
        super().__init__()
        self.spec = spec
        blocks = []
        cin = spec.in_channels
        for i, width in enumerate(spec.widths):
            blocks.append(DualResBlock(cin, width, deepest=i == len(spec.widths) - 1))
            cin = width
        self.blocks = nn.ModuleList(blocks)
        self.pool = nn.MaxPool2d(2)
        self.position_out = nn.Conv2d(BRANCH_CHANNELS, 1, kernel_size=3, padding=1)
        flat = spec.widths[-1] * spec.lowest_resolution**2
        self.action_head = nn.Sequential(
            nn.Flatten(),
            nn.Linear(flat, spec.action_hidden),
            nn.ReLU(inplace=True),
            nn.Linear(spec.action_hidden, spec.action_hidden),
            nn.ReLU(inplace=True),
            nn.Linear(spec.action_hidden, ACTION_CLASSES),
        )

    @property
    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())

    def forward(self, obs: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        """(B, C, S, S) observations -> ((B, S, S) position map, (B, 3) probs)."""
        expected = (self.spec.in_channels, self.spec.input_size, self.spec.input_size)
        if obs.ndim != 4 or tuple(obs.shape[1:]) != expected:
            raise ShapeMismatch(f"expected (B, {', '.join(map(str, expected))}), got {tuple(obs.shape)}")
        sides = []
        x = obs
        for i, block in enumerate(self.blocks):
            if i:
                x = self.pool(x)
            x, side = block.descend(x)
            sides.append(side)
        probs = torch.softmax(self.action_head(x), dim=1)
        up = None
        for block, side in zip(reversed(self.blocks), reversed(sides)):
            up = block.ascend(side, up)
        position = torch.sigmoid(self.position_out(up)).squeeze(1)
        return position, probs


def build_network(
    scale: Union[str, NetworkSpec] = "toy", seed: Optional[int] = None
) -> OutlineNet:
    """Construct a network at ``"full"`` or ``"toy"`` scale (or a custom spec).

    A seed makes the weight initialization reproducible.  The parameter count
    is reported on the module logger.
    """
    if isinstance(scale, NetworkSpec):
        spec = scale
    elif scale == "full":
        spec = FULL_SPEC
    elif scale == "toy":
        spec = TOY_SPEC
    else:
        raise ValueError(f"scale must be 'full', 'toy' or a NetworkSpec, got {scale!r}")
    if seed is not None:
        torch.manual_seed(seed)
    model = OutlineNet(spec)
    log.info("built %s-scale network: %d parameters", scale, model.parameter_count)
    return model
