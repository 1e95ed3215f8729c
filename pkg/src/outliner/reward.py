"""Reward engine for the outline-drawing environment.

Three ingredients combine per step:

* a contour term: the sum of blurred ground-truth boundary values under the
  newly drawn trace pixels, divided by a normalizer ``alpha``;
* a region term: greedily matched IoU between completed polygons and ground
  truth, averaged over the number of ground-truth polygons;
* a flat penalty for the two wasted transitions (pen-up twice in a row, or
  finishing without having drawn).

Which terms apply depends only on the (phase, action) pair:

    (pen-up,   pen-up)      -> penalty
    (pen-up,   pen-down)    -> contour
    (pen-up,   draw-finish) -> penalty
    (pen-down, pen-up)      -> contour + region
    (pen-down, pen-down)    -> contour
    (pen-down, draw-finish) -> contour + region

Any other pair raises InvalidTransition.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .geometry import PixelPoint, Polygon, outline_pixels, rasterize_polygon_fill, rasterize_segment
from .gridops import scale_to_unit, truncated_gaussian_blur
from .statemap import ActionKind, DrawingState, Phase


class InvalidTransition(Exception):
    """(phase, action) pair outside the six-cell dispatch table."""


@dataclass(frozen=True)
class RewardConfig:
    alpha: float = 0.05
    blur_window: int = 9
    blur_sigma: float = 2.0
    penalty: float = -1.0

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.blur_window < 1 or self.blur_window % 2 == 0:
            raise ValueError(f"blur window must be odd, got {self.blur_window}")
        if self.blur_sigma <= 0:
            raise ValueError(f"blur sigma must be positive, got {self.blur_sigma}")


@dataclass(frozen=True)
class RewardBreakdown:
    """Per-step reward components; ``total`` is always their sum."""

    contour: float = 0.0
    region: float = 0.0
    penalty: float = 0.0

    @property
    def total(self) -> float:
        return self.contour + self.region + self.penalty


def build_boundary_map(
    truth: Sequence[Polygon], width: int, height: int, cfg: RewardConfig = RewardConfig()
) -> np.ndarray:
    """Blurred ground-truth boundary map.

    All polygon edges (closing edge included) are rasterized at 1.0, smoothed
    with the truncated Gaussian, then rescaled so the maximum is exactly 1.0.
    With no polygons the map is all-zero.
    """
    grid = np.zeros((height, width), dtype=np.float32)
    for poly in truth:
        for p in outline_pixels(poly.vertices, closed=True):
            grid[p.y, p.x] = 1.0
    blurred = truncated_gaussian_blur(grid, cfg.blur_window, cfg.blur_sigma)
    return scale_to_unit(blurred)


def contour_reward(
    boundary_map: np.ndarray, trace: Sequence[PixelPoint], cfg: RewardConfig = RewardConfig()
) -> float:
    """Sum of boundary-map values at the trace pixels, divided by alpha."""
    total = 0.0
    for p in trace:
        total += float(boundary_map[p.y, p.x])
    return total / cfg.alpha


def trace_points_for(
    state: DrawingState, action: ActionKind, position: Optional[PixelPoint] = None
) -> List[PixelPoint]:
    """Pixels newly drawn by ``action`` taken from ``state``.

    * pen-down from pen-up: the single new point;
    * pen-down from pen-down: the segment from the last pen position to the
      new one, excluding the (already drawn) start pixel;
    * pen-up / draw-finish from pen-down: the closing segment back to the
      polyline's first vertex, excluding the start pixel;
    * pen-up / draw-finish from pen-up: nothing is drawn.
    """
    if state.phase == Phase.PEN_UP:
        if action == ActionKind.PEN_DOWN:
            if position is None:
                raise InvalidTransition("pen-down needs a position")
            return [position]
        if action in (ActionKind.PEN_UP, ActionKind.DRAW_FINISH):
            return []
    elif state.phase == Phase.PEN_DOWN:
        last = state.last_pen
        if action == ActionKind.PEN_DOWN:
            if position is None:
                raise InvalidTransition("pen-down needs a position")
            return rasterize_segment(last, position)[1:]
        if action in (ActionKind.PEN_UP, ActionKind.DRAW_FINISH):
            return rasterize_segment(last, state.current[0])[1:]
    raise InvalidTransition(f"no transition for ({state.phase.value}, {action.value})")


def _iou_matrix(found: Sequence[Polygon], truth: Sequence[Polygon], width: int, height: int) -> np.ndarray:
    found_masks = [rasterize_polygon_fill(p, width, height) for p in found]
    truth_masks = [rasterize_polygon_fill(t, width, height) for t in truth]
    m = np.zeros((len(found), len(truth)), dtype=np.float64)
    for i, fm in enumerate(found_masks):
        for j, tm in enumerate(truth_masks):
            union = int(np.logical_or(fm, tm).sum())
            if union:
                m[i, j] = int(np.logical_and(fm, tm).sum()) / union
    return m


def greedy_match(iou: np.ndarray) -> List[tuple]:
    """Greedy assignment by descending IoU; each row and column used at most
    once, zero-IoU pairs never matched.  Ties resolve to the smallest row,
    then the smallest column index."""
    m = iou.copy()
    pairs = []
    while m.size:
        idx = int(np.argmax(m))
        i, j = divmod(idx, m.shape[1])
        best = m[i, j]
        if best <= 0:
            break
        pairs.append((i, j, float(best)))
        m[i, :] = -1.0
        m[:, j] = -1.0
    return pairs


def region_reward(found: Sequence[Polygon], truth: Sequence[Polygon], width: int, height: int) -> float:
    """Mean matched IoU over ground-truth polygons.

    Polygons are matched greedily by descending IoU; unmatched ones contribute
    zero.  The divisor is the ground-truth count, so with no ground truth the
    reward is 0.0.
    """
    if not truth:
        return 0.0
    if not found:
        return 0.0
    matrix = _iou_matrix(found, truth, width, height)
    matched = greedy_match(matrix)
    return sum(v for _, _, v in matched) / len(truth)


_DISPATCH = {
    (Phase.PEN_UP, ActionKind.PEN_UP): ("penalty",),
    (Phase.PEN_UP, ActionKind.PEN_DOWN): ("contour",),
    (Phase.PEN_UP, ActionKind.DRAW_FINISH): ("penalty",),
    (Phase.PEN_DOWN, ActionKind.PEN_UP): ("contour", "region"),
    (Phase.PEN_DOWN, ActionKind.PEN_DOWN): ("contour",),
    (Phase.PEN_DOWN, ActionKind.DRAW_FINISH): ("contour", "region"),
}


def dispatch_reward(
    phase: Phase,
    action: ActionKind,
    contour: float = 0.0,
    region: float = 0.0,
    cfg: RewardConfig = RewardConfig(),
) -> RewardBreakdown:
    """Assemble the step's RewardBreakdown for the (phase, action) cell.

    Only the components named by the cell appear in the breakdown; the others
    are exactly zero.
    """
    try:
        parts = _DISPATCH[(phase, action)]
    except KeyError:
        raise InvalidTransition(f"no reward cell for ({phase.value}, {action.value})") from None
    return RewardBreakdown(
        contour=contour if "contour" in parts else 0.0,
        region=region if "region" in parts else 0.0,
        penalty=cfg.penalty if "penalty" in parts else 0.0,
    )
