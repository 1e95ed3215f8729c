"""The outline-drawing environment.

An episode binds one letterboxed RGB image and its ground-truth polygons.
The agent alternates pen-up / pen-down(position) actions to trace polygon
outlines and ends the episode with draw-finish.  Consecutive pen positions of
one polygon may be at most ``max_step_px`` apart (the first pen-down of a
polygon is unconstrained).  Each step returns a 5-channel observation (RGB
plus the two state maps), a reward breakdown and a done flag.

Errors raised by :meth:`OutlineEnv.step` never mutate the episode state.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .geometry import DegeneratePolygon, PixelPoint, Polygon, iter_edges, round_half_away
from .reward import (
    RewardBreakdown,
    RewardConfig,
    build_boundary_map,
    contour_reward,
    dispatch_reward,
    region_reward,
    trace_points_for,
)
from .statemap import ActionKind, DrawingState, Phase, StateMaps, render_state_maps

log = logging.getLogger(__name__)


class EpisodeFinished(Exception):
    """step() called after the episode ended."""


class InvalidPosition(Exception):
    """Pen-down position outside the image grid."""


class StepTooLong(Exception):
    """Consecutive pen positions farther apart than the step limit."""


@dataclass(frozen=True)
class Action:
    kind: ActionKind
    position: Optional[PixelPoint] = None

    def __post_init__(self):
        if self.kind == ActionKind.PEN_DOWN and self.position is None:
            raise ValueError("pen-down requires a position")
        if self.kind != ActionKind.PEN_DOWN and self.position is not None:
            raise ValueError(f"{self.kind.value} takes no position")


@dataclass(frozen=True)
class EpisodeConfig:
    max_step_px: float = 50.0
    max_steps: int = 1000
    min_polygon_vertices: int = 3
    reward: RewardConfig = field(default_factory=RewardConfig)


@dataclass(frozen=True)
class Observation:
    """RGB image in [0, 1] plus the two state maps."""

    image: np.ndarray
    maps: StateMaps

    def tensor(self) -> np.ndarray:
        """(5, height, width) float32: R, G, B, map1, map2."""
        chans = np.transpose(self.image, (2, 0, 1)).astype(np.float32)
        return np.concatenate(
            [chans, self.maps.map1[None, :, :], self.maps.map2[None, :, :]], axis=0
        )


@dataclass(frozen=True)
class StepOutcome:
    observation: Observation
    reward: RewardBreakdown
    done: bool
    info: dict


def _normalize_image(image: np.ndarray) -> np.ndarray:
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) image, got {image.shape}")
    if image.dtype == np.uint8:
        return (image.astype(np.float32)) / 255.0
    img = image.astype(np.float32)
    if img.size and (float(img.min()) < 0.0 or float(img.max()) > 1.0):
        raise ValueError("float image values must lie in [0, 1]")
    return img


class OutlineEnv:
    """Deterministic drawing environment over one image at a time."""

    def __init__(self, config: EpisodeConfig = EpisodeConfig()):
        self.config = config
        self._image: Optional[np.ndarray] = None
        self._truth: Tuple[Polygon, ...] = ()
        self._bmap: Optional[np.ndarray] = None
        self._state = DrawingState()
        self._steps = 0
        self._done = True
        self._observation: Optional[Observation] = None

    @property
    def state(self) -> DrawingState:
        return self._state

    @property
    def done(self) -> bool:
        return self._done

    @property
    def steps_taken(self) -> int:
        return self._steps

    @property
    def truth(self) -> Tuple[Polygon, ...]:
        return self._truth

    @property
    def boundary_map(self) -> np.ndarray:
        if self._bmap is None:
            raise RuntimeError("reset() must run before the boundary map exists")
        return self._bmap

    @property
    def observation(self) -> Observation:
        if self._observation is None:
            raise RuntimeError("reset() must run before observations exist")
        return self._observation

    @property
    def grid_size(self) -> Tuple[int, int]:
        """(width, height) of the bound image."""
        h, w = self._image.shape[:2]
        return w, h

    def reset(self, image: np.ndarray, truth: Sequence[Polygon] = ()) -> Observation:
        """Bind an image and its ground truth and start a fresh episode."""
        self._image = _normalize_image(image)
        h, w = self._image.shape[:2]
        self._truth = tuple(truth)
        self._bmap = build_boundary_map(self._truth, w, h, self.config.reward)
        self._state = DrawingState()
        self._steps = 0
        self._done = False
        self._observation = Observation(image=self._image, maps=render_state_maps(self._state, w, h))
        return self._observation

    def step(self, action: Action) -> StepOutcome:
        if self._done:
            raise EpisodeFinished("episode is over; call reset()")
        state = self._state
        phase = state.phase
        kind = action.kind
        w, h = self.grid_size

        pos = action.position
        if kind == ActionKind.PEN_DOWN:
            if not (0 <= pos.x < w and 0 <= pos.y < h):
                raise InvalidPosition(f"({pos.x},{pos.y}) outside {w}x{h} grid")
            if phase == Phase.PEN_DOWN:
                dist = state.last_pen.distance_to(pos)
                if dist > self.config.max_step_px:
                    raise StepTooLong(
                        f"{dist:.1f}px exceeds the {self.config.max_step_px:.0f}px step limit"
                    )

        trace = trace_points_for(state, kind, pos)
        contour = contour_reward(self._bmap, trace, self.config.reward)

        discarded = False
        found = state.found
        current = state.current
        if kind == ActionKind.PEN_DOWN:
            if phase == Phase.PEN_UP:
                current = (pos,)
            elif pos != state.last_pen:
                current = current + (pos,)
            new_phase = Phase.PEN_DOWN
        else:
            if phase == Phase.PEN_DOWN:
                poly = self._close_polygon(current)
                if poly is not None:
                    found = found + (poly,)
                else:
                    discarded = True
            current = ()
            new_phase = Phase.PEN_UP if kind == ActionKind.PEN_UP else Phase.DRAW_FINISH
        new_state = DrawingState(found=found, current=current, phase=new_phase)

        region = 0.0
        if phase == Phase.PEN_DOWN and kind in (ActionKind.PEN_UP, ActionKind.DRAW_FINISH):
            region = region_reward(new_state.found, self._truth, w, h)

        if discarded:
            reward = RewardBreakdown(penalty=self.config.reward.penalty)
        else:
            reward = dispatch_reward(phase, kind, contour, region, self.config.reward)

        self._state = new_state
        self._steps += 1
        self._done = kind == ActionKind.DRAW_FINISH or self._steps >= self.config.max_steps
        self._observation = Observation(
            image=self._image, maps=render_state_maps(new_state, w, h)
        )
        info = {
            "action": kind.value,
            "position": (pos.x, pos.y) if pos is not None else None,
            "discarded_polygon": discarded,
            "step": self._steps,
        }
        return StepOutcome(self._observation, reward, self._done, info)

    def _close_polygon(self, current: Tuple[PixelPoint, ...]) -> Optional[Polygon]:
        if len(current) < self.config.min_polygon_vertices:
            return None
        try:
            return Polygon(current)
        except DegeneratePolygon:
            log.debug("discarding degenerate polygon with %d vertices", len(current))
            return None


def scripted_actions(
    truth: Sequence[Polygon], vertex_stride: float, max_step_px: float = 50.0
) -> List[Action]:
    """Ground-truth replay script: pen-down along every polygon's edges at
    ``vertex_stride`` spacing (all original vertices kept), pen-up after each
    polygon, one draw-finish at the end."""
    if vertex_stride <= 0:
        raise ValueError(f"stride must be positive, got {vertex_stride}")
    if vertex_stride > max_step_px:
        raise ValueError(f"stride {vertex_stride} exceeds the {max_step_px:.0f}px step limit")
    # Rounding intermediate points can stretch a step by ~1.5px, so keep a
    # little slack when the stride sits right at the limit.
    step_len = min(float(vertex_stride), max_step_px - 1.5)

    actions: List[Action] = []
    for poly in truth:
        start = poly.vertices[0]
        pts: List[PixelPoint] = [start]
        edge_list = list(iter_edges(poly.vertices, closed=True))
        for idx, (a, b) in enumerate(edge_list):
            closing = idx == len(edge_list) - 1
            length = a.distance_to(b)
            t = step_len
            while t < length - 1e-9:
                x = a.x + (b.x - a.x) * t / length
                y = a.y + (b.y - a.y) * t / length
                p = PixelPoint(round_half_away(x), round_half_away(y))
                if p != pts[-1] and p != start:
                    pts.append(p)
                t += step_len
            if not closing and b != pts[-1]:
                pts.append(b)
        actions.extend(Action(ActionKind.PEN_DOWN, p) for p in pts)
        actions.append(Action(ActionKind.PEN_UP))
    actions.append(Action(ActionKind.DRAW_FINISH))
    return actions


def scripted_rollout(
    env: OutlineEnv, image: np.ndarray, truth: Sequence[Polygon], vertex_stride: float
) -> List[StepOutcome]:
    """Reset ``env`` on (image, truth) and replay the ground-truth script."""
    actions = scripted_actions(truth, vertex_stride, env.config.max_step_px)
    env.reset(image, truth)
    outcomes: List[StepOutcome] = []
    for action in actions:
        outcome = env.step(action)
        outcomes.append(outcome)
        if outcome.done:
            break
    return outcomes
