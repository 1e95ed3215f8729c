"""Drawing state and the two single-channel state maps derived from it.

The drawing agent is always in one of three phases, named after its last
action: ``pen-up``, ``pen-down`` or the terminal ``draw-finish``.  The same
three names double as the action vocabulary.

Map 1 shows what has been drawn: completed polygons filled with 0.5 and the
polyline currently being drawn at 1.0 (the polyline wins where they overlap).
Map 2 marks the last pen position with 1.0 while the pen is down and is
all-zero otherwise.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .geometry import PixelPoint, Polygon, outline_pixels, rasterize_polygon_fill


class Phase(enum.Enum):
    PEN_UP = "pen-up"
    PEN_DOWN = "pen-down"
    DRAW_FINISH = "draw-finish"


class ActionKind(enum.Enum):
    PEN_UP = "pen-up"
    PEN_DOWN = "pen-down"
    DRAW_FINISH = "draw-finish"


#: Stable integer codes used by the interchange formats.
ACTION_CODES = {
    ActionKind.PEN_UP: 0,
    ActionKind.PEN_DOWN: 1,
    ActionKind.DRAW_FINISH: 2,
}
ACTION_ORDER = (ActionKind.PEN_UP, ActionKind.PEN_DOWN, ActionKind.DRAW_FINISH)


@dataclass(frozen=True)
class DrawingState:
    """Immutable drawing progress: completed polygons, the open polyline and
    the current phase.  The pen is down exactly when the polyline is
    non-empty."""

    found: Tuple[Polygon, ...] = ()
    current: Tuple[PixelPoint, ...] = ()
    phase: Phase = Phase.PEN_UP

    def __post_init__(self):
        object.__setattr__(self, "found", tuple(self.found))
        object.__setattr__(self, "current", tuple(self.current))
        pen_down = self.phase == Phase.PEN_DOWN
        if pen_down != bool(self.current):
            raise ValueError(
                f"phase {self.phase.value} inconsistent with "
                f"{len(self.current)} current vertices"
            )

    @property
    def last_pen(self) -> Optional[PixelPoint]:
        return self.current[-1] if self.current else None


@dataclass(frozen=True)
class StateMaps:
    map1: np.ndarray
    map2: np.ndarray


def render_state_maps(state: DrawingState, width: int, height: int) -> StateMaps:
    """Render the two state maps for ``state`` on a ``width x height`` grid.

    Pure: identical inputs produce bit-identical maps.
    """
    map1 = np.zeros((height, width), dtype=np.float32)
    for poly in state.found:
        mask = rasterize_polygon_fill(poly, width, height)
        map1[mask] = 0.5
    if state.current:
        for p in outline_pixels(state.current, closed=False):
            map1[p.y, p.x] = 1.0

    map2 = np.zeros((height, width), dtype=np.float32)
    if state.phase == Phase.PEN_DOWN:
        last = state.last_pen
        map2[last.y, last.x] = 1.0
    return StateMaps(map1=map1, map2=map2)
