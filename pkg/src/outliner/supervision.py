"""Synthetic supervision samples for the outline-drawing agent.

Two kinds of training target are manufactured from annotations alone:

* kind 1 (next action is the first pen-down of a polygon): the position map
  is the blurred outline of every not-yet-found object;
* kind 2 (pen is down mid-polygon): the position map follows a piecewise
  linear profile along the remaining annotation path -- rising from 0 at the
  current vertex to 1 at the next vertex, then falling back to 0 at arc
  length ``horizon`` (50 px).  When the next vertex is already beyond the
  horizon only the rising branch applies, clamped at the horizon.

Both maps are smoothed with the truncated Gaussian and rescaled to max 1.0.
The target action is always pen-down.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, List, Sequence

import numpy as np

from .coco_ingest import AnnotationSet, load_letterboxed_image, pixel_polygons
from .env import Observation
from .geometry import (
    OutOfRange,
    Polygon,
    iter_edges,
    path_length,
    path_vertices,
    rasterize_segment,
)
from .gridops import scale_to_unit, truncated_gaussian_blur
from .statemap import ActionKind, DrawingState, Phase, render_state_maps

log = logging.getLogger(__name__)

HORIZON_PX = 50.0


@dataclass(frozen=True)
class SupervisionSample:
    image_id: int
    index: int
    kind: int  # 1 = first pen-down of a polygon, 2 = mid-polygon pen-down
    state: DrawingState
    observation: Observation
    target_action: ActionKind
    target_position_map: np.ndarray


def make_penup_target(
    unrecognized: Sequence[Polygon],
    width: int,
    height: int,
    window: int = 9,
    sigma: float = 2.0,
) -> np.ndarray:
    """Blurred, max-rescaled outline map of the not-yet-found polygons.

    All-zero when every object has been found.
    """
    grid = np.zeros((height, width), dtype=np.float32)
    for poly in unrecognized:
        for a, b in iter_edges(poly.vertices, closed=True):
            for p in rasterize_segment(a, b):
                grid[p.y, p.x] = 1.0
    return scale_to_unit(truncated_gaussian_blur(grid, window, sigma))


def _profile_value(s: float, first_edge_len: float, horizon: float) -> float:
    if first_edge_len >= horizon:
        return s / first_edge_len
    if s <= first_edge_len:
        return s / first_edge_len
    return 1.0 - (s - first_edge_len) / (horizon - first_edge_len)


def eval_next_vertex_profile(seg, k: int, s: float, horizon: float = HORIZON_PX) -> float:
    """Target-profile value at arc length ``s`` from vertex ``k`` of ``seg``.

    ``s`` must lie in [0, min(horizon, remaining arc length)].
    """
    path = path_vertices(seg, k)
    if len(path) < 2:
        raise OutOfRange(f"vertex {k} has no following path")
    remaining = path_length(seg, k)
    if s < 0 or s > min(horizon, remaining) + 1e-9:
        raise OutOfRange(f"arc length {s} outside [0, {min(horizon, remaining):.3f}]")
    first_edge_len = path[0].distance_to(path[1])
    return _profile_value(s, first_edge_len, horizon)


def pendown_profile_map(
    seg, k: int, width: int, height: int, horizon: float = HORIZON_PX
) -> np.ndarray:
    """Pre-smoothing kind-2 map: the profile written onto the rasterized
    remaining path out to arc length ``horizon``; overlapping pixels keep the
    maximum value."""
    path = path_vertices(seg, k)
    if len(path) < 2:
        raise OutOfRange(f"vertex {k} has no following path")
    first_edge_len = path[0].distance_to(path[1])
    grid = np.zeros((height, width), dtype=np.float32)
    arc_start = 0.0
    for i in range(len(path) - 1):
        if arc_start > horizon:
            break
        a, b = path[i], path[i + 1]
        for p in rasterize_segment(a, b):
            s = arc_start + a.distance_to(p)
            if s > horizon + 1e-9:
                continue
            v = _profile_value(min(s, horizon), first_edge_len, horizon)
            if 0 <= p.x < width and 0 <= p.y < height and v > grid[p.y, p.x]:
                grid[p.y, p.x] = np.float32(v)
        arc_start += a.distance_to(b)
    return grid


def make_pendown_target(
    seg,
    k: int,
    width: int,
    height: int,
    horizon: float = HORIZON_PX,
    window: int = 9,
    sigma: float = 2.0,
) -> np.ndarray:
    """Smoothed, max-rescaled kind-2 position map."""
    grid = pendown_profile_map(seg, k, width, height, horizon)
    return scale_to_unit(truncated_gaussian_blur(grid, window, sigma))


def _usable_instances(ann: AnnotationSet, image_id: int, target: int) -> List[List[Polygon]]:
    """Per-instance lists of valid integer-pixel polygons for one image."""
    out = []
    for inst in ann.instances:
        if inst.image_id != image_id:
            continue
        polys = pixel_polygons(inst, target, target)
        if polys:
            out.append(polys)
    return out


def generate_dataset(
    ann: AnnotationSet,
    images_dir,
    samples_per_image: int,
    rng_seed: int,
    target: int = 640,
) -> Iterator[SupervisionSample]:
    """Yield supervision samples for every annotated image.

    ``ann`` must already be letterboxed to ``target``.  For each image this
    emits ``samples_per_image`` kind-1 samples followed by the same number of
    kind-2 samples.  Output order is fixed (ascending image id, then sample
    index) and each image draws from its own seeded RNG, so runs with equal
    seeds are bit-identical.  Images with no usable instances are skipped
    with a warning.
    """
    images_dir = Path(images_dir)
    for image_id in sorted(ann.images):
        info = ann.images[image_id]
        instances = _usable_instances(ann, image_id, target)
        if not instances:
            log.warning("image %d has no usable instances; skipped", image_id)
            continue
        image = load_letterboxed_image(images_dir / info.file_name, info.width, info.height, target)
        rng = np.random.default_rng([rng_seed, image_id])
        n = len(instances)
        index = 0

        for _ in range(samples_per_image):
            subset_size = int(rng.integers(0, n))  # always leaves >= 1 unrecognized
            chosen = sorted(rng.choice(n, size=subset_size, replace=False).tolist())
            found = tuple(p for i in chosen for p in instances[i])
            unrecognized = [p for i in range(n) if i not in chosen for p in instances[i]]
            state = DrawingState(found=found, current=(), phase=Phase.PEN_UP)
            obs = Observation(image=image, maps=render_state_maps(state, target, target))
            yield SupervisionSample(
                image_id=image_id,
                index=index,
                kind=1,
                state=state,
                observation=obs,
                target_action=ActionKind.PEN_DOWN,
                target_position_map=make_penup_target(unrecognized, target, target),
            )
            index += 1

        for _ in range(samples_per_image):
            inst_idx = int(rng.integers(0, n))
            parts = instances[inst_idx]
            poly = parts[int(rng.integers(0, len(parts)))]
            k = int(rng.integers(0, len(poly.vertices)))
            others = [i for i in range(n) if i != inst_idx]
            found: tuple = ()
            if others:
                subset_size = int(rng.integers(0, len(others) + 1))
                chosen = sorted(rng.choice(len(others), size=subset_size, replace=False).tolist())
                found = tuple(p for i in chosen for p in instances[others[i]])
            current = tuple(poly.vertices[: k + 1])
            state = DrawingState(found=found, current=current, phase=Phase.PEN_DOWN)
            obs = Observation(image=image, maps=render_state_maps(state, target, target))
            yield SupervisionSample(
                image_id=image_id,
                index=index,
                kind=2,
                state=state,
                observation=obs,
                target_action=ActionKind.PEN_DOWN,
                target_position_map=make_pendown_target(poly, k, target, target),
            )
            index += 1
