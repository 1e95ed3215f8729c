"""Per-image exploration history queues and the phase-based explorer.

Each image owns a bounded FIFO queue of replay entries.  Entries store the
drawing state compactly as vertex lists (observations re-render exactly from
them), the action taken, the reward record ``(reward, next phase, done)``
and, for manufactured seed entries, the dense target position map.  Queues
persist to single container files and reload bit-exactly.

Exploration runs in phases: a phase picks a handful of images and steps their
episodes round-robin under an epsilon-greedy policy, pushing one entry per
step.  Epsilon anneals linearly over a fixed horizon of environment steps.
"""

from __future__ import annotations

import json
import logging
import struct
from collections import deque
from fractions import Fraction
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .env import Action, OutlineEnv
from .geometry import PixelPoint, Polygon
from .gridops import global_argmax, neighborhood_argmax
from .io_formats import atomic_write_bytes, dump_json, read_blob, write_blob
from .statemap import ACTION_ORDER, ActionKind, DrawingState, Phase

log = logging.getLogger(__name__)

QUEUE_MAGIC = b"DOQ1"
QUEUE_VERSION = 1
DEFAULT_CAPACITY = 2000


class MissingActionClass(Exception):
    """Balanced sampling found no entry for one of the three action classes."""


class SerializationError(Exception):
    """Queue file could not be written or parsed."""


@dataclass(frozen=True)
class ExplorationSchedule:
    """Linear epsilon annealing over environment steps."""

    eps_start: float = 0.8
    eps_end: float = 0.05
    horizon: int = 10_000_000

    def epsilon(self, t: int) -> float:
        if t >= self.horizon:
            return self.eps_end
        # Interpolate in exact decimal rationals and round once, so that e.g.
        # the midpoint of 0.8..0.05 is the double nearest 0.425 rather than
        # the one carrying 0.8's representation error.
        start = Fraction(str(self.eps_start))
        end = Fraction(str(self.eps_end))
        return float(start + (end - start) * Fraction(int(t), int(self.horizon)))


DEFAULT_SCHEDULE = ExplorationSchedule()


def epsilon(t: int, schedule: ExplorationSchedule = DEFAULT_SCHEDULE) -> float:
    return schedule.epsilon(t)


@dataclass(frozen=True)
class PhasePlan:
    images_per_phase: int = 10
    steps_per_phase: int = 500
    seed: int = 0


@dataclass
class ReplayEntry:
    """One explored or manufactured step, stored compactly.

    ``found``/``current`` describe the pre-action drawing state as plain
    vertex lists; ``reward`` is (contour, region, penalty) or None for
    manufactured entries; ``target_map`` is the dense position target or None
    for explored entries.
    """

    image_id: int
    phase: str
    found: List[List[Tuple[int, int]]]
    current: List[Tuple[int, int]]
    action_kind: str
    action_position: Optional[Tuple[int, int]] = None
    reward: Optional[Tuple[float, float, float]] = None
    next_phase: Optional[str] = None
    done: bool = False
    target_map: Optional[np.ndarray] = None

    @classmethod
    def from_state(cls, image_id: int, state: DrawingState, **kw) -> "ReplayEntry":
        return cls(
            image_id=image_id,
            phase=state.phase.value,
            found=[[(v.x, v.y) for v in poly.vertices] for poly in state.found],
            current=[(v.x, v.y) for v in state.current],
            **kw,
        )

    def state(self) -> DrawingState:
        """Reconstruct the pre-action DrawingState."""
        return DrawingState(
            found=tuple(Polygon(tuple(PixelPoint(x, y) for x, y in poly)) for poly in self.found),
            current=tuple(PixelPoint(x, y) for x, y in self.current),
            phase=Phase(self.phase),
        )


class HistoryQueue:
    """Bounded FIFO of ReplayEntry for one image."""

    def __init__(self, image_id: int, capacity: int = DEFAULT_CAPACITY):
        if capacity < 1:
            raise ValueError(f"capacity must be positive, got {capacity}")
        self.image_id = image_id
        self.capacity = capacity
        self._entries: deque = deque(maxlen=capacity)

    def push(self, entry: ReplayEntry) -> None:
        """Append; the oldest entry falls out once the queue is full."""
        self._entries.append(entry)

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries)

    def entries(self) -> List[ReplayEntry]:
        return list(self._entries)

    def save(self, path) -> None:
        """Persist to one container file: magic, version, a JSON entry index
        and the concatenated target-map blobs it points into."""
        try:
            blobs = bytearray()
            meta_entries = []
            for e in self._entries:
                rec = {
                    "phase": e.phase,
                    "found": e.found,
                    "current": e.current,
                    "action_kind": e.action_kind,
                    "action_position": list(e.action_position) if e.action_position else None,
                    "reward": list(e.reward) if e.reward is not None else None,
                    "next_phase": e.next_phase,
                    "done": e.done,
                    "target_map": None,
                }
                if e.target_map is not None:
                    blob = write_blob(np.asarray(e.target_map, dtype=np.float32))
                    rec["target_map"] = {"offset": len(blobs), "length": len(blob)}
                    blobs.extend(blob)
                meta_entries.append(rec)
            meta = dump_json(
                {"image_id": self.image_id, "capacity": self.capacity, "entries": meta_entries}
            )
            payload = (
                QUEUE_MAGIC
                + struct.pack("<II", QUEUE_VERSION, len(meta))
                + meta
                + bytes(blobs)
            )
            atomic_write_bytes(payload, path)
        except OSError as e:
            raise SerializationError(f"cannot write queue file {path}: {e}") from e

    @classmethod
    def load(cls, path) -> "HistoryQueue":
        try:
            data = Path(path).read_bytes()
        except OSError as e:
            raise SerializationError(f"cannot read queue file {path}: {e}") from e
        if len(data) < 12 or data[:4] != QUEUE_MAGIC:
            raise SerializationError(f"{path}: not a history-queue file")
        version, meta_len = struct.unpack_from("<II", data, 4)
        if version != QUEUE_VERSION:
            raise SerializationError(f"{path}: unsupported queue version {version}")
        try:
            meta = json.loads(data[12 : 12 + meta_len].decode())
        except ValueError as e:
            raise SerializationError(f"{path}: bad entry index: {e}") from e
        blob_base = 12 + meta_len
        queue = cls(image_id=int(meta["image_id"]), capacity=int(meta["capacity"]))
        for rec in meta["entries"]:
            target_map = None
            if rec.get("target_map") is not None:
                off = blob_base + int(rec["target_map"]["offset"])
                target_map, _ = read_blob(data, off)
            queue.push(
                ReplayEntry(
                    image_id=int(meta["image_id"]),
                    phase=rec["phase"],
                    found=[[tuple(v) for v in poly] for poly in rec["found"]],
                    current=[tuple(v) for v in rec["current"]],
                    action_kind=rec["action_kind"],
                    action_position=tuple(rec["action_position"])
                    if rec["action_position"]
                    else None,
                    reward=tuple(rec["reward"]) if rec["reward"] is not None else None,
                    next_phase=rec["next_phase"],
                    done=bool(rec["done"]),
                    target_map=target_map,
                )
            )
        return queue


def seed_queue_from_samples(queue: HistoryQueue, samples: Iterable) -> int:
    """Push manufactured supervision samples as pen-down entries."""
    count = 0
    for s in samples:
        queue.push(
            ReplayEntry.from_state(
                image_id=s.image_id,
                state=s.state,
                action_kind=s.target_action.value,
                target_map=np.asarray(s.target_position_map, dtype=np.float32),
            )
        )
        count += 1
    return count


def balanced_batch(
    queues: Iterable[HistoryQueue],
    batch_size: int = 5,
    rng: Optional[np.random.Generator] = None,
) -> List[ReplayEntry]:
    """Sample ``batch_size`` entries with replacement, first choosing one of
    the three action classes uniformly, then an entry of that class uniformly
    across all queues.  Raises MissingActionClass when any class is absent."""
    if rng is None:
        rng = np.random.default_rng()
    by_class: Dict[str, List[ReplayEntry]] = {k.value: [] for k in ACTION_ORDER}
    for queue in sorted(queues, key=lambda q: q.image_id):
        for entry in queue:
            by_class[entry.action_kind].append(entry)
    for kind in ACTION_ORDER:
        if not by_class[kind.value]:
            raise MissingActionClass(f"no '{kind.value}' entries available")
    batch = []
    for _ in range(batch_size):
        kind = ACTION_ORDER[int(rng.integers(0, 3))].value
        pool = by_class[kind]
        batch.append(pool[int(rng.integers(0, len(pool)))])
    return batch


@dataclass
class ExplorationContext:
    """Everything a phase needs for one image."""

    image_id: int
    env: OutlineEnv
    image: np.ndarray
    truth: Sequence[Polygon]
    queue: HistoryQueue


def random_policy(seed: int) -> Callable:
    """A deterministic stand-in agent: random action scores and position
    maps from a private seeded stream."""
    rng = np.random.default_rng([seed, 797])

    def callback(observation):
        h, w = observation.maps.map1.shape
        return rng.random(3), rng.random((h, w)).astype(np.float32)

    return callback


def _random_action(
    rng: np.random.Generator, state: DrawingState, width: int, height: int, max_step: float
) -> Action:
    kind = ACTION_ORDER[int(rng.integers(0, 3))]
    if kind != ActionKind.PEN_DOWN:
        return Action(kind)
    if state.phase != Phase.PEN_DOWN:
        x = int(rng.integers(0, width))
        y = int(rng.integers(0, height))
        return Action(ActionKind.PEN_DOWN, PixelPoint(x, y))
    last = state.last_pen
    r = int(max_step)
    for _ in range(8):
        dx = int(rng.integers(-r, r + 1))
        dy = int(rng.integers(-r, r + 1))
        if dx == 0 and dy == 0:
            continue
        if dx * dx + dy * dy > max_step * max_step:
            continue
        x, y = last.x + dx, last.y + dy
        if 0 <= x < width and 0 <= y < height:
            return Action(ActionKind.PEN_DOWN, PixelPoint(x, y))
    return Action(ActionKind.PEN_UP)


def _greedy_action(scores: np.ndarray, position_map: np.ndarray, state: DrawingState, max_step: float) -> Action:
    kind = ACTION_ORDER[int(np.argmax(scores))]
    if kind != ActionKind.PEN_DOWN:
        return Action(kind)
    if state.phase == Phase.PEN_DOWN:
        pos = neighborhood_argmax(position_map, state.last_pen, max_step)
    else:
        pos = global_argmax(position_map)
    return Action(ActionKind.PEN_DOWN, pos)


def run_phase(
    plan: PhasePlan,
    contexts: Dict[int, ExplorationContext],
    agent_callback: Callable,
    t0: int,
    schedule: ExplorationSchedule = DEFAULT_SCHEDULE,
    queue_dir=None,
) -> int:
    """Run one exploration phase and return the updated step counter.

    Picks ``plan.images_per_phase`` images (seeded by ``(plan.seed, t0)``),
    resets their episodes and steps them round-robin for
    ``plan.steps_per_phase`` environment steps.  Every step pushes one entry
    onto that image's queue; with probability epsilon(t) the action is a
    legal random move, otherwise the callback's preference is followed
    (position-map argmax restricted to the step-limit disk while the pen is
    down).  Touched queues are persisted under ``queue_dir`` when given.
    """
    if not contexts:
        return t0
    rng = np.random.default_rng([plan.seed, t0])
    ids = sorted(contexts)
    n_pick = min(plan.images_per_phase, len(ids))
    picked = sorted(rng.choice(len(ids), size=n_pick, replace=False).tolist())
    selected = [contexts[ids[i]] for i in picked]

    for ctx in selected:
        ctx.env.reset(ctx.image, ctx.truth)

    t = t0
    for i in range(plan.steps_per_phase):
        ctx = selected[i % len(selected)]
        if ctx.env.done:
            ctx.env.reset(ctx.image, ctx.truth)
        state = ctx.env.state
        w, h = ctx.env.grid_size
        if rng.random() < schedule.epsilon(t):
            action = _random_action(rng, state, w, h, ctx.env.config.max_step_px)
        else:
            scores, pmap = agent_callback(ctx.env.observation)
            action = _greedy_action(scores, pmap, state, ctx.env.config.max_step_px)
        outcome = ctx.env.step(action)
        ctx.queue.push(
            ReplayEntry.from_state(
                image_id=ctx.image_id,
                state=state,
                action_kind=action.kind.value,
                action_position=(action.position.x, action.position.y)
                if action.position
                else None,
                reward=(outcome.reward.contour, outcome.reward.region, outcome.reward.penalty),
                next_phase=ctx.env.state.phase.value,
                done=outcome.done,
            )
        )
        t += 1

    if queue_dir is not None:
        queue_dir = Path(queue_dir)
        for ctx in selected:
            ctx.queue.save(queue_dir / queue_file_name(ctx.image_id))
    return t


def queue_file_name(image_id: int) -> str:
    return f"queue_{image_id:08d}.doq"
