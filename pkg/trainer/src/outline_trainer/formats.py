"""Readers for the outline interchange files.

The trainer talks to the data tooling only through its files, so this module
re-implements the three container formats from their byte layout rather than
importing the producer:

* tensor blob: ``DOTB`` magic, u32 version, dtype byte (0 = float32,
  1 = uint8), ndim byte, ndim little-endian u32 dims, row-major payload
* sample manifest: JSON with a ``"format": "outline-samples"`` marker and
  records pointing at observation/position-map blobs
* replay queue: ``DOQ1`` magic, u32 version, u32 index length, a JSON entry
  index, then the target-map blobs the index offsets point into
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

BLOB_MAGIC = b"DOTB"
QUEUE_MAGIC = b"DOQ1"
SUPPORTED_VERSION = 1

#: action code -> name, as fixed by the manifest's action_codes table.
ACTION_NAMES = {0: "pen-up", 1: "pen-down", 2: "draw-finish"}
ACTION_CODES = {name: code for code, name in ACTION_NAMES.items()}

_BLOB_HEADER = struct.Struct("<4sIBB")
_QUEUE_HEADER = struct.Struct("<4sII")
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype(np.uint8)}


def read_blob(data: bytes, offset: int = 0) -> Tuple[np.ndarray, int]:
    """Decode one tensor blob; returns the array and the end offset."""
    try:
        magic, version, dtype_code, ndim = _BLOB_HEADER.unpack_from(data, offset)
    except struct.error as e:
        raise ValueError(f"truncated blob header: {e}") from e
    if magic != BLOB_MAGIC:
        raise ValueError(f"bad blob magic {magic!r}")
    if version != SUPPORTED_VERSION:
        raise ValueError(f"unsupported blob version {version}")
    if dtype_code not in _DTYPES:
        raise ValueError(f"unknown dtype code {dtype_code}")
    pos = offset + _BLOB_HEADER.size
    try:
        dims = struct.unpack_from(f"<{ndim}I", data, pos)
    except struct.error as e:
        raise ValueError(f"truncated dimension list: {e}") from e
    pos += 4 * ndim
    dtype = _DTYPES[dtype_code]
    count = int(np.prod(dims, dtype=np.int64)) if dims else 1
    end = pos + count * dtype.itemsize
    if end > len(data):
        raise ValueError(f"blob payload truncated: needs {end - pos} bytes from {pos}")
    arr = np.frombuffer(data, dtype=dtype, count=count, offset=pos).reshape(dims).copy()
    return arr, end


def load_blob(path) -> np.ndarray:
    arr, _ = read_blob(Path(path).read_bytes())
    return arr


@dataclass(frozen=True)
class SampleRecord:
    """One manifest record, with blob paths resolved against the manifest."""

    image_id: int
    index: int
    kind: int
    action: int
    observation_path: Path
    position_map_path: Path


def load_manifest(path) -> List[SampleRecord]:
    """Parse a dataset manifest into records with absolute blob paths."""
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    doc = json.loads(path.read_text())
    if doc.get("format") != "outline-samples":
        raise ValueError(f"{path}: not an outline sample manifest")
    base = path.parent
    records = []
    for rec in doc["records"]:
        records.append(
            SampleRecord(
                image_id=int(rec["image_id"]),
                index=int(rec["index"]),
                kind=int(rec["kind"]),
                action=int(rec["action"]),
                observation_path=base / rec["observation"]["path"],
                position_map_path=base / rec["position_map"]["path"],
            )
        )
    return records


@dataclass
class QueueEntry:
    """One replay transition as stored in a queue file.

    ``reward`` is the (contour, region, penalty) triple for explored entries
    and None for manufactured seed entries, which instead carry a dense
    ``target_map``.
    """

    phase: str
    found: List[List[Tuple[int, int]]]
    current: List[Tuple[int, int]]
    action_kind: str
    action_position: Optional[Tuple[int, int]]
    reward: Optional[Tuple[float, float, float]]
    next_phase: Optional[str]
    done: bool
    target_map: Optional[np.ndarray]

    @property
    def reward_total(self) -> Optional[float]:
        return None if self.reward is None else float(sum(self.reward))


def load_queue(path) -> Tuple[int, List[QueueEntry]]:
    """Read a replay queue file; returns (image_id, entries oldest first)."""
    data = Path(path).read_bytes()
    try:
        magic, version, meta_len = _QUEUE_HEADER.unpack_from(data, 0)
    except struct.error as e:
        raise ValueError(f"{path}: truncated queue header: {e}") from e
    if magic != QUEUE_MAGIC:
        raise ValueError(f"{path}: bad queue magic {magic!r}")
    if version != SUPPORTED_VERSION:
        raise ValueError(f"{path}: unsupported queue version {version}")
    meta = json.loads(data[_QUEUE_HEADER.size : _QUEUE_HEADER.size + meta_len].decode())
    blob_base = _QUEUE_HEADER.size + meta_len
    entries = []
    for rec in meta["entries"]:
        target_map = None
        if rec["target_map"] is not None:
            target_map, _ = read_blob(data, blob_base + int(rec["target_map"]["offset"]))
        entries.append(
            QueueEntry(
                phase=rec["phase"],
                found=[[tuple(v) for v in poly] for poly in rec["found"]],
                current=[tuple(v) for v in rec["current"]],
                action_kind=rec["action_kind"],
                action_position=tuple(rec["action_position"]) if rec["action_position"] else None,
                reward=tuple(rec["reward"]) if rec["reward"] is not None else None,
                next_phase=rec["next_phase"],
                done=bool(rec["done"]),
                target_map=target_map,
            )
        )
    return int(meta["image_id"]), entries
