"""Binary tensor blobs, dataset manifests and episode traces.

The tensor blob is deliberately tiny so any language can read it:

    magic   4 bytes   b"DOTB"
    version u32 LE    currently 1
    dtype   u8        0 = float32, 1 = uint8
    ndim    u8
    dims    ndim * u32 LE
    payload row-major little-endian values, product(dims) elements

A dataset manifest is a JSON index whose records point at one observation
blob and one position-map blob each; ``check_manifest`` re-validates every
record against the files on disk.  All writes go through a temp file plus
atomic rename.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path
from typing import Iterable, List, Tuple

import numpy as np

MAGIC = b"DOTB"
FORMAT_VERSION = 1

DTYPE_FLOAT32 = 0
DTYPE_UINT8 = 1

#: action name -> wire code, shared by manifests and the trainer.
ACTION_CODES = {"pen-up": 0, "pen-down": 1, "draw-finish": 2}

MANIFEST_NAME = "manifest.json"


class BadMagic(Exception):
    """Blob does not start with the DOTB magic."""


class VersionUnsupported(Exception):
    """Blob advertises a version this reader does not understand."""


class TruncatedPayload(Exception):
    """Blob byte count does not match its declared dimensions."""


_HEADER = struct.Struct("<4sIBB")


def _dtype_code(arr: np.ndarray) -> int:
    if arr.dtype == np.float32:
        return DTYPE_FLOAT32
    if arr.dtype == np.uint8:
        return DTYPE_UINT8
    raise ValueError(f"unsupported dtype {arr.dtype}; use float32 or uint8")


def write_blob(arr: np.ndarray) -> bytes:
    """Serialize a float32 or uint8 array to DOTB bytes."""
    code = _dtype_code(arr)
    dims = arr.shape if arr.ndim else (1,)
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, code, len(dims))
    dim_bytes = struct.pack(f"<{len(dims)}I", *dims)
    wire = arr.astype("<f4" if code == DTYPE_FLOAT32 else np.uint8, copy=False)
    return header + dim_bytes + np.ascontiguousarray(wire).tobytes()


def read_blob(data: bytes, offset: int = 0) -> Tuple[np.ndarray, int]:
    """Parse one blob from ``data`` at ``offset``.

    Returns the array and the offset one past the blob's payload.
    """
    if len(data) - offset < _HEADER.size:
        raise TruncatedPayload("blob shorter than its fixed header")
    magic, version, code, ndim = _HEADER.unpack_from(data, offset)
    if magic != MAGIC:
        raise BadMagic(f"expected {MAGIC!r}, found {magic!r}")
    if version != FORMAT_VERSION:
        raise VersionUnsupported(f"version {version}; this reader supports {FORMAT_VERSION}")
    pos = offset + _HEADER.size
    if len(data) - pos < 4 * ndim:
        raise TruncatedPayload("blob shorter than its dimension list")
    dims = struct.unpack_from(f"<{ndim}I", data, pos)
    pos += 4 * ndim
    if code == DTYPE_FLOAT32:
        dtype = np.dtype("<f4")
    elif code == DTYPE_UINT8:
        dtype = np.dtype(np.uint8)
    else:
        raise VersionUnsupported(f"unknown dtype code {code}")
    count = 1
    for d in dims:
        count *= d
    nbytes = count * dtype.itemsize
    if len(data) - pos < nbytes:
        raise TruncatedPayload(f"payload needs {nbytes} bytes, {len(data) - pos} present")
    arr = np.frombuffer(data, dtype=dtype, count=count, offset=pos).reshape(dims).copy()
    return arr, pos + nbytes


def atomic_write_bytes(data: bytes, path) -> None:
    """Write via a temporary file in the same directory plus rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_blob(arr: np.ndarray, path) -> None:
    atomic_write_bytes(write_blob(arr), path)


def load_blob(path) -> np.ndarray:
    data = Path(path).read_bytes()
    arr, end = read_blob(data)
    if end != len(data):
        raise TruncatedPayload(f"{len(data) - end} trailing bytes after payload")
    return arr


def dump_json(obj) -> bytes:
    """Canonical JSON bytes: sorted keys, fixed separators, trailing newline."""
    return (json.dumps(obj, sort_keys=True, separators=(",", ":"), indent=1) + "\n").encode()


def write_json_atomic(obj, path) -> None:
    atomic_write_bytes(dump_json(obj), path)


def read_json(path):
    return json.loads(Path(path).read_text())


def export_dataset(samples: Iterable, directory) -> Path:
    """Write supervision samples as blob pairs plus a manifest.

    Per sample: ``{image_id}_{index}_obs.dotb`` (5 x H x W observation) and
    ``{image_id}_{index}_map.dotb`` (H x W target position map).  Returns the
    manifest path; an empty sample stream still produces a valid manifest
    with zero records.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    records: List[dict] = []
    for sample in samples:
        obs = sample.observation.tensor()
        pmap = np.asarray(sample.target_position_map, dtype=np.float32)
        stem = f"{sample.image_id:08d}_{sample.index:04d}"
        obs_name = f"{stem}_obs.dotb"
        map_name = f"{stem}_map.dotb"
        save_blob(obs, directory / obs_name)
        save_blob(pmap, directory / map_name)
        records.append(
            {
                "image_id": int(sample.image_id),
                "index": int(sample.index),
                "kind": int(getattr(sample, "kind", 0)),
                "action": ACTION_CODES[sample.target_action.value],
                "observation": {"path": obs_name, "dims": [int(d) for d in obs.shape]},
                "position_map": {"path": map_name, "dims": [int(d) for d in pmap.shape]},
                "reward": None,
            }
        )
    manifest = {
        "format": "outline-samples",
        "version": FORMAT_VERSION,
        "action_codes": ACTION_CODES,
        "records": records,
    }
    manifest_path = directory / MANIFEST_NAME
    write_json_atomic(manifest, manifest_path)
    return manifest_path


def check_manifest(path) -> int:
    """Validate every manifest record against its blob files.

    Returns the record count; raises ValueError naming the first offending
    record, or the blob errors themselves for corrupt files.
    """
    path = Path(path)
    doc = read_json(path)
    if doc.get("format") != "outline-samples":
        raise ValueError(f"{path}: not a sample manifest")
    base = path.parent
    for i, rec in enumerate(doc.get("records", [])):
        for key in ("observation", "position_map"):
            ref = rec.get(key)
            if not ref or "path" not in ref or "dims" not in ref:
                raise ValueError(f"{path}: record {i} lacks a proper '{key}' reference")
            blob_path = base / ref["path"]
            if not blob_path.is_file():
                raise ValueError(f"{path}: record {i} references missing file {ref['path']}")
            arr = load_blob(blob_path)
            if list(arr.shape) != list(ref["dims"]):
                raise ValueError(
                    f"{path}: record {i} dims {ref['dims']} != stored {list(arr.shape)}"
                )
        if rec.get("action") not in ACTION_CODES.values():
            raise ValueError(f"{path}: record {i} has unknown action code {rec.get('action')}")
    return len(doc.get("records", []))


def episode_trace(outcomes: Iterable) -> dict:
    """JSON-ready dict of an episode's per-step actions and rewards."""
    steps = []
    for o in outcomes:
        steps.append(
            {
                "action": o.info.get("action"),
                "position": o.info.get("position"),
                "reward": {
                    "contour": o.reward.contour,
                    "region": o.reward.region,
                    "penalty": o.reward.penalty,
                    "total": o.reward.total,
                },
                "done": bool(o.done),
                "discarded_polygon": bool(o.info.get("discarded_polygon", False)),
            }
        )
    return {"steps": steps}


def write_episode_trace(outcomes: Iterable, path) -> None:
    write_json_atomic(episode_trace(outcomes), path)
