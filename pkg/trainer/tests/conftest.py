"""Shared fixtures: a tiny annotated corpus plus real exported artifacts.

The dataset and queue fixtures shell out to the installed ``outline`` tool —
the trainer only ever consumes its files, so the tests exercise exactly that
boundary and never import the producer package.
"""

import json
import struct
import subprocess

import numpy as np
import pytest
from PIL import Image

ANNOTATIONS = {
    "images": [{"id": 1, "width": 80, "height": 80, "file_name": "img_000001.png"}],
    "annotations": [
        {
            "id": 11,
            "image_id": 1,
            "category_id": 1,
            "iscrowd": 0,
            "segmentation": [[10.0, 10.0, 60.0, 12.0, 58.0, 55.0, 12.0, 50.0]],
            "area": 2000.0,
            "bbox": [10.0, 10.0, 50.0, 45.0],
        },
        {
            "id": 12,
            "image_id": 1,
            "category_id": 1,
            "iscrowd": 0,
            "segmentation": [[20.0, 60.0, 70.0, 62.0, 68.0, 75.0]],
            "area": 180.0,
            "bbox": [20.0, 60.0, 50.0, 15.0],
        },
    ],
    "categories": [{"id": 1, "name": "widget"}],
}


def run_cli(*args):
    """Run the outline tool, failing the test on a nonzero exit."""
    proc = subprocess.run(["outline", *args], capture_output=True, text=True)
    if proc.returncode:
        raise AssertionError(f"outline {' '.join(args)} failed:\n{proc.stderr}")
    return proc


def blob_bytes(arr: np.ndarray) -> bytes:
    """Independent tensor-blob writer used to fabricate test inputs."""
    code = {np.dtype("float32"): 0, np.dtype("uint8"): 1}[arr.dtype]
    header = struct.pack("<4sIBB", b"DOTB", 1, code, arr.ndim)
    dims = struct.pack(f"<{arr.ndim}I", *arr.shape)
    return header + dims + arr.astype(arr.dtype.newbyteorder("<")).tobytes()


@pytest.fixture(scope="session")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    rng = np.random.default_rng(20260401)
    pixels = rng.integers(0, 256, (80, 80, 3), dtype=np.uint8)
    Image.fromarray(pixels, "RGB").save(root / "img_000001.png")
    (root / "annotations.json").write_text(json.dumps(ANNOTATIONS))
    return root


@pytest.fixture(scope="session")
def dataset_dir(corpus, tmp_path_factory):
    """Ten exported supervision samples (5 of each kind, one image)."""
    out = tmp_path_factory.mktemp("export") / "dataset"
    run_cli(
        "gen-supervision",
        "--ann", str(corpus / "annotations.json"),
        "--images", str(corpus),
        "--out", str(out),
        "--samples-per-image", "5",
        "--seed", "13",
    )
    return out


@pytest.fixture(scope="session")
def queue_dir(corpus, tmp_path_factory):
    """Replay queues from a short seeded exploration run."""
    out = tmp_path_factory.mktemp("explore") / "queues"
    run_cli(
        "explore",
        "--ann", str(corpus / "annotations.json"),
        "--images", str(corpus),
        "--queues", str(out),
        "--steps-per-phase", "60",
        "--seed", "5",
    )
    return out


@pytest.fixture(scope="session")
def queue_file(queue_dir):
    files = sorted(queue_dir.glob("queue_*.doq"))
    assert files, "exploration produced no queue files"
    return files[0]
