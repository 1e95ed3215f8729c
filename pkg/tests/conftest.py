"""Shared fixtures: a two-image COCO-style fixture set with PNGs on disk."""

import json

import numpy as np
import pytest
from PIL import Image

from outliner.geometry import PixelPoint, Polygon


def square(x0, y0, side):
    """Axis-aligned square polygon with its corner at (x0, y0)."""
    return Polygon(
        (
            PixelPoint(x0, y0),
            PixelPoint(x0 + side, y0),
            PixelPoint(x0 + side, y0 + side),
            PixelPoint(x0, y0 + side),
        )
    )


FIXTURE_DOC = {
    "images": [
        {"id": 1, "width": 100, "height": 80, "file_name": "img_000001.png"},
        {"id": 2, "width": 64, "height": 64, "file_name": "img_000002.png"},
    ],
    "annotations": [
        # kept: one large quad on image 1
        {
            "id": 11,
            "image_id": 1,
            "category_id": 1,
            "iscrowd": 0,
            "segmentation": [[10.0, 10.0, 60.0, 12.0, 58.0, 60.0, 12.0, 55.0]],
        },
        # kept: a two-part instance on image 1
        {
            "id": 12,
            "image_id": 1,
            "category_id": 1,
            "iscrowd": 0,
            "segmentation": [
                [70.0, 20.0, 90.0, 22.0, 80.0, 38.0],
                [65.0, 50.0, 85.0, 52.0, 75.0, 70.0],
            ],
        },
        # other category: ignored when category 1 is requested
        {
            "id": 13,
            "image_id": 1,
            "category_id": 2,
            "iscrowd": 0,
            "segmentation": [[5.0, 5.0, 25.0, 5.0, 25.0, 25.0, 5.0, 25.0]],
        },
        # crowd annotation: always ignored
        {
            "id": 14,
            "image_id": 1,
            "category_id": 1,
            "iscrowd": 1,
            "segmentation": [[30.0, 30.0, 50.0, 30.0, 50.0, 50.0, 30.0, 50.0]],
        },
        # RLE-style segmentation: skipped with a warning
        {
            "id": 15,
            "image_id": 2,
            "category_id": 1,
            "iscrowd": 0,
            "segmentation": {"counts": [0, 4096], "size": [64, 64]},
        },
        # kept: float-coordinate quad on image 2
        {
            "id": 16,
            "image_id": 2,
            "category_id": 1,
            "iscrowd": 0,
            "segmentation": [[5.5, 5.5, 40.2, 6.0, 42.0, 40.9, 6.1, 38.3]],
        },
        # degenerate 2-vertex part: dropped with a warning
        {
            "id": 17,
            "image_id": 2,
            "category_id": 1,
            "iscrowd": 0,
            "segmentation": [[1.0, 1.0, 5.0, 5.0]],
        },
    ],
}


def _write_png(path, width, height, seed):
    rng = np.random.default_rng(seed)
    pixels = rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8)
    Image.fromarray(pixels, "RGB").save(path)


@pytest.fixture(scope="session")
def fixture_dir(tmp_path_factory):
    """Directory holding annotations.json plus the two referenced PNGs."""
    root = tmp_path_factory.mktemp("coco_fixture")
    (root / "annotations.json").write_text(json.dumps(FIXTURE_DOC))
    _write_png(root / "img_000001.png", 100, 80, seed=101)
    _write_png(root / "img_000002.png", 64, 64, seed=102)
    return root


@pytest.fixture(scope="session")
def ann_path(fixture_dir):
    return fixture_dir / "annotations.json"


@pytest.fixture()
def rgb_image():
    """Deterministic 64x64 float RGB image."""
    rng = np.random.default_rng(4242)
    return rng.random((64, 64, 3)).astype(np.float32)
