"""COCO-style annotation ingestion and letterboxing.

Only non-crowd annotations of the requested category are kept, and only
polygon segmentations (flat ``[x1, y1, x2, y2, ...]`` lists).  A multi-part
segmentation becomes several polygons of the same instance.  Vertex
coordinates stay floating point until rasterization, so letterboxing inverts
to far better than the half-pixel rasterization grain.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from PIL import Image

from .geometry import DegeneratePolygon, PixelPoint, Polygon, rasterize_polygon_fill, round_half_away

log = logging.getLogger(__name__)

#: Instance-size bucket limits (raster area in original-image pixels).
SMALL_MAX_AREA = 32 * 32  # exclusive upper bound of "small"
LARGE_MIN_AREA = 96 * 96  # exclusive lower bound of "large"


class MalformedJson(Exception):
    """Input is not valid JSON or lacks the expected COCO structure."""


class OddCoordinateCount(Exception):
    """A polygon's flat coordinate list has an odd number of values."""


class UnknownImageRef(Exception):
    """An annotation references an image id absent from the image list."""


@dataclass(frozen=True)
class ImageInfo:
    id: int
    width: int
    height: int
    file_name: str = ""


@dataclass
class Instance:
    """One object annotation; ``polygons`` are float (N, 2) vertex arrays."""

    image_id: int
    category_id: int
    iscrowd: int
    polygons: List[np.ndarray] = field(default_factory=list)


@dataclass
class AnnotationSet:
    images: Dict[int, ImageInfo]
    instances: List[Instance]
    category_id: Optional[int] = None


@dataclass(frozen=True)
class LetterboxTransform:
    """Map original coordinates into the square target frame: scale about the
    origin, then offset by the centered padding."""

    scale: float
    pad_x: int
    pad_y: int

    def apply(self, xy: np.ndarray) -> np.ndarray:
        out = np.asarray(xy, dtype=np.float64) * self.scale
        out[..., 0] += self.pad_x
        out[..., 1] += self.pad_y
        return out

    def invert(self, xy: np.ndarray) -> np.ndarray:
        out = np.asarray(xy, dtype=np.float64).copy()
        out[..., 0] -= self.pad_x
        out[..., 1] -= self.pad_y
        return out / self.scale


def parse_annotations(data, category_id: Optional[int] = None) -> AnnotationSet:
    """Parse COCO-style JSON (bytes or str), keeping non-crowd polygon
    annotations of ``category_id`` (all categories when None).

    Polygons with fewer than 3 vertices are dropped with a warning; an odd
    coordinate count or an unknown image reference is an error.
    """
    try:
        doc = json.loads(data)
    except (json.JSONDecodeError, TypeError, UnicodeDecodeError) as e:
        raise MalformedJson(f"not valid JSON: {e}") from None
    if not isinstance(doc, dict) or "images" not in doc or "annotations" not in doc:
        raise MalformedJson("missing top-level 'images' or 'annotations'")

    images: Dict[int, ImageInfo] = {}
    for im in doc["images"]:
        try:
            info = ImageInfo(
                id=int(im["id"]),
                width=int(im["width"]),
                height=int(im["height"]),
                file_name=str(im.get("file_name", "")),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise MalformedJson(f"bad image entry {im!r}: {e}") from None
        images[info.id] = info

    instances: List[Instance] = []
    for ann in doc["annotations"]:
        if not isinstance(ann, dict):
            raise MalformedJson(f"bad annotation entry {ann!r}")
        if category_id is not None and ann.get("category_id") != category_id:
            continue
        if ann.get("iscrowd", 0) != 0:
            continue
        seg = ann.get("segmentation")
        if not isinstance(seg, list):
            log.warning("skipping annotation %s: non-polygon segmentation", ann.get("id"))
            continue
        image_id = ann.get("image_id")
        if image_id not in images:
            raise UnknownImageRef(f"annotation references unknown image id {image_id}")
        inst = Instance(
            image_id=int(image_id),
            category_id=int(ann.get("category_id", -1)),
            iscrowd=0,
        )
        for flat in seg:
            if not isinstance(flat, list):
                raise MalformedJson(f"bad segmentation part {flat!r}")
            if len(flat) % 2 != 0:
                raise OddCoordinateCount(
                    f"annotation {ann.get('id')} has {len(flat)} coordinates"
                )
            if len(flat) < 6:
                log.warning(
                    "dropping polygon with %d vertices (annotation %s)",
                    len(flat) // 2,
                    ann.get("id"),
                )
                continue
            inst.polygons.append(np.asarray(flat, dtype=np.float64).reshape(-1, 2))
        if inst.polygons:
            instances.append(inst)
        else:
            log.warning("annotation %s kept no polygons; dropped", ann.get("id"))
    return AnnotationSet(images=images, instances=instances, category_id=category_id)


def letterbox_transform(width: int, height: int, target: int = 640) -> LetterboxTransform:
    """Transform that scales the longer side to ``target`` and centers the
    shorter one with integer padding."""
    scale = target / max(width, height)
    new_w = round_half_away(width * scale)
    new_h = round_half_away(height * scale)
    return LetterboxTransform(
        scale=scale, pad_x=(target - new_w) // 2, pad_y=(target - new_h) // 2
    )


def letterbox(
    ann: AnnotationSet, target: int = 640
) -> Tuple[AnnotationSet, Dict[int, LetterboxTransform]]:
    """Geometry half of letterboxing: polygons are clipped to their image
    rectangle, then mapped into the ``target x target`` frame.

    Returns the transformed AnnotationSet (float coordinates; image entries
    unchanged) and the per-image transforms.
    """
    transforms = {
        image_id: letterbox_transform(info.width, info.height, target)
        for image_id, info in ann.images.items()
    }
    instances = []
    for inst in ann.instances:
        info = ann.images[inst.image_id]
        tr = transforms[inst.image_id]
        polys = []
        for poly in inst.polygons:
            clipped = poly.copy()
            clipped[:, 0] = np.clip(clipped[:, 0], 0.0, info.width - 1)
            clipped[:, 1] = np.clip(clipped[:, 1], 0.0, info.height - 1)
            polys.append(tr.apply(clipped))
        instances.append(
            Instance(
                image_id=inst.image_id,
                category_id=inst.category_id,
                iscrowd=inst.iscrowd,
                polygons=polys,
            )
        )
    return AnnotationSet(ann.images, instances, ann.category_id), transforms


def load_letterboxed_image(path, width: int, height: int, target: int = 640) -> np.ndarray:
    """Load an RGB image file and letterbox its pixels to ``target x target``
    (bilinear resize, black padding).  Returns float32 in [0, 1]."""
    tr = letterbox_transform(width, height, target)
    with Image.open(path) as im:
        rgb = im.convert("RGB")
        new_w = round_half_away(width * tr.scale)
        new_h = round_half_away(height * tr.scale)
        resized = rgb.resize((new_w, new_h), Image.BILINEAR)
    canvas = Image.new("RGB", (target, target), (0, 0, 0))
    canvas.paste(resized, (tr.pad_x, tr.pad_y))
    return np.asarray(canvas, dtype=np.float32) / 255.0


def pixel_polygons(
    instance: Instance, width: Optional[int] = None, height: Optional[int] = None
) -> List[Polygon]:
    """The instance's polygons as integer-pixel rings.

    Vertices round half-away-from-zero and, when grid dimensions are given,
    clamp into the grid; duplicates created by rounding are merged and
    unusable (degenerate) parts dropped with a warning.
    """
    out: List[Polygon] = []
    for poly in instance.polygons:
        pts: List[PixelPoint] = []
        for x, y in poly:
            px = round_half_away(float(x))
            py = round_half_away(float(y))
            if width is not None:
                px = min(max(px, 0), width - 1)
            if height is not None:
                py = min(max(py, 0), height - 1)
            p = PixelPoint(px, py)
            if not pts or p != pts[-1]:
                pts.append(p)
        if len(pts) > 1 and pts[0] == pts[-1]:
            pts.pop()
        try:
            out.append(Polygon(tuple(pts)))
        except DegeneratePolygon as e:
            log.warning("dropping degenerate polygon (image %d): %s", instance.image_id, e)
    return out


def instance_mask(instance: Instance, width: int, height: int) -> np.ndarray:
    """Union raster mask of all the instance's polygon parts."""
    mask = np.zeros((height, width), dtype=bool)
    for poly in pixel_polygons(instance, width, height):
        mask |= rasterize_polygon_fill(poly, width, height)
    return mask


def size_bucket(instance: Instance, image: ImageInfo) -> str:
    """'small' / 'medium' / 'large' by raster mask area in original-image
    coordinates (small < 32^2 <= medium <= 96^2 < large)."""
    area = int(instance_mask(instance, image.width, image.height).sum())
    if area < SMALL_MAX_AREA:
        return "small"
    if area > LARGE_MIN_AREA:
        return "large"
    return "medium"
