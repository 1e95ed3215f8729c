"""Integer-pixel geometry: points, polylines, polygons and their raster forms.

All rasterization is deterministic.  Segments use the midpoint line algorithm
with a fixed tie rule and a canonical direction, so the pixel set of a segment
does not depend on endpoint order.  Polygon interiors follow the even-odd rule
evaluated at pixel centers; a polygon's raster mask additionally includes every
pixel of its rasterized edges (boundary-inclusive convention).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, List, Sequence, Tuple

import numpy as np


class DegeneratePolygon(Exception):
    """Polygon with fewer than 3 usable vertices or no two-dimensional extent."""


class OutOfRange(Exception):
    """Arc-length query lies outside the remaining length of the line."""


@dataclass(frozen=True, order=True)
class PixelPoint:
    """A point on the integer pixel grid. ``x`` is the column, ``y`` the row."""

    x: int
    y: int

    def distance_to(self, other: "PixelPoint") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


def _as_points(vertices: Iterable) -> Tuple[PixelPoint, ...]:
    out = []
    for v in vertices:
        if isinstance(v, PixelPoint):
            out.append(v)
        else:
            x, y = v
            out.append(PixelPoint(int(x), int(y)))
    return tuple(out)


@dataclass(frozen=True)
class Polyline:
    """An open or closed chain of vertices with no consecutive duplicates."""

    vertices: Tuple[PixelPoint, ...]
    closed: bool = False

    def __post_init__(self):
        object.__setattr__(self, "vertices", _as_points(self.vertices))
        if len(self.vertices) < 1:
            raise ValueError("polyline needs at least one vertex")
        for a, b in zip(self.vertices, self.vertices[1:]):
            if a == b:
                raise ValueError("consecutive duplicate vertices")
        if self.closed and len(self.vertices) > 1 and self.vertices[0] == self.vertices[-1]:
            raise ValueError("closed polyline must not repeat its first vertex")


@dataclass(frozen=True)
class Polygon:
    """A closed ring of at least 3 vertices spanning a real area.

    Raises DegeneratePolygon when there are fewer than 3 vertices, when two
    cyclically adjacent vertices coincide, or when all vertices are collinear.
    """

    vertices: Tuple[PixelPoint, ...]

    def __post_init__(self):
        object.__setattr__(self, "vertices", _as_points(self.vertices))
        n = len(self.vertices)
        if n < 3:
            raise DegeneratePolygon(f"need at least 3 vertices, got {n}")
        for i in range(n):
            if self.vertices[i] == self.vertices[(i + 1) % n]:
                raise DegeneratePolygon("coincident adjacent vertices")
        if _all_collinear(self.vertices):
            raise DegeneratePolygon("all vertices are collinear")

    @property
    def closed(self) -> bool:
        return True


def _all_collinear(pts: Sequence[PixelPoint]) -> bool:
    a = pts[0]
    b = None
    for p in pts[1:]:
        if p != a:
            b = p
            break
    if b is None:
        return True
    for p in pts[1:]:
        cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)
        if cross != 0:
            return False
    return True


def round_half_away(v: float) -> int:
    """Round to nearest integer with halves going away from zero."""
    if v >= 0:
        return int(math.floor(v + 0.5))
    return int(math.ceil(v - 0.5))


def _midpoint_line(a: PixelPoint, b: PixelPoint) -> List[PixelPoint]:
    """Midpoint line algorithm along the driving axis; ties keep the current
    secondary coordinate (the straight step)."""
    dx = b.x - a.x
    dy = b.y - a.y
    sx = 1 if dx >= 0 else -1
    sy = 1 if dy >= 0 else -1
    adx = abs(dx)
    ady = abs(dy)
    pts: List[PixelPoint] = []
    if adx >= ady:
        d = 2 * ady - adx
        y = a.y
        x = a.x
        for _ in range(adx + 1):
            pts.append(PixelPoint(x, y))
            if d > 0:
                y += sy
                d -= 2 * adx
            d += 2 * ady
            x += sx
    else:
        d = 2 * adx - ady
        x = a.x
        y = a.y
        for _ in range(ady + 1):
            pts.append(PixelPoint(x, y))
            if d > 0:
                x += sx
                d -= 2 * ady
            d += 2 * adx
            y += sy
    return pts


def rasterize_segment(a: PixelPoint, b: PixelPoint) -> List[PixelPoint]:
    """8-connected pixel chain from ``a`` to ``b``, both endpoints included.

    The segment is always traced from its lexicographically smaller endpoint,
    so the pixel *set* is identical for both argument orders; the returned
    sequence always starts at ``a`` and ends at ``b``.
    """
    if (b.x, b.y) < (a.x, a.y):
        pts = _midpoint_line(b, a)
        pts.reverse()
        return pts
    return _midpoint_line(a, b)


def iter_edges(vertices: Sequence[PixelPoint], closed: bool) -> Iterator[Tuple[PixelPoint, PixelPoint]]:
    for i in range(len(vertices) - 1):
        yield vertices[i], vertices[i + 1]
    if closed and len(vertices) > 1:
        yield vertices[-1], vertices[0]


def outline_pixels(vertices: Sequence[PixelPoint], closed: bool) -> List[PixelPoint]:
    """Every pixel of every rasterized edge, in traversal order (duplicates at
    shared vertices are removed, including where a closing edge rejoins the
    start)."""
    pts: List[PixelPoint] = []
    if len(vertices) == 1:
        return [vertices[0]]
    for a, b in iter_edges(vertices, closed):
        seg = rasterize_segment(a, b)
        if pts and seg and seg[0] == pts[-1]:
            seg = seg[1:]
        pts.extend(seg)
    if closed and len(pts) > 1 and pts[-1] == pts[0]:
        pts.pop()
    return pts


def _check_in_grid(vertices: Sequence[PixelPoint], width: int, height: int) -> None:
    for v in vertices:
        if not (0 <= v.x < width and 0 <= v.y < height):
            raise ValueError(f"vertex ({v.x},{v.y}) outside {width}x{height} grid")


def rasterize_polygon_fill(poly: Polygon, width: int, height: int) -> np.ndarray:
    """Boolean (height, width) mask of the polygon.

    A pixel is set when its center passes the even-odd test against the ring
    or when it lies on one of the rasterized edges.
    """
    _check_in_grid(poly.vertices, width, height)
    mask = np.zeros((height, width), dtype=bool)
    verts = poly.vertices
    n = len(verts)

    ys = [v.y for v in verts]
    y_lo = max(0, min(ys))
    y_hi = min(height - 1, max(ys))
    for y in range(y_lo, y_hi + 1):
        crossings = []
        for i in range(n):
            a = verts[i]
            b = verts[(i + 1) % n]
            if (a.y > y) != (b.y > y):
                xc = (b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x
                crossings.append(xc)
        crossings.sort()
        for k in range(0, len(crossings) - 1, 2):
            lo = crossings[k]
            hi = crossings[k + 1]
            x0 = max(0, math.ceil(lo))
            x1 = min(width - 1, math.ceil(hi) - 1)
            if x0 <= x1:
                mask[y, x0 : x1 + 1] = True

    for p in outline_pixels(verts, closed=True):
        mask[p.y, p.x] = True
    return mask


def raster_iou(g: Polygon, p: Polygon, width: int, height: int) -> float:
    """Intersection-over-union of the two polygons' raster masks."""
    mg = rasterize_polygon_fill(g, width, height)
    mp = rasterize_polygon_fill(p, width, height)
    union = int(np.logical_or(mg, mp).sum())
    if union == 0:
        return 0.0
    inter = int(np.logical_and(mg, mp).sum())
    return inter / union


def polygon_area(poly: Polygon) -> float:
    """Shoelace area of the ring (continuous, not raster, units of px^2)."""
    verts = poly.vertices
    if len(verts) < 3:
        raise DegeneratePolygon("area needs at least 3 vertices")
    s = 0
    n = len(verts)
    for i in range(n):
        a = verts[i]
        b = verts[(i + 1) % n]
        s += a.x * b.y - b.x * a.y
    return abs(s) / 2.0


def path_vertices(line, start_index: int) -> List[PixelPoint]:
    """Vertices of the remaining path from ``start_index`` to the line's end.

    For a closed line the path continues through the closing edge back to the
    first vertex, then stops.
    """
    verts = list(line.vertices)
    closed = bool(getattr(line, "closed", False))
    if not (0 <= start_index < len(verts)):
        raise OutOfRange(f"start index {start_index} out of range")
    path = verts[start_index:]
    if closed:
        path.append(verts[0])
    return path


def arc_position(line, start_index: int, s: float) -> PixelPoint:
    """Point at arc length ``s`` from vertex ``start_index`` along the line,
    rounded half-away-from-zero to the pixel grid.

    Raises OutOfRange when ``s`` is negative or beyond the remaining length.
    """
    if s < 0:
        raise OutOfRange(f"negative arc length {s}")
    path = path_vertices(line, start_index)
    remaining = float(s)
    for i in range(len(path) - 1):
        a, b = path[i], path[i + 1]
        length = a.distance_to(b)
        if remaining <= length + 1e-9:
            t = min(remaining / length, 1.0) if length > 0 else 0.0
            x = a.x + t * (b.x - a.x)
            y = a.y + t * (b.y - a.y)
            return PixelPoint(round_half_away(x), round_half_away(y))
        remaining -= length
    if remaining <= 1e-9 and path:
        return path[-1]
    raise OutOfRange(f"arc length {s} beyond remaining path")


def path_length(line, start_index: int = 0) -> float:
    """Total arc length of the remaining path from ``start_index``."""
    path = path_vertices(line, start_index)
    return float(sum(path[i].distance_to(path[i + 1]) for i in range(len(path) - 1)))
