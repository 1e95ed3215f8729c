"""Geometry primitives: line rasterization, polygon fill, arc walking."""

import math

import numpy as np
import pytest

from outliner.geometry import (
    DegeneratePolygon,
    OutOfRange,
    PixelPoint,
    Polygon,
    Polyline,
    arc_position,
    iter_edges,
    outline_pixels,
    path_length,
    path_vertices,
    polygon_area,
    raster_iou,
    rasterize_polygon_fill,
    rasterize_segment,
    round_half_away,
)

from oracles import (
    iou_oracle,
    polygon_mask_oracle,
    random_polygon_vertices,
    segment_oracle,
)


def pts(*pairs):
    return [PixelPoint(x, y) for x, y in pairs]


class TestPixelPoint:
    def test_ordering_is_lexicographic(self):
        assert PixelPoint(1, 9) < PixelPoint(2, 0)
        assert PixelPoint(1, 2) < PixelPoint(1, 3)

    def test_distance(self):
        assert PixelPoint(0, 0).distance_to(PixelPoint(3, 4)) == 5.0


@pytest.mark.parametrize(
    "value,expected",
    [
        (0.0, 0),
        (0.49, 0),
        (0.5, 1),
        (1.5, 2),
        (2.5, 3),
        (-0.5, -1),
        (-1.5, -2),
        (-2.5, -3),
        (-0.49, 0),
        (639.5, 640),
    ],
)
def test_round_half_away(value, expected):
    assert round_half_away(value) == expected


class TestRasterizeSegment:
    @pytest.mark.parametrize(
        "a,b,expected",
        [
            # single point
            ((3, 3), (3, 3), [(3, 3)]),
            # horizontal / vertical
            ((0, 0), (4, 0), [(0, 0), (1, 0), (2, 0), (3, 0), (4, 0)]),
            ((2, 1), (2, 4), [(2, 1), (2, 2), (2, 3), (2, 4)]),
            # perfect diagonal
            ((0, 0), (3, 3), [(0, 0), (1, 1), (2, 2), (3, 3)]),
            # the decision tie on the first step keeps the straight step
            ((0, 0), (2, 1), [(0, 0), (1, 0), (2, 1)]),
            ((0, 0), (1, 2), [(0, 0), (0, 1), (1, 2)]),
            # gentle slope: y advances only past the half-way column
            (
                (0, 0),
                (10, 1),
                [(0, 0), (1, 0), (2, 0), (3, 0), (4, 0), (5, 0),
                 (6, 1), (7, 1), (8, 1), (9, 1), (10, 1)],
            ),
            # descending secondary axis, tie again straight
            ((0, 0), (2, -1), [(0, 0), (1, 0), (2, -1)]),
            ((0, 5), (6, 2), [(0, 5), (1, 5), (2, 4), (3, 4), (4, 3), (5, 3), (6, 2)]),
        ],
    )
    def test_frozen_segments(self, a, b, expected):
        assert rasterize_segment(PixelPoint(*a), PixelPoint(*b)) == pts(*expected)

    @pytest.mark.parametrize(
        "a,b,expected",
        [
            ((0, 0), (2, 1), [(0, 0), (1, 0), (2, 1)]),
            ((0, 0), (10, 1), [(0, 0), (1, 0), (2, 0), (3, 0), (4, 0), (5, 0),
                               (6, 1), (7, 1), (8, 1), (9, 1), (10, 1)]),
        ],
    )
    def test_direction_independent(self, a, b, expected):
        forward = rasterize_segment(PixelPoint(*a), PixelPoint(*b))
        backward = rasterize_segment(PixelPoint(*b), PixelPoint(*a))
        assert forward == pts(*expected)
        assert backward == list(reversed(forward))

    def test_matches_exact_rational_oracle(self):
        rng = np.random.default_rng(2024)
        for _ in range(300):
            ax, ay, bx, by = (int(v) for v in rng.integers(-20, 21, size=4))
            got = [(p.x, p.y) for p in rasterize_segment(PixelPoint(ax, ay), PixelPoint(bx, by))]
            assert got == segment_oracle(ax, ay, bx, by), (ax, ay, bx, by)

    def test_walk_invariants(self):
        rng = np.random.default_rng(77)
        for _ in range(100):
            ax, ay, bx, by = (int(v) for v in rng.integers(0, 64, size=4))
            line = rasterize_segment(PixelPoint(ax, ay), PixelPoint(bx, by))
            assert line[0] == PixelPoint(ax, ay)
            assert line[-1] == PixelPoint(bx, by)
            assert len(line) == max(abs(bx - ax), abs(by - ay)) + 1
            for p, q in zip(line, line[1:]):
                assert max(abs(p.x - q.x), abs(p.y - q.y)) == 1


class TestRings:
    def test_polyline_rejects_bad_chains(self):
        with pytest.raises(ValueError):
            Polyline(())
        with pytest.raises(ValueError):
            Polyline(pts((0, 0), (0, 0), (1, 1)))
        with pytest.raises(ValueError):
            Polyline(pts((0, 0), (1, 1), (0, 0)), closed=True)

    def test_polyline_single_vertex_is_fine(self):
        assert Polyline(pts((5, 5))).vertices == tuple(pts((5, 5)))

    @pytest.mark.parametrize(
        "ring",
        [
            [(0, 0), (1, 1)],
            [(0, 0), (0, 0), (1, 1)],
            [(0, 0), (1, 1), (0, 0)],  # cyclic duplicate with the first vertex
            [(0, 0), (1, 1), (2, 2)],  # collinear
            [(0, 0), (2, 0), (5, 0), (1, 0)],
        ],
    )
    def test_polygon_rejects_degenerate(self, ring):
        with pytest.raises(DegeneratePolygon):
            Polygon(tuple(pts(*ring)))

    def test_polygon_accepts_concave_and_self_intersecting(self):
        Polygon(pts((0, 0), (10, 0), (10, 10), (5, 2), (0, 10)))
        Polygon(pts((0, 0), (10, 10), (10, 0), (0, 10)))  # bowtie

    def test_iter_edges(self):
        ring = pts((0, 0), (4, 0), (4, 4))
        open_edges = list(iter_edges(ring, closed=False))
        closed_edges = list(iter_edges(ring, closed=True))
        assert open_edges == [(ring[0], ring[1]), (ring[1], ring[2])]
        assert closed_edges == open_edges + [(ring[2], ring[0])]

    def test_outline_pixels_no_duplicate_joints(self):
        ring = pts((0, 0), (4, 0), (4, 4), (0, 4))
        pixels = outline_pixels(ring, closed=True)
        assert len(pixels) == len(set(pixels)) == 16  # 4 sides of 4 px each
        assert set(p for p in pixels if p.y == 0) == set(pts(*[(x, 0) for x in range(5)]))


class TestPolygonFill:
    def test_square_pixel_count_is_boundary_inclusive(self):
        mask = rasterize_polygon_fill(square := Polygon(pts((0, 0), (4, 0), (4, 4), (0, 4))), 8, 8)
        assert int(mask.sum()) == 25
        assert mask[:5, :5].all()
        assert polygon_area(square) == 16.0

    def test_fill_matches_membership_oracle_on_shapes(self):
        shapes = [
            [(1, 1), (6, 1), (6, 6), (1, 6)],
            [(0, 0), (12, 0), (12, 12), (6, 4), (0, 12)],  # concave
            [(0, 0), (12, 12), (12, 0), (0, 12)],  # self-intersecting, even-odd
            [(3, 0), (6, 6), (0, 2), (6, 2), (0, 6)],  # five-point star walk
        ]
        for ring in shapes:
            got = rasterize_polygon_fill(Polygon(pts(*ring)), 16, 16)
            want = polygon_mask_oracle(ring, 16, 16)
            assert np.array_equal(got, want), ring

    def test_fill_matches_membership_oracle_randomized(self):
        rng = np.random.default_rng(555)
        for _ in range(50):
            ring = random_polygon_vertices(rng, 64, 64)
            got = rasterize_polygon_fill(Polygon(pts(*ring)), 64, 64)
            want = polygon_mask_oracle(ring, 64, 64)
            assert np.array_equal(got, want), ring

    def test_vertices_must_lie_on_the_grid(self):
        poly = Polygon(pts((0, 0), (9, 0), (9, 9)))
        with pytest.raises(ValueError):
            rasterize_polygon_fill(poly, 8, 8)

    def test_iou_identical_disjoint_and_oracle(self):
        a = Polygon(pts((0, 0), (6, 0), (6, 6), (0, 6)))
        b = Polygon(pts((20, 20), (30, 20), (30, 30), (20, 30)))
        assert raster_iou(a, a, 40, 40) == 1.0
        assert raster_iou(a, b, 40, 40) == 0.0
        rng = np.random.default_rng(99)
        for _ in range(25):
            ra = random_polygon_vertices(rng, 48, 48)
            rb = random_polygon_vertices(rng, 48, 48)
            got = raster_iou(Polygon(pts(*ra)), Polygon(pts(*rb)), 48, 48)
            assert got == iou_oracle(ra, rb, 48, 48)

    def test_area_triangle(self):
        assert polygon_area(Polygon(pts((0, 0), (4, 0), (0, 3)))) == 6.0


class TestPathWalking:
    def test_path_vertices_open_and_closed(self):
        line = Polyline(pts((0, 0), (10, 0), (10, 10)))
        assert path_vertices(line, 0) == pts((0, 0), (10, 0), (10, 10))
        assert path_vertices(line, 1) == pts((10, 0), (10, 10))
        ring = Polygon(pts((0, 0), (10, 0), (10, 10)))
        assert path_vertices(ring, 2) == pts((10, 10), (0, 0))
        assert path_vertices(ring, 0)[-1] == PixelPoint(0, 0)

    def test_path_vertices_range_check(self):
        line = Polyline(pts((0, 0), (5, 0)))
        with pytest.raises(OutOfRange):
            path_vertices(line, 2)
        with pytest.raises(OutOfRange):
            path_vertices(line, -1)

    def test_arc_position_walks_and_rounds(self):
        line = Polyline(pts((0, 0), (10, 0), (10, 10)))
        assert arc_position(line, 0, 0.0) == PixelPoint(0, 0)
        assert arc_position(line, 0, 4.0) == PixelPoint(4, 0)
        assert arc_position(line, 0, 10.0) == PixelPoint(10, 0)
        assert arc_position(line, 0, 15.0) == PixelPoint(10, 5)
        assert arc_position(line, 0, 20.0) == PixelPoint(10, 10)
        assert arc_position(line, 0, 2.5) == PixelPoint(3, 0)  # half rounds away

    def test_arc_position_range_errors(self):
        line = Polyline(pts((0, 0), (10, 0)))
        with pytest.raises(OutOfRange):
            arc_position(line, 0, -1.0)
        with pytest.raises(OutOfRange):
            arc_position(line, 0, 10.1)

    def test_path_length(self):
        line = Polyline(pts((0, 0), (10, 0), (10, 10)))
        assert path_length(line) == 20.0
        assert path_length(line, 1) == 10.0
        ring = Polygon(pts((0, 0), (3, 0), (3, 4)))
        assert path_length(ring, 0) == pytest.approx(3 + 4 + 5)
        assert math.isclose(path_length(ring, 2), 5.0)
