"""Tests for sampling, distances, boxes, floor plans, solids and grid export."""

import math
from pathlib import Path

import numpy as np
import pytest

from anchor_scene.domain.errors import ContractViolation, EmptyShapeError
from anchor_scene.domain.shapes import CANONICAL_HALF_EXTENT, Box, Cylinder, FurnitureSolid, OccupancyGrid
from anchor_scene.geometry.floor import (
    decode_rle,
    encode_rle,
    l_shaped_polygon,
    polygon_area,
    rasterize_floor,
    rectangle_polygon,
    validate_polygon,
)
from anchor_scene.geometry.grids import export_obj, extract_boundary_points
from anchor_scene.geometry.metrics import chamfer, mean_pairwise_chamfer
from anchor_scene.geometry.obb import OrientedBox, colliding_mask, obb_overlap
from anchor_scene.geometry.sampling import fps, knn_patches
from anchor_scene.geometry.solids import (
    TEMPLATES,
    make_furniture,
    mask_iou,
    occupancy,
    sample_queries,
    sample_surface,
    surface_cloud,
)


def unit_box(x: float, y: float = 0.0, z: float = 0.0, yaw: float = 0.0) -> OrientedBox:
    return OrientedBox(center=(x, y, z), half_extents=(1.0, 1.0, 1.0), yaw=yaw)


class TestSampling:
    """Farthest point sampling and k-NN patches."""

    def test_fps_on_a_line(self) -> None:
        """Start at 0, then the far end, then the lower of two tied midpoints."""
        line = np.stack([np.arange(10.0), np.zeros(10), np.zeros(10)], axis=1)
        np.testing.assert_array_equal(fps(line, 3), [0, 9, 4])

    def test_fps_bounds(self) -> None:
        """m must lie in [1, n]."""
        with pytest.raises(ContractViolation):
            fps(np.zeros((3, 3)), 4)

    def test_knn_patches(self, rng: np.random.Generator) -> None:
        """Each anchor's nearest neighbour is itself at the relative origin."""
        cloud = rng.normal(size=(50, 3))
        anchors = cloud[fps(cloud, 5)]
        patches = knn_patches(cloud, anchors, 4)
        assert patches.patches.shape == (5, 4, 3)
        assert patches.k == 4
        np.testing.assert_allclose(patches.patches[:, 0], 0.0)


class TestChamfer:
    """Point-cloud distances."""

    def test_known_value(self) -> None:
        """Two single points one unit apart: 1 + 1."""
        assert chamfer([[0.0, 0.0, 0.0]], [[1.0, 0.0, 0.0]]) == pytest.approx(2.0)

    def test_self_distance_is_zero(self, rng: np.random.Generator) -> None:
        """A cloud has zero distance to itself."""
        cloud = rng.normal(size=(20, 3))
        assert chamfer(cloud, cloud) == 0.0

    def test_pairwise_needs_two(self) -> None:
        """A single cloud has no pairs."""
        with pytest.raises(ContractViolation):
            mean_pairwise_chamfer([np.zeros((1, 3))])


class TestOrientedBox:
    """Separating-axis overlap of yawed boxes."""

    def test_identical_boxes_overlap(self) -> None:
        """Coincident boxes collide."""
        assert obb_overlap(unit_box(0.0), unit_box(0.0))

    def test_touching_boxes_do_not_collide(self) -> None:
        """Shared faces are not a collision."""
        assert not obb_overlap(unit_box(0.0), unit_box(2.0))

    def test_rotation_creates_overlap(self) -> None:
        """A 45 degree box reaches further along x than its half-extent."""
        assert not obb_overlap(unit_box(0.0), unit_box(2.3))
        assert obb_overlap(unit_box(0.0), unit_box(2.3, yaw=math.pi / 4))

    def test_vertical_separation(self) -> None:
        """Same footprint at different heights."""
        assert not obb_overlap(unit_box(0.0, y=0.0), unit_box(0.0, y=3.0))

    def test_colliding_mask(self) -> None:
        """Only the overlapping pair is flagged."""
        mask = colliding_mask([unit_box(0.0), unit_box(1.5), unit_box(6.0)])
        np.testing.assert_array_equal(mask, [True, True, False])

    def test_footprint_and_contains(self) -> None:
        """Corners of an unrotated box and a boundary-inclusive membership test."""
        box = OrientedBox(center=(1.0, 0.5, 0.0), half_extents=(0.5, 0.5, 0.25), yaw=0.0)
        corners = box.footprint()
        np.testing.assert_allclose(corners.min(axis=0), [0.5, -0.25])
        np.testing.assert_allclose(corners.max(axis=0), [1.5, 0.25])
        inside = box.contains(np.array([[1.0, 0.5, 0.0], [1.5, 1.0, 0.25], [2.0, 0.5, 0.0]]))
        np.testing.assert_array_equal(inside, [True, True, False])


class TestFloor:
    """Room polygons, rasterization and run-length codes."""

    def test_rasterize_rectangle(self) -> None:
        """4 m room on 0.5 m cells covers 8 x 8 cells."""
        mask = rasterize_floor(rectangle_polygon(2.0, 2.0), 16, 16, 4.0)
        assert int(mask.cells.sum()) == 64
        assert mask.contains([0.0, 3.0], [0.0, 3.0]).tolist() == [True, False]

    def test_interior_centers_round_trip(self) -> None:
        """Every interior cell center maps back onto an interior cell."""
        mask = rasterize_floor(rectangle_polygon(2.0, 2.0), 16, 16, 4.0)
        centers = mask.interior_centers()
        assert centers.shape == (64, 2)
        assert mask.contains(centers[:, 0], centers[:, 1]).all()
        assert np.abs(centers).max() < 2.0

    def test_l_shape_area(self) -> None:
        """A 1 x 1 notch out of a 4 x 4 room."""
        polygon = l_shaped_polygon(2.0, 2.0, 1.0, 1.0, corner=2)
        assert polygon_area(polygon) == pytest.approx(15.0)
        validate_polygon(polygon)

    def test_invalid_polygons(self) -> None:
        """Triangles and slanted edges are rejected."""
        with pytest.raises(ContractViolation):
            validate_polygon([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        with pytest.raises(ContractViolation, match="rectilinear"):
            validate_polygon([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 2.0]])

    def test_rle(self) -> None:
        """Runs start with zeros and decode back to the grid."""
        cells = np.array([[False, True], [True, True]])
        assert encode_rle(cells) == "1,3"
        assert encode_rle([[True, False]]) == "0,1,1"
        np.testing.assert_array_equal(decode_rle("1,3", 2, 2), cells)

    def test_rle_size_mismatch(self) -> None:
        """Runs must cover the grid exactly."""
        with pytest.raises(ContractViolation, match="cover"):
            decode_rle("1,2", 2, 2)


class TestSolids:
    """Procedural furniture templates."""

    def test_deterministic(self) -> None:
        """The same style seed yields the same solid."""
        assert make_furniture("chair", 3) == make_furniture("chair", 3)
        assert make_furniture("chair", 3) != make_furniture("chair", 4)

    def test_every_template_fits_canonical_cube(self) -> None:
        """Bounds reach the canonical half extent on every axis."""
        for category in TEMPLATES:
            lo, hi = make_furniture(category, 0).bounds()
            np.testing.assert_allclose(hi, CANONICAL_HALF_EXTENT, atol=1e-9)
            np.testing.assert_allclose(lo, -CANONICAL_HALF_EXTENT, atol=1e-9)

    def test_unknown_category(self) -> None:
        """Reserved labels have no template."""
        with pytest.raises(ContractViolation):
            make_furniture("start", 0)

    def test_surface_samples_are_occupied(self, rng: np.random.Generator) -> None:
        """Surface points lie on the solid's boundary."""
        for category in ("table", "lamp"):
            solid = make_furniture(category, 1)
            points = sample_surface(solid, 300, rng)
            assert points.shape == (300, 3)
            assert occupancy(solid, points).all()

    def test_query_labels(self, rng: np.random.Generator) -> None:
        """Labels agree with the analytic occupancy."""
        solid = make_furniture("bed", 2)
        queries, labels = sample_queries(solid, 100, rng)
        assert queries.shape == (100, 3)
        np.testing.assert_array_equal(labels, occupancy(solid, queries).astype(float))

    def test_occupancy_matches_brute_force(self) -> None:
        """10^5 random points agree with a per-primitive membership check on every template."""
        points = np.random.default_rng(5).uniform(-1.0, 1.0, size=(100_000, 3))
        for category in TEMPLATES:
            solid = make_furniture(category, 0)
            expected = np.zeros(len(points), dtype=bool)
            for prim in solid.primitives:
                rel = points - np.asarray(prim.center)
                if isinstance(prim, Box):
                    expected |= np.all(np.abs(rel) <= np.asarray(prim.half_extents), axis=1)
                else:
                    assert isinstance(prim, Cylinder)
                    radial = np.hypot(rel[:, 0], rel[:, 2])
                    expected |= (radial <= prim.radius) & (np.abs(rel[:, 1]) <= prim.half_height)
            np.testing.assert_array_equal(occupancy(solid, points), expected, err_msg=category)

    def test_surface_samples_follow_face_areas(self) -> None:
        """On an isolated box each face receives samples in proportion to its area."""
        half = np.array([0.6, 0.5, 0.4])
        box = Box(center=(0.0, 0.0, 0.0), half_extents=(0.6, 0.5, 0.4))
        solid = FurnitureSolid(category="shelf", primitives=(box,))
        n = 100_000
        points = sample_surface(solid, n, np.random.default_rng(6))
        total_area = 8.0 * (half[0] * half[1] + half[1] * half[2] + half[0] * half[2])
        for axis in range(3):
            a, b = (half[j] for j in range(3) if j != axis)
            expected = n * 4.0 * a * b / total_area
            for sign in (-1.0, 1.0):
                count = int(np.isclose(points[:, axis], sign * half[axis], atol=1e-12).sum())
                assert count == pytest.approx(expected, rel=0.03), (axis, sign)

    def test_style_seeds_change_the_surface(self) -> None:
        """Different chair styles have a positive Chamfer distance; equal styles have none."""
        a = surface_cloud(make_furniture("chair", 3), 512, seed=0)
        b = surface_cloud(make_furniture("chair", 4), 512, seed=0)
        assert chamfer(a, b) > 0.0
        assert chamfer(a, surface_cloud(make_furniture("chair", 3), 512, seed=0)) == 0.0

    def test_mask_iou(self) -> None:
        """Both empty counts as a perfect match."""
        empty = np.zeros(4, dtype=bool)
        assert mask_iou(empty, empty) == 1.0
        assert mask_iou(np.array([True, True, False, False]), np.array([True, False, True, False])) == pytest.approx(
            1 / 3
        )


class TestGridExport:
    """Boundary extraction and OBJ output."""

    def test_full_grid_boundary(self, tmp_path: Path) -> None:
        """An 8^3 block has 8^3 - 6^3 boundary voxels."""
        grid = OccupancyGrid(np.full((8, 8, 8), 0.75))
        assert extract_boundary_points(grid).shape == (296, 3)
        path = tmp_path / "block.obj"
        assert export_obj(grid, path) == 296
        lines = path.read_text(encoding="utf-8").splitlines()
        assert sum(line.startswith("v ") for line in lines) == 296 * 8
        assert sum(line.startswith("f ") for line in lines) == 296 * 6

    def test_empty_grid(self) -> None:
        """Nothing above threshold."""
        with pytest.raises(EmptyShapeError):
            extract_boundary_points(OccupancyGrid(np.zeros((4, 4, 4))))

    def test_solid_export(self, tmp_path: Path) -> None:
        """One cuboid per primitive, mapped to the world when asked."""
        solid = make_furniture("lamp", 0)
        path = tmp_path / "lamp.obj"
        count = export_obj(solid, path, to_world=lambda v: v + 10.0)
        assert count == len(solid.primitives)
        first = path.read_text(encoding="utf-8").splitlines()[0].split()
        assert all(float(value) > 8.0 for value in first[1:])
