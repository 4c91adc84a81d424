"""Occupancy-grid surface extraction and Wavefront OBJ export."""

import logging
from collections.abc import Callable
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from anchor_scene.domain.errors import ContractViolation, EmptyShapeError
from anchor_scene.domain.shapes import Box, FloatArray, FurnitureSolid, OccupancyGrid, voxel_centers

logger = logging.getLogger(__name__)

PointMap = Callable[[FloatArray], FloatArray]

# Corner order of a cuboid; faces index into it (1-based in the file).
_CORNERS = np.array(
    [
        [-1, -1, -1],
        [1, -1, -1],
        [1, 1, -1],
        [-1, 1, -1],
        [-1, -1, 1],
        [1, -1, 1],
        [1, 1, 1],
        [-1, 1, 1],
    ],
    dtype=np.float64,
)
_QUADS = np.array(
    [
        [0, 3, 2, 1],
        [4, 5, 6, 7],
        [0, 1, 5, 4],
        [2, 3, 7, 6],
        [1, 2, 6, 5],
        [0, 4, 7, 3],
    ],
    dtype=np.int64,
)


def boundary_mask(grid: OccupancyGrid, threshold: float) -> NDArray[np.bool_]:
    """Voxels at or above threshold with at least one face-neighbour below it.

    Cells beyond the grid count as below threshold.
    """
    if not 0.0 < threshold < 1.0:
        raise ContractViolation(f"threshold must lie in (0, 1), got {threshold}")
    solid = grid.values >= threshold
    if not solid.any():
        raise EmptyShapeError(f"no voxel reaches threshold {threshold}")
    padded = np.pad(solid, 1, constant_values=False)
    interior = np.ones_like(solid)
    r = grid.resolution
    for axis in range(3):
        for shift in (-1, 1):
            sl = [slice(1, r + 1)] * 3
            sl[axis] = slice(1 + shift, r + 1 + shift)
            interior &= padded[tuple(sl)]
    return solid & ~interior


def extract_boundary_points(grid: OccupancyGrid, threshold: float = 0.5) -> FloatArray:
    """Centers of the boundary voxels, in (x, y, z) index order."""
    mask = boundary_mask(grid, threshold)
    return voxel_centers(grid.resolution)[mask]


def cuboids_to_mesh(centers: FloatArray, halves: FloatArray) -> tuple[FloatArray, NDArray[np.int64]]:
    """Vertices (8 per cuboid) and quad faces (6 per cuboid, 0-based)."""
    vertices = (centers[:, None, :] + _CORNERS[None, :, :] * halves[:, None, :]).reshape(-1, 3)
    faces = (_QUADS[None, :, :] + 8 * np.arange(centers.shape[0])[:, None, None]).reshape(-1, 4)
    return vertices, faces


def write_obj(path: Path, vertices: FloatArray, faces: NDArray[np.int64]) -> None:
    lines = [f"v {x:.6f} {y:.6f} {z:.6f}" for x, y, z in vertices]
    lines += ["f " + " ".join(str(int(i) + 1) for i in face) for face in faces]
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def export_obj(
    shape: OccupancyGrid | FurnitureSolid,
    path: Path,
    threshold: float = 0.5,
    to_world: PointMap | None = None,
) -> int:
    """Write one cuboid per boundary voxel (grids) or per primitive (solids).

    Cylinders are exported as their bounding cuboid. ``to_world`` maps vertices out of
    the canonical frame. Returns the number of cuboids written.
    """
    if isinstance(shape, OccupancyGrid):
        mask = boundary_mask(shape, threshold)
        centers = voxel_centers(shape.resolution)[mask]
        halves = np.full_like(centers, shape.pitch / 2)
    else:
        centers = np.array([np.asarray(p.center) for p in shape.primitives])
        halves = np.array(
            [
                np.asarray(p.half_extents) if isinstance(p, Box) else (p.upper - p.lower) / 2
                for p in shape.primitives
            ]
        )
    vertices, faces = cuboids_to_mesh(centers, halves)
    if to_world is not None:
        vertices = to_world(vertices)
    write_obj(path, vertices, faces)
    logger.debug(f"OBJ written: {path} ({centers.shape[0]} cuboids)")
    return int(centers.shape[0])
