"""Rectilinear room polygons, floor-mask rasterization and run-length encoding."""

from collections.abc import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from anchor_scene.domain.errors import ContractViolation
from anchor_scene.domain.models import FloorPlanMask
from anchor_scene.domain.shapes import FloatArray

Polygon = FloatArray  # (n, 2) vertices (x, z)


def rectangle_polygon(half_width: float, half_depth: float) -> Polygon:
    return np.array(
        [[-half_width, -half_depth], [half_width, -half_depth], [half_width, half_depth], [-half_width, half_depth]]
    )


def l_shaped_polygon(
    half_width: float,
    half_depth: float,
    notch_width: float,
    notch_depth: float,
    corner: int = 0,
) -> Polygon:
    """Rectangle with one corner cut away; ``corner`` 0..3 picks which (quadrant order)."""
    if not (0 < notch_width < 2 * half_width and 0 < notch_depth < 2 * half_depth):
        raise ContractViolation("notch must be smaller than the room")
    hw, hd = half_width, half_depth
    poly = np.array(
        [
            [-hw, -hd],
            [hw, -hd],
            [hw, hd - notch_depth],
            [hw - notch_width, hd - notch_depth],
            [hw - notch_width, hd],
            [-hw, hd],
        ]
    )
    sx, sz = [(1, 1), (-1, 1), (-1, -1), (1, -1)][corner % 4]
    return poly * np.array([sx, sz])


def polygon_area(polygon: ArrayLike) -> float:
    p = np.asarray(polygon, dtype=np.float64)
    x, z = p[:, 0], p[:, 1]
    return float(abs(np.dot(x, np.roll(z, -1)) - np.dot(z, np.roll(x, -1))) / 2)


def validate_polygon(polygon: ArrayLike) -> Polygon:
    """Check the polygon is rectilinear with non-degenerate edges and positive area."""
    p = np.asarray(polygon, dtype=np.float64)
    if p.ndim != 2 or p.shape[1] != 2 or p.shape[0] < 4:
        raise ContractViolation(f"room polygon needs >= 4 (x, z) vertices, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ContractViolation("room polygon has non-finite vertices")
    edges = np.roll(p, -1, axis=0) - p
    horizontal = edges[:, 1] == 0
    vertical = edges[:, 0] == 0
    if np.any(horizontal & vertical):
        raise ContractViolation("room polygon has a zero-length edge")
    if not np.all(horizontal | vertical):
        raise ContractViolation("room polygon is not rectilinear")
    if polygon_area(p) <= 0:
        raise ContractViolation("room polygon has zero area")
    return p


def points_in_polygon(polygon: Polygon, x: FloatArray, z: FloatArray) -> NDArray[np.bool_]:
    """Even-odd ray casting along +x."""
    inside = np.zeros(np.shape(x), dtype=bool)
    n = polygon.shape[0]
    for i in range(n):
        x1, z1 = polygon[i]
        x2, z2 = polygon[(i + 1) % n]
        if z1 == z2:
            continue
        crosses = (z1 > z) != (z2 > z)
        x_at = x1 + (z - z1) * (x2 - x1) / (z2 - z1)
        inside ^= crosses & (x < x_at)
    return inside


def grid_transform(height: int, width: int, extent: float) -> tuple[float, float, float, float, float, float]:
    """World (x, z) in [-extent, extent]^2 to continuous (col, row) grid coordinates."""
    return (width / (2 * extent), 0.0, width / 2, 0.0, height / (2 * extent), height / 2)


def rasterize_floor(polygon: ArrayLike, height: int, width: int, extent: float) -> FloorPlanMask:
    """Cell = 1 iff its center lies inside the polygon."""
    poly = validate_polygon(polygon)
    if height < 1 or width < 1 or extent <= 0:
        raise ContractViolation("grid dimensions and extent must be positive")
    xs = -extent + (np.arange(width) + 0.5) * (2 * extent / width)
    zs = -extent + (np.arange(height) + 0.5) * (2 * extent / height)
    gx, gz = np.meshgrid(xs, zs)
    cells = points_in_polygon(poly, gx, gz)
    if not cells.any():
        raise ContractViolation("room polygon covers no cell center")
    return FloorPlanMask(cells=cells, transform=grid_transform(height, width, extent))


def encode_rle(cells: ArrayLike) -> str:
    """Comma-separated run lengths over the row-major bits, starting with a run of 0s."""
    flat = np.asarray(cells).astype(bool).reshape(-1)
    runs: list[int] = []
    current, length = False, 0
    for bit in flat:
        if bit == current:
            length += 1
        else:
            runs.append(length)
            current, length = bool(bit), 1
    runs.append(length)
    return ",".join(str(r) for r in runs)


def decode_rle(text: str, height: int, width: int) -> NDArray[np.bool_]:
    try:
        runs: Sequence[int] = [int(part) for part in text.split(",")] if text else []
    except ValueError as e:
        raise ContractViolation(f"malformed run-length string: {e}") from e
    if any(r < 0 for r in runs):
        raise ContractViolation("run lengths must be non-negative")
    if sum(runs) != height * width:
        raise ContractViolation(f"run lengths cover {sum(runs)} cells, expected {height * width}")
    values = np.arange(len(runs)) % 2 == 1
    return np.repeat(values, runs).reshape(height, width)
