"""Geometry value objects: CSG primitives, solids, patches and occupancy grids."""

import math
from dataclasses import dataclass
from typing import Self

import numpy as np
from numpy.typing import ArrayLike, NDArray

from anchor_scene.domain.errors import ContractViolation

FloatArray = NDArray[np.float64]
Vec3 = tuple[float, float, float]

# Canonical object frame: every solid is stretched to fill this cube.
CANONICAL_HALF_EXTENT = 0.95
_CONTAINMENT_TOL = 1e-9


def _vec3(value: ArrayLike, name: str) -> Vec3:
    arr = np.asarray(value, dtype=np.float64).reshape(-1)
    if arr.shape != (3,) or not np.all(np.isfinite(arr)):
        raise ContractViolation(f"{name} must be 3 finite floats, got {value!r}")
    return (float(arr[0]), float(arr[1]), float(arr[2]))


@dataclass(frozen=True)
class Box:
    """Axis-aligned box."""

    center: Vec3
    half_extents: Vec3

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", _vec3(self.center, "center"))
        object.__setattr__(self, "half_extents", _vec3(self.half_extents, "half_extents"))
        if min(self.half_extents) <= 0:
            raise ContractViolation(f"box half-extents must be positive: {self.half_extents}")

    @property
    def lower(self) -> FloatArray:
        return np.subtract(self.center, self.half_extents)

    @property
    def upper(self) -> FloatArray:
        return np.add(self.center, self.half_extents)

    def scaled(self, offset: FloatArray, factor: FloatArray) -> Self:
        """Image under p -> (p - offset) * factor (per-axis factor)."""
        c = (np.asarray(self.center) - offset) * factor
        h = np.asarray(self.half_extents) * np.abs(factor)
        return type(self)(center=_vec3(c, "center"), half_extents=_vec3(h, "half_extents"))


@dataclass(frozen=True)
class Cylinder:
    """Cylinder with a vertical (y) axis."""

    center: Vec3
    radius: float
    half_height: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", _vec3(self.center, "center"))
        if self.radius <= 0 or self.half_height <= 0:
            raise ContractViolation(
                f"cylinder radius and half-height must be positive: {self.radius}, {self.half_height}"
            )

    @property
    def lower(self) -> FloatArray:
        return np.subtract(self.center, (self.radius, self.half_height, self.radius))

    @property
    def upper(self) -> FloatArray:
        return np.add(self.center, (self.radius, self.half_height, self.radius))

    def scaled(self, offset: FloatArray, factor: FloatArray) -> Self:
        """Image under p -> (p - offset) * factor; x and z factors must agree."""
        fx, fy, fz = (float(f) for f in np.abs(factor))
        if not math.isclose(fx, fz, rel_tol=1e-12):
            raise ContractViolation("a vertical cylinder only scales uniformly in x and z")
        c = (np.asarray(self.center) - offset) * factor
        return type(self)(center=_vec3(c, "center"), radius=self.radius * fx, half_height=self.half_height * fy)


Primitive = Box | Cylinder


@dataclass(frozen=True)
class FurnitureSolid:
    """Union of primitives in the canonical object frame.

    ``natural_size`` keeps the half-extents the solid had in world units before it was
    stretched into the canonical cube.
    """

    category: str
    primitives: tuple[Primitive, ...]
    style_seed: int = 0
    natural_size: Vec3 = (CANONICAL_HALF_EXTENT, CANONICAL_HALF_EXTENT, CANONICAL_HALF_EXTENT)

    def __post_init__(self) -> None:
        if not self.primitives:
            raise ContractViolation("a solid needs at least one primitive")
        lo, hi = self.bounds()
        limit = CANONICAL_HALF_EXTENT + _CONTAINMENT_TOL
        if np.any(lo < -limit) or np.any(hi > limit):
            raise ContractViolation(f"{self.category} solid leaves the canonical cube: {lo}, {hi}")

    def bounds(self) -> tuple[FloatArray, FloatArray]:
        lo = np.min([p.lower for p in self.primitives], axis=0)
        hi = np.max([p.upper for p in self.primitives], axis=0)
        return lo, hi

    def surface_area(self) -> float:
        total = 0.0
        for prim in self.primitives:
            if isinstance(prim, Box):
                hx, hy, hz = prim.half_extents
                total += 8.0 * (hx * hy + hy * hz + hx * hz)
            else:
                total += 2.0 * math.pi * prim.radius * (2.0 * prim.half_height + prim.radius)
        return total


def validate_cloud(points: ArrayLike, name: str = "cloud") -> FloatArray:
    """Coerce to an (n, 3) finite float array with n >= 1."""
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 3 or arr.shape[0] < 1:
        raise ContractViolation(f"{name} must have shape (n>=1, 3), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ContractViolation(f"{name} contains non-finite coordinates")
    return arr


@dataclass(frozen=True, eq=False)
class PatchSet:
    """Anchors with their k nearest surface points in anchor-relative coordinates."""

    anchors: FloatArray
    patches: FloatArray
    indices: NDArray[np.int64]

    def __post_init__(self) -> None:
        m = self.anchors.shape[0]
        if self.patches.ndim != 3 or self.patches.shape[0] != m or self.patches.shape[2] != 3:
            raise ContractViolation(f"patches must be (M, k, 3) with M={m}, got {self.patches.shape}")
        if self.indices.shape != self.patches.shape[:2]:
            raise ContractViolation("patch indices do not match patch shape")

    @property
    def k(self) -> int:
        return int(self.patches.shape[1])

    def __len__(self) -> int:
        return int(self.anchors.shape[0])


@dataclass(frozen=True, eq=False)
class OccupancyGrid:
    """R^3 occupancy probabilities sampled at voxel centers spanning [-1, 1]^3.

    Axis order of ``values`` is (x, y, z).
    """

    values: FloatArray

    def __post_init__(self) -> None:
        v = self.values
        if v.ndim != 3 or len(set(v.shape)) != 1:
            raise ContractViolation(f"occupancy grid must be cubic, got {v.shape}")
        if not np.all((v >= 0.0) & (v <= 1.0)):
            raise ContractViolation("occupancy values must lie in [0, 1]")

    @property
    def resolution(self) -> int:
        return int(self.values.shape[0])

    @property
    def pitch(self) -> float:
        return 2.0 / self.resolution

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, OccupancyGrid):
            return NotImplemented
        return bool(np.array_equal(self.values, other.values))

    __hash__ = None  # type: ignore[assignment]


def voxel_centers(resolution: int) -> FloatArray:
    """Voxel-center coordinates of an R^3 grid over [-1, 1]^3, shape (R, R, R, 3)."""
    if resolution < 1:
        raise ContractViolation(f"resolution must be positive, got {resolution}")
    axis = -1.0 + (np.arange(resolution) + 0.5) * (2.0 / resolution)
    gx, gy, gz = np.meshgrid(axis, axis, axis, indexing="ij")
    return np.stack([gx, gy, gz], axis=-1)
