"""Yaw-oriented bounding boxes and their separating-axis overlap test."""

import math
from dataclasses import dataclass
from typing import Self

import numpy as np
from numpy.typing import NDArray

from anchor_scene.domain.models import FurnitureInstance
from anchor_scene.domain.shapes import FloatArray, Vec3

PENETRATION_EPS = 1e-6


@dataclass(frozen=True)
class OrientedBox:
    """Box rotated about the vertical axis: footprint in (x, z), extent along y."""

    center: Vec3
    half_extents: Vec3
    yaw: float

    @classmethod
    def from_instance(cls, instance: FurnitureInstance) -> Self:
        return cls(center=instance.translation, half_extents=instance.size, yaw=instance.yaw)

    def axes(self) -> FloatArray:
        """Footprint directions of the local x and z axes, shape (2, 2)."""
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return np.array([[c, -s], [s, c]])

    def footprint(self) -> FloatArray:
        """Four footprint corners (x, z) in counter-clockwise local order."""
        hx, _, hz = self.half_extents
        local = np.array([[-hx, -hz], [hx, -hz], [hx, hz], [-hx, hz]])
        return np.array([self.center[0], self.center[2]]) + local @ self.axes()

    def project(self, axis: FloatArray) -> tuple[float, float]:
        hx, _, hz = self.half_extents
        ux, uz = self.axes()
        mid = float(np.dot([self.center[0], self.center[2]], axis))
        reach = hx * abs(float(np.dot(ux, axis))) + hz * abs(float(np.dot(uz, axis)))
        return mid - reach, mid + reach

    def contains(self, points: FloatArray) -> NDArray[np.bool_]:
        """Membership test for (n, 3) world points (boundary inclusive)."""
        rel = np.asarray(points, dtype=np.float64) - np.asarray(self.center)
        ux, uz = self.axes()
        lx = rel[:, 0] * ux[0] + rel[:, 2] * ux[1]
        lz = rel[:, 0] * uz[0] + rel[:, 2] * uz[1]
        hx, hy, hz = self.half_extents
        return (np.abs(lx) <= hx) & (np.abs(rel[:, 1]) <= hy) & (np.abs(lz) <= hz)


def vertical_overlap(a: OrientedBox, b: OrientedBox) -> float:
    top = min(a.center[1] + a.half_extents[1], b.center[1] + b.half_extents[1])
    bottom = max(a.center[1] - a.half_extents[1], b.center[1] - b.half_extents[1])
    return top - bottom


def footprint_penetration(a: OrientedBox, b: OrientedBox) -> float:
    """Smallest interval overlap over the four candidate separating axes."""
    depth = math.inf
    for axis in np.vstack([a.axes(), b.axes()]):
        lo_a, hi_a = a.project(axis)
        lo_b, hi_b = b.project(axis)
        depth = min(depth, min(hi_a, hi_b) - max(lo_a, lo_b))
    return depth


def obb_overlap(a: OrientedBox, b: OrientedBox, eps: float = PENETRATION_EPS) -> bool:
    """True when the boxes penetrate by more than ``eps`` in footprint and in height.

    Touching boxes do not collide.
    """
    if vertical_overlap(a, b) <= eps:
        return False
    return footprint_penetration(a, b) > eps


def colliding_mask(boxes: list[OrientedBox], eps: float = PENETRATION_EPS) -> NDArray[np.bool_]:
    """Per box: does it collide with any other box."""
    hit = np.zeros(len(boxes), dtype=bool)
    for i in range(len(boxes)):
        for j in range(i + 1, len(boxes)):
            if obb_overlap(boxes[i], boxes[j], eps):
                hit[i] = hit[j] = True
    return hit
