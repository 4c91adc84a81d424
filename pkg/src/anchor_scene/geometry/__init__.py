"""Procedural solids, point-cloud sampling and distances, floor plans, collision tests."""

from anchor_scene.geometry.grids import export_obj, extract_boundary_points
from anchor_scene.geometry.metrics import chamfer
from anchor_scene.geometry.obb import OrientedBox, obb_overlap
from anchor_scene.geometry.sampling import fps, knn_patches
from anchor_scene.geometry.solids import make_furniture, occupancy, sample_surface

__all__ = [
    "OrientedBox",
    "chamfer",
    "export_obj",
    "extract_boundary_points",
    "fps",
    "knn_patches",
    "make_furniture",
    "obb_overlap",
    "occupancy",
    "sample_surface",
]
