"""Domain layer - scene entities, shapes, events and errors."""

from anchor_scene.domain.models import (
    AnchorLatentSet,
    AttributeStats,
    Category,
    CategoryTable,
    FloorPlanMask,
    FurnitureInstance,
    RoomType,
    Scene,
    permute_objects,
)
from anchor_scene.domain.shapes import Box, Cylinder, FurnitureSolid, OccupancyGrid, PatchSet

__all__ = [
    "AnchorLatentSet",
    "AttributeStats",
    "Box",
    "Category",
    "CategoryTable",
    "Cylinder",
    "FloorPlanMask",
    "FurnitureInstance",
    "FurnitureSolid",
    "OccupancyGrid",
    "PatchSet",
    "RoomType",
    "Scene",
    "permute_objects",
]
