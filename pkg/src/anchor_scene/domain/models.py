"""Scene domain models and value objects."""

import logging
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Self

import numpy as np
from numpy.typing import ArrayLike, NDArray

from anchor_scene.domain.errors import ContractViolation
from anchor_scene.domain.shapes import CANONICAL_HALF_EXTENT, FloatArray, Vec3

logger = logging.getLogger(__name__)

# Columns of a normalized attribute row: translation, yaw / pi, size.
T_SLICE = slice(0, 3)
R_INDEX = 3
S_SLICE = slice(4, 7)
ATTRIBUTE_WIDTH = 7


class Category(str, Enum):
    """Furniture labels of the desk corpus plus the two reserved sequence labels."""

    BED = "bed"
    NIGHTSTAND = "nightstand"
    WARDROBE = "wardrobe"
    TABLE = "table"
    CHAIR = "chair"
    SOFA = "sofa"
    LAMP = "lamp"
    SHELF = "shelf"
    START = "start"
    END = "end"

    @property
    def is_reserved(self) -> bool:
        return self in (Category.START, Category.END)


class RoomType(str, Enum):
    BEDROOM = "bedroom"
    DINING_ROOM = "dining_room"


@dataclass(frozen=True)
class CategoryTable:
    """Ordered label list; content labels first, then 'start' and 'end'."""

    labels: tuple[str, ...] = tuple(c.value for c in Category)

    def __post_init__(self) -> None:
        for reserved in (Category.START.value, Category.END.value):
            if self.labels.count(reserved) != 1:
                raise ContractViolation(f"label table must contain '{reserved}' exactly once")
        if len(set(self.labels)) != len(self.labels):
            raise ContractViolation("label table has duplicates")

    def __len__(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise ContractViolation(f"unknown category: {label!r}") from None

    def label(self, index: int) -> str:
        if not 0 <= index < len(self.labels):
            raise ContractViolation(f"category index {index} outside [0, {len(self.labels)})")
        return self.labels[index]

    @property
    def start_index(self) -> int:
        return self.labels.index(Category.START.value)

    @property
    def end_index(self) -> int:
        return self.labels.index(Category.END.value)

    @property
    def content_labels(self) -> tuple[str, ...]:
        reserved = {Category.START.value, Category.END.value}
        return tuple(label for label in self.labels if label not in reserved)

    def to_list(self) -> list[str]:
        return list(self.labels)


@dataclass(frozen=True, eq=False)
class AnchorLatentSet:
    """M anchor points in the canonical frame, each paired with a codebook index.

    Rows are kept sorted ascending by (x, y, z, code); build unsorted data through
    :meth:`sorted`.
    """

    anchors: FloatArray
    codes: NDArray[np.int64]

    def __post_init__(self) -> None:
        anchors = np.asarray(self.anchors, dtype=np.float64)
        codes = np.asarray(self.codes, dtype=np.int64)
        if anchors.ndim != 2 or anchors.shape[1] != 3 or anchors.shape[0] < 1:
            raise ContractViolation(f"anchors must be (M>=1, 3), got {anchors.shape}")
        if codes.shape != (anchors.shape[0],):
            raise ContractViolation(f"codes must be ({anchors.shape[0]},), got {codes.shape}")
        if not np.all(np.isfinite(anchors)):
            raise ContractViolation("anchor coordinates must be finite")
        if codes.min() < 0:
            raise ContractViolation("codes must be non-negative")
        order = sort_order(anchors, codes)
        if not np.array_equal(order, np.arange(len(codes))):
            raise ContractViolation("anchor-latents must be sorted ascending by (x, y, z, code)")
        anchors.setflags(write=False)
        codes.setflags(write=False)
        object.__setattr__(self, "anchors", anchors)
        object.__setattr__(self, "codes", codes)

    @classmethod
    def sorted(cls, anchors: ArrayLike, codes: ArrayLike) -> Self:
        a = np.asarray(anchors, dtype=np.float64)
        c = np.asarray(codes, dtype=np.int64)
        order = sort_order(a, c)
        return cls(anchors=a[order], codes=c[order])

    def __len__(self) -> int:
        return int(self.codes.shape[0])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AnchorLatentSet):
            return NotImplemented
        return bool(
            np.array_equal(self.anchors, other.anchors) and np.array_equal(self.codes, other.codes)
        )

    __hash__ = None  # type: ignore[assignment]

    def check_codes(self, codebook_size: int) -> None:
        if int(self.codes.max()) >= codebook_size:
            raise ContractViolation(f"code {int(self.codes.max())} outside codebook of {codebook_size}")

    def to_dict(self) -> dict[str, Any]:
        return {"anchors": self.anchors.tolist(), "codes": [int(c) for c in self.codes]}


def sort_order(anchors: FloatArray, codes: NDArray[np.int64]) -> NDArray[np.int64]:
    """Stable lexicographic order by x, then y, then z, then code."""
    return np.lexsort((codes, anchors[:, 2], anchors[:, 1], anchors[:, 0])).astype(np.int64)


def wrap_angle(angle: float) -> float:
    """Map an angle to [-pi, pi); in-range values are returned unchanged."""
    if -math.pi <= angle < math.pi:
        return angle
    wrapped = (angle + math.pi) % (2.0 * math.pi) - math.pi
    return -math.pi if wrapped >= math.pi else wrapped


@dataclass(frozen=True)
class FurnitureInstance:
    """One furniture object: category, box attributes in world units, and its shape.

    ``size`` holds half-extents. ``style_seed`` identifies the procedural solid the
    instance was authored from; ``shape`` is absent until a codec has encoded it.
    """

    category: str
    translation: Vec3
    size: Vec3
    yaw: float = 0.0
    shape: AnchorLatentSet | None = None
    style_seed: int | None = None

    def __post_init__(self) -> None:
        t = np.asarray(self.translation, dtype=np.float64).reshape(-1)
        s = np.asarray(self.size, dtype=np.float64).reshape(-1)
        if t.shape != (3,) or s.shape != (3,):
            raise ContractViolation("translation and size must have 3 components")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(s)) and math.isfinite(self.yaw)):
            raise ContractViolation("furniture attributes must be finite")
        if np.any(s <= 0):
            raise ContractViolation(f"size must be positive, got {tuple(s)}")
        if self.category in (Category.START.value, Category.END.value):
            raise ContractViolation(f"'{self.category}' is not a furniture category")
        object.__setattr__(self, "translation", (float(t[0]), float(t[1]), float(t[2])))
        object.__setattr__(self, "size", (float(s[0]), float(s[1]), float(s[2])))
        object.__setattr__(self, "yaw", wrap_angle(float(self.yaw)))

    def with_shape(self, shape: AnchorLatentSet | None) -> Self:
        return replace(self, shape=shape)

    def canonical_to_world(self, points: FloatArray) -> FloatArray:
        """Map canonical-frame points into the room: scale to size, rotate by yaw, translate."""
        scale = np.asarray(self.size) / CANONICAL_HALF_EXTENT
        local = np.asarray(points, dtype=np.float64) * scale
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        # Rotation about +y.
        x = c * local[..., 0] + s * local[..., 2]
        z = -s * local[..., 0] + c * local[..., 2]
        world = np.stack([x, local[..., 1], z], axis=-1)
        return world + np.asarray(self.translation)


@dataclass(frozen=True, eq=False)
class FloorPlanMask:
    """Top-down binary room mask with its world-to-grid affine transform.

    ``transform`` = (a, b, c, d, e, f) maps a floor point (x, z) to continuous grid
    coordinates ``col = a*x + b*z + c`` and ``row = d*x + e*z + f``.
    """

    cells: NDArray[np.bool_]
    transform: tuple[float, float, float, float, float, float]

    def __post_init__(self) -> None:
        cells = np.asarray(self.cells).astype(bool)
        if cells.ndim != 2 or min(cells.shape) < 1:
            raise ContractViolation(f"floor mask must be a 2-D grid, got {cells.shape}")
        if not cells.any():
            raise ContractViolation("floor mask has no interior cell")
        if len(self.transform) != 6:
            raise ContractViolation("floor transform needs 6 floats")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "transform", tuple(float(v) for v in self.transform))

    @property
    def height(self) -> int:
        return int(self.cells.shape[0])

    @property
    def width(self) -> int:
        return int(self.cells.shape[1])

    def world_to_grid(self, x: ArrayLike, z: ArrayLike) -> tuple[FloatArray, FloatArray]:
        a, b, c, d, e, f = self.transform
        xa, za = np.asarray(x, dtype=np.float64), np.asarray(z, dtype=np.float64)
        return a * xa + b * za + c, d * xa + e * za + f

    def contains(self, x: ArrayLike, z: ArrayLike) -> NDArray[np.bool_]:
        """True where (x, z) falls in an interior cell."""
        col, row = self.world_to_grid(x, z)
        ci, ri = np.floor(col).astype(np.int64), np.floor(row).astype(np.int64)
        valid = (ci >= 0) & (ci < self.width) & (ri >= 0) & (ri < self.height)
        out = np.zeros(np.shape(ci), dtype=bool)
        out[valid] = self.cells[ri[valid], ci[valid]]
        return out

    def interior_centers(self) -> FloatArray:
        """World (x, z) of every interior cell center."""
        rows, cols = np.nonzero(self.cells)
        a, b, c, d, e, f = self.transform
        u, v = cols + 0.5 - c, rows + 0.5 - f
        det = a * e - b * d
        x = (e * u - b * v) / det
        z = (-d * u + a * v) / det
        return np.stack([x, z], axis=-1)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FloorPlanMask):
            return NotImplemented
        return self.transform == other.transform and bool(np.array_equal(self.cells, other.cells))

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class Scene:
    """A floor plan plus an unordered collection of furniture."""

    floor: FloorPlanMask
    furniture: tuple[FurnitureInstance, ...] = ()
    room_type: str = RoomType.BEDROOM.value

    def __post_init__(self) -> None:
        object.__setattr__(self, "furniture", tuple(self.furniture))

    def __len__(self) -> int:
        return len(self.furniture)

    def with_furniture(self, furniture: Iterable[FurnitureInstance]) -> Self:
        return replace(self, furniture=tuple(furniture))

    def translations(self) -> FloatArray:
        if not self.furniture:
            return np.zeros((0, 3))
        return np.array([f.translation for f in self.furniture], dtype=np.float64)

    def inside_fraction(self) -> float:
        """Share of objects whose translation lies on an interior floor cell."""
        if not self.furniture:
            return 1.0
        t = self.translations()
        return float(self.floor.contains(t[:, 0], t[:, 2]).mean())

    def validate(self, min_objects: int, max_objects: int) -> None:
        if not min_objects <= len(self) <= max_objects:
            raise ContractViolation(f"scene has {len(self)} objects, expected [{min_objects}, {max_objects}]")
        if self.inside_fraction() < 1.0:
            raise ContractViolation("a furniture translation lies outside the floor plan")


def permute_objects(scene: Scene, rng: np.random.Generator) -> Scene:
    """Uniformly random reordering of the furniture list."""
    order = rng.permutation(len(scene.furniture))
    return scene.with_furniture(scene.furniture[i] for i in order)


@dataclass(frozen=True)
class AttributeStats:
    """Per-dimension corpus ranges of translation and size."""

    t_min: Vec3
    t_max: Vec3
    s_min: Vec3
    s_max: Vec3

    def __post_init__(self) -> None:
        for lo, hi, name in ((self.t_min, self.t_max, "t"), (self.s_min, self.s_max, "s")):
            if any(a > b for a, b in zip(lo, hi, strict=True)):
                raise ContractViolation(f"{name} range is inverted: {lo} > {hi}")

    @classmethod
    def from_scenes(cls, scenes: Iterable[Scene]) -> Self:
        t_rows: list[Vec3] = []
        s_rows: list[Vec3] = []
        for scene in scenes:
            for f in scene.furniture:
                t_rows.append(f.translation)
                s_rows.append(f.size)
        if not t_rows:
            raise ContractViolation("cannot compute attribute ranges from an empty corpus")
        t, s = np.array(t_rows), np.array(s_rows)

        def vec(a: FloatArray) -> Vec3:
            return (float(a[0]), float(a[1]), float(a[2]))

        return cls(vec(t.min(axis=0)), vec(t.max(axis=0)), vec(s.min(axis=0)), vec(s.max(axis=0)))

    def to_dict(self) -> dict[str, list[float]]:
        return {
            "t_min": list(self.t_min),
            "t_max": list(self.t_max),
            "s_min": list(self.s_min),
            "s_max": list(self.s_max),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Sequence[float]]) -> Self:
        def vec(key: str) -> Vec3:
            v = [float(x) for x in data[key]]
            if len(v) != 3:
                raise ContractViolation(f"{key} needs 3 values")
            return (v[0], v[1], v[2])

        return cls(vec("t_min"), vec("t_max"), vec("s_min"), vec("s_max"))


def _to_unit(value: FloatArray, lo: FloatArray, hi: FloatArray, label: str) -> FloatArray:
    clamped = np.clip(value, lo, hi)
    if not np.array_equal(clamped, value):
        logger.warning(f"{label} {value.tolist()} outside corpus range, clamped")
    span = hi - lo
    safe = np.where(span > 0, span, 1.0)
    return np.where(span > 0, 2.0 * (clamped - lo) / safe - 1.0, 0.0)


def _from_unit(value: FloatArray, lo: FloatArray, hi: FloatArray, label: str) -> FloatArray:
    unit = np.asarray(value, dtype=np.float64)
    clamped = np.clip(unit, -1.0, 1.0)
    if not np.array_equal(clamped, unit):
        logger.warning(f"{label} {unit.tolist()} outside corpus range, clamped")
    return lo + (clamped + 1.0) * 0.5 * (hi - lo)


def normalize_instance(instance: FurnitureInstance, stats: AttributeStats) -> FloatArray:
    """Row [t(3), yaw/pi, s(3)] with every entry in [-1, 1]."""
    row = np.empty(ATTRIBUTE_WIDTH)
    row[T_SLICE] = _to_unit(np.array(instance.translation), np.array(stats.t_min), np.array(stats.t_max), "translation")
    row[R_INDEX] = instance.yaw / math.pi
    row[S_SLICE] = _to_unit(np.array(instance.size), np.array(stats.s_min), np.array(stats.s_max), "size")
    return row


def denormalize_row(row: ArrayLike, stats: AttributeStats) -> tuple[Vec3, float, Vec3]:
    """Inverse of :func:`normalize_instance`: (translation, yaw, size).

    Translation and size entries beyond [-1, 1] are clamped to the corpus range with a
    warning; yaw wraps.
    """
    r = np.asarray(row, dtype=np.float64)
    t = _from_unit(r[T_SLICE], np.array(stats.t_min), np.array(stats.t_max), "normalized translation")
    s = _from_unit(r[S_SLICE], np.array(stats.s_min), np.array(stats.s_max), "normalized size")
    return (
        (float(t[0]), float(t[1]), float(t[2])),
        float(r[R_INDEX]) * math.pi,
        (float(s[0]), float(s[1]), float(s[2])),
    )


def normalize_attributes(scene: Scene, stats: AttributeStats) -> FloatArray:
    """(n, 7) matrix of normalized attribute rows in furniture order."""
    if not scene.furniture:
        return np.zeros((0, ATTRIBUTE_WIDTH))
    return np.stack([normalize_instance(f, stats) for f in scene.furniture])


def denormalize_attributes(rows: ArrayLike, stats: AttributeStats) -> list[tuple[Vec3, float, Vec3]]:
    return [denormalize_row(row, stats) for row in np.asarray(rows, dtype=np.float64)]
