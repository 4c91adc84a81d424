"""Procedural room corpus.

Rooms are rectangles, optionally with one corner notched out. Furniture arrives in
template groups (a bed flanked by nightstands, a table ringed by chairs) whose members
share one style seed, and every group is placed by rejection sampling against the room
outline and the yaw-oriented boxes already in the room.

What a room holds is decided before any placement: a :class:`ScenePlan` names the room
type and its optional categories. Corpora are planned as a whole so that each optional
category turns up in its configured share of rooms.
"""

import logging
import math
from collections import Counter
from collections.abc import Callable, Sequence
from dataclasses import dataclass, replace

import numpy as np

from anchor_scene.domain.errors import ContractViolation, GenerationError
from anchor_scene.domain.models import Category, FloorPlanMask, FurnitureInstance, RoomType, Scene
from anchor_scene.geometry.floor import (
    Polygon,
    l_shaped_polygon,
    points_in_polygon,
    rasterize_floor,
    rectangle_polygon,
)
from anchor_scene.geometry.obb import OrientedBox, obb_overlap
from anchor_scene.geometry.solids import make_furniture
from anchor_scene.schemas import SceneConfig
from anchor_scene.services.ports import ShapeEncoderPort

logger = logging.getLogger(__name__)

WALL_GAP = 0.02
_MAX_ROOMS_PER_PLAN = 50

WALL_ITEMS = frozenset({Category.WARDROBE.value, Category.SHELF.value, Category.SOFA.value})

# Categories every room of a type holds, and the smallest object count its anchor group needs.
ANCHOR_CATEGORIES: dict[str, tuple[str, ...]] = {
    RoomType.BEDROOM.value: (Category.BED.value, Category.NIGHTSTAND.value),
    RoomType.DINING_ROOM.value: (Category.TABLE.value, Category.CHAIR.value),
}
_ANCHOR_MIN = {RoomType.BEDROOM.value: 2, RoomType.DINING_ROOM.value: 3}

Group = list[FurnitureInstance]


@dataclass(frozen=True)
class ScenePlan:
    """Room type and the optional categories one room will hold, in placement order."""

    room_type: str
    extras: tuple[str, ...] = ()

    def minimum_objects(self) -> int:
        desk = self.room_type == RoomType.BEDROOM.value and Category.TABLE.value in self.extras
        return _ANCHOR_MIN[self.room_type] + len(self.extras) + (1 if desk else 0)


def fit_budget(plan: ScenePlan, max_objects: int) -> ScenePlan:
    """Drop trailing extras until the plan's smallest room fits ``max_objects``."""
    trimmed = plan
    while trimmed.extras and trimmed.minimum_objects() > max_objects:
        trimmed = replace(trimmed, extras=trimmed.extras[:-1])
    if trimmed != plan:
        logger.debug(f"{plan.room_type}: dropped {plan.extras[len(trimmed.extras) :]} to fit {max_objects} objects")
    return trimmed


def _ordered_extras(config: SceneConfig, room_type: str, chosen: set[str]) -> tuple[str, ...]:
    return tuple(c for c in config.category_quotas.get(room_type, {}) if c in chosen)


def draw_plan(config: SceneConfig, rng: np.random.Generator) -> ScenePlan:
    """One plan: a uniform room type, then each optional category with its quota as probability."""
    room_type = str(rng.choice(list(config.room_types)))
    quotas = config.category_quotas.get(room_type, {})
    chosen = {category for category, share in quotas.items() if rng.random() < share}
    return fit_budget(ScenePlan(room_type, _ordered_extras(config, room_type, chosen)), config.max_objects)


def _quota_mask(n: int, share: float, rng: np.random.Generator) -> np.ndarray:
    """``n`` flags, ``floor(n * share + u)`` of them set, in random order.

    Every flag is set with probability ``share`` while the total stays within one of ``n * share``.
    """
    count = min(n, int(math.floor(n * share + rng.random())))
    mask = np.zeros(n, dtype=bool)
    mask[:count] = True
    return rng.permutation(mask)


def plan_corpus(config: SceneConfig, count: int, rng: np.random.Generator) -> list[ScenePlan]:
    """Plans for ``count`` rooms with room types and optional categories held to their quotas."""
    if count < 1:
        raise ContractViolation(f"scene count must be positive, got {count}")
    types = list(config.room_types)
    offset = int(rng.integers(len(types)))
    assigned = rng.permutation([types[(i + offset) % len(types)] for i in range(count)])
    plans: list[ScenePlan | None] = [None] * count
    for room_type in types:
        slots = np.flatnonzero(assigned == room_type)
        quotas = config.category_quotas.get(room_type, {})
        masks = {category: _quota_mask(len(slots), share, rng) for category, share in quotas.items()}
        for j, slot in enumerate(slots):
            chosen = {category for category, mask in masks.items() if mask[j]}
            plan = ScenePlan(room_type, _ordered_extras(config, room_type, chosen))
            plans[int(slot)] = fit_budget(plan, config.max_objects)
    return [plan for plan in plans if plan is not None]


def presence_targets(config: SceneConfig) -> dict[str, float]:
    """Expected share of corpus rooms holding each category."""
    share = 1.0 / len(config.room_types)
    targets: Counter[str] = Counter()
    for room_type in config.room_types:
        held = dict.fromkeys(ANCHOR_CATEGORIES[room_type], 1.0)
        for category, quota in config.category_quotas.get(room_type, {}).items():
            held[category] = max(held.get(category, 0.0), quota)
        if room_type == RoomType.BEDROOM.value and Category.TABLE.value in held:
            held[Category.CHAIR.value] = held[Category.TABLE.value]
        for category, value in held.items():
            targets[category] += share * value
    return dict(targets)


def category_presence(scenes: Sequence[Scene]) -> dict[str, float]:
    """Share of ``scenes`` holding at least one instance of each category."""
    if not scenes:
        raise ContractViolation("no scenes to count")
    counts: Counter[str] = Counter()
    for scene in scenes:
        counts.update({item.category for item in scene.furniture})
    return {category: n / len(scenes) for category, n in counts.items()}


def yaw_facing(dx: float, dz: float) -> float:
    """Yaw that turns the local +z (front) axis toward the floor direction (dx, dz)."""
    return math.atan2(dx, dz)


def _local_axes(yaw: float) -> tuple[np.ndarray, np.ndarray]:
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([c, -s]), np.array([s, c])


def _instance(category: str, style_seed: int, x: float, z: float, yaw: float) -> FurnitureInstance:
    size = make_furniture(category, style_seed).natural_size
    return FurnitureInstance(
        category=category,
        translation=(x, size[1], z),
        size=size,
        yaw=yaw,
        style_seed=style_seed,
    )


class RoomAuthor:
    """Places furniture groups into one room, rejecting overlaps and out-of-room footprints."""

    def __init__(self, config: SceneConfig, polygon: Polygon, floor: FloorPlanMask, rng: np.random.Generator) -> None:
        self._config = config
        self._polygon = polygon
        self._floor = floor
        self._rng = rng
        self.placed: list[FurnitureInstance] = []
        self._boxes: list[OrientedBox] = []

    def style(self) -> int:
        return int(self._rng.integers(self._config.style_pool))

    def fits(self, group: Sequence[FurnitureInstance]) -> bool:
        boxes = [OrientedBox.from_instance(item) for item in group]
        for item, box in zip(group, boxes, strict=True):
            corners = box.footprint()
            if not points_in_polygon(self._polygon, corners[:, 0], corners[:, 1]).all():
                return False
            if not self._floor.contains(item.translation[0], item.translation[2]):
                return False
        others = self._boxes
        for i, box in enumerate(boxes):
            if any(obb_overlap(box, other) for other in [*others, *boxes[:i]]):
                return False
        return True

    def place(self, propose: Callable[[], Group | None]) -> Group:
        """Draw candidate groups until one fits; GenerationError after the attempt budget."""
        for _ in range(self._config.placement_attempts):
            group = propose()
            if group is not None and self.fits(group):
                self.placed.extend(group)
                self._boxes.extend(OrientedBox.from_instance(item) for item in group)
                return group
        raise GenerationError(f"could not place group after {self._config.placement_attempts} attempts")

    def wall_spot(self, half_width: float, half_depth: float) -> tuple[float, float, float] | None:
        """Random spot with the object's back against a wall: (x, z, yaw)."""
        n = self._polygon.shape[0]
        i = int(self._rng.integers(n))
        a, b = self._polygon[i], self._polygon[(i + 1) % n]
        direction = b - a
        length = float(np.linalg.norm(direction))
        if length < 2 * (half_width + WALL_GAP):
            return None
        tangent = direction / length
        normal = np.array([-tangent[1], tangent[0]])
        mid = (a + b) / 2
        inward = mid + normal * 1e-3
        if not points_in_polygon(self._polygon, inward[:1], inward[1:]).item():
            normal = -normal
        along = self._rng.uniform(half_width + WALL_GAP, length - half_width - WALL_GAP)
        center = a + tangent * along + normal * (half_depth + WALL_GAP)
        return float(center[0]), float(center[1]), yaw_facing(float(normal[0]), float(normal[1]))

    def free_spot(self, margin: float) -> tuple[float, float]:
        lo = self._polygon.min(axis=0) + margin
        hi = self._polygon.max(axis=0) - margin
        x = float(self._rng.uniform(lo[0], max(lo[0], hi[0])))
        z = float(self._rng.uniform(lo[1], max(lo[1], hi[1])))
        return x, z


def _against_wall(author: RoomAuthor, category: str, seed: int) -> Callable[[], Group | None]:
    size = make_furniture(category, seed).natural_size

    def propose() -> Group | None:
        spot = author.wall_spot(size[0], size[2])
        return None if spot is None else [_instance(category, seed, *spot)]

    return propose


def _anywhere(author: RoomAuthor, category: str, seed: int, rng: np.random.Generator) -> Callable[[], Group | None]:
    size = make_furniture(category, seed).natural_size

    def propose() -> Group:
        x, z = author.free_spot(max(size[0], size[2]))
        yaw = float(rng.integers(4)) * math.pi / 2
        return [_instance(category, seed, x, z, yaw)]

    return propose


def _bed_group(author: RoomAuthor, rng: np.random.Generator, max_stands: int) -> Callable[[], Group | None]:
    bed_seed, stand_seed = author.style(), author.style()
    bed = make_furniture(Category.BED.value, bed_seed).natural_size
    stand = make_furniture(Category.NIGHTSTAND.value, stand_seed).natural_size
    stands = int(rng.integers(1, min(2, max_stands) + 1))

    def propose() -> Group | None:
        spot = author.wall_spot(bed[0] + 2 * stand[0] + 0.2, bed[2])
        if spot is None:
            return None
        x, z, yaw = spot
        group = [_instance(Category.BED.value, bed_seed, x, z, yaw)]
        ux, uz = _local_axes(yaw)
        sides = [-1.0, 1.0] if stands == 2 else [float(rng.choice([-1.0, 1.0]))]
        for side in sides:
            gap = rng.uniform(0.02, 0.1)
            offset = ux * side * (bed[0] + stand[0] + gap) + uz * (stand[2] - bed[2])
            group.append(_instance(Category.NIGHTSTAND.value, stand_seed, x + offset[0], z + offset[1], yaw))
        return group

    return propose


def _dining_group(author: RoomAuthor, rng: np.random.Generator, max_chairs: int) -> Callable[[], Group | None]:
    table_seed, chair_seed = author.style(), author.style()
    table = make_furniture(Category.TABLE.value, table_seed).natural_size
    chair = make_furniture(Category.CHAIR.value, chair_seed).natural_size
    chairs = int(rng.integers(2, min(6, max_chairs) + 1))

    def propose() -> Group | None:
        x, z = author.free_spot(max(table[0], table[2]) + 2 * chair[2])
        yaw = float(rng.integers(2)) * math.pi / 2
        ux, uz = _local_axes(yaw)
        slots: list[tuple[np.ndarray, np.ndarray, float, float]] = []
        for side in (-1.0, 1.0):
            for along in (-0.6, 0.0, 0.6):
                slots.append((uz * side, ux, table[2], along * table[0]))
            slots.append((ux * side, uz, table[0], 0.0))
        picks = rng.choice(len(slots), size=chairs, replace=False)
        group = [_instance(Category.TABLE.value, table_seed, x, z, yaw)]
        for p in sorted(int(i) for i in picks):
            direction, tangent, reach, shift = slots[p]
            gap = rng.uniform(0.02, 0.12)
            center = np.array([x, z]) + direction * (reach + chair[2] + gap) + tangent * shift
            facing = yaw_facing(float(-direction[0]), float(-direction[1]))
            group.append(_instance(Category.CHAIR.value, chair_seed, float(center[0]), float(center[1]), facing))
        return group

    return propose


def _desk_group(author: RoomAuthor, rng: np.random.Generator) -> Callable[[], Group | None]:
    table_seed, chair_seed = author.style(), author.style()
    table = make_furniture(Category.TABLE.value, table_seed).natural_size
    chair = make_furniture(Category.CHAIR.value, chair_seed).natural_size

    def propose() -> Group | None:
        spot = author.wall_spot(table[0], table[2])
        if spot is None:
            return None
        x, z, yaw = spot
        _, uz = _local_axes(yaw)
        center = np.array([x, z]) + uz * (table[2] + chair[2] + rng.uniform(0.02, 0.1))
        facing = yaw_facing(float(-uz[0]), float(-uz[1]))
        return [
            _instance(Category.TABLE.value, table_seed, x, z, yaw),
            _instance(Category.CHAIR.value, chair_seed, float(center[0]), float(center[1]), facing),
        ]

    return propose


def sample_room(config: SceneConfig, rng: np.random.Generator) -> tuple[Polygon, FloorPlanMask]:
    half_width = rng.uniform(config.room_half_min, config.room_half_max)
    half_depth = rng.uniform(config.room_half_min, config.room_half_max)
    if rng.random() < config.notch_probability:
        notch_w = rng.uniform(0.25, 0.45) * 2 * half_width
        notch_d = rng.uniform(0.25, 0.45) * 2 * half_depth
        polygon = l_shaped_polygon(half_width, half_depth, notch_w, notch_d, int(rng.integers(4)))
    else:
        polygon = rectangle_polygon(half_width, half_depth)
    return polygon, rasterize_floor(polygon, config.grid, config.grid, config.room_extent)


def generate_procedural_scene(config: SceneConfig, rng: np.random.Generator, plan: ScenePlan | None = None) -> Scene:
    """One authored room without anchor-latents; instances carry their style seeds.

    ``plan`` fixes what the room holds (drawn from the quotas when omitted). Raises
    GenerationError when a group cannot be placed or the count bounds are missed.
    """
    plan = draw_plan(config, rng) if plan is None else plan
    if plan.room_type not in ANCHOR_CATEGORIES:
        raise ContractViolation(f"unknown room type {plan.room_type!r}")
    if plan.minimum_objects() > config.max_objects:
        raise GenerationError(f"{plan.room_type} needs {plan.minimum_objects()} objects, max is {config.max_objects}")
    polygon, floor = sample_room(config, rng)
    author = RoomAuthor(config, polygon, floor, rng)
    spare = config.max_objects - plan.minimum_objects()

    if plan.room_type == RoomType.BEDROOM.value:
        author.place(_bed_group(author, rng, 1 + spare))
    else:
        author.place(_dining_group(author, rng, 2 + spare))

    for category in plan.extras:
        seed = author.style()
        if plan.room_type == RoomType.BEDROOM.value and category == Category.TABLE.value:
            author.place(_desk_group(author, rng))
        elif category in WALL_ITEMS:
            author.place(_against_wall(author, category, seed))
        else:
            author.place(_anywhere(author, category, seed, rng))

    scene = Scene(floor=floor, furniture=tuple(author.placed), room_type=plan.room_type)
    try:
        scene.validate(config.min_objects, config.max_objects)
    except ContractViolation as e:
        raise GenerationError(str(e)) from e
    return scene


def attach_shapes(scene: Scene, encoder: ShapeEncoderPort) -> Scene:
    """Fill every instance's anchor-latents from its (category, style_seed) solid."""
    furniture = []
    for item in scene.furniture:
        if item.style_seed is None:
            raise ContractViolation(f"{item.category} has no style seed to rebuild its solid")
        furniture.append(item.with_shape(encoder.encode(make_furniture(item.category, item.style_seed))))
    return scene.with_furniture(furniture)


def generate_corpus(
    config: SceneConfig,
    count: int,
    rng: np.random.Generator,
    encoder: ShapeEncoderPort | None = None,
) -> list[Scene]:
    """``count`` authored scenes following :func:`plan_corpus`.

    A room that fails placement is discarded and its plan retried in a fresh room, so
    placement never shifts the category shares.
    """
    scenes: list[Scene] = []
    discarded = 0
    for plan in plan_corpus(config, count, rng):
        for attempt in range(_MAX_ROOMS_PER_PLAN):
            try:
                scene = generate_procedural_scene(config, rng, plan)
                break
            except GenerationError as e:
                discarded += 1
                logger.debug(f"{plan.room_type} room discarded (attempt {attempt + 1}): {e}")
        else:
            raise GenerationError(f"no room fits {plan} after {_MAX_ROOMS_PER_PLAN} attempts")
        scenes.append(attach_shapes(scene, encoder) if encoder is not None else scene)
    logger.info(f"authored {count} scenes ({discarded} discarded)")
    return scenes
