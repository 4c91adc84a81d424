"""Procedural furniture solids with analytic occupancy and surface sampling.

Each category is a small parametric template of boxes and vertical cylinders. The
template parameters are drawn from a generator seeded by (category, style_seed), so one
style seed always yields the same solid. Solids are stretched per axis into the
canonical cube [-0.95, 0.95]^3.
"""

import math
from collections.abc import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray

from anchor_scene.domain.errors import ContractViolation
from anchor_scene.domain.models import Category
from anchor_scene.domain.shapes import (
    CANONICAL_HALF_EXTENT,
    Box,
    Cylinder,
    FloatArray,
    FurnitureSolid,
    Primitive,
    validate_cloud,
)

_BOUNDARY_TOL = 1e-9
_MAX_SAMPLING_ROUNDS = 1000

Template = Callable[[np.random.Generator], list[Primitive]]


def _box(cx: float, cy: float, cz: float, hx: float, hy: float, hz: float) -> Box:
    return Box(center=(cx, cy, cz), half_extents=(hx, hy, hz))


def _chair(rng: np.random.Generator) -> list[Primitive]:
    w, d = rng.uniform(0.20, 0.28), rng.uniform(0.20, 0.28)
    seat_h, seat_t = rng.uniform(0.40, 0.50), rng.uniform(0.03, 0.08)
    leg = rng.uniform(0.015, 0.035)
    back_h, back_t = rng.uniform(0.30, 0.55), rng.uniform(0.02, 0.05)
    leg_h = (seat_h - seat_t) / 2
    parts: list[Primitive] = [_box(0, seat_h - seat_t / 2, 0, w, seat_t / 2, d)]
    for sx in (-1.0, 1.0):
        for sz in (-1.0, 1.0):
            parts.append(_box(sx * (w - leg), leg_h, sz * (d - leg), leg, leg_h, leg))
    parts.append(_box(0, seat_h + back_h / 2, -d + back_t / 2, w, back_h / 2, back_t / 2))
    if rng.random() < 0.3:
        arm_h = rng.uniform(0.15, 0.25)
        for sx in (-1.0, 1.0):
            parts.append(_box(sx * (w - leg), seat_h + arm_h / 2, 0, leg, arm_h / 2, d))
    return parts


def _table(rng: np.random.Generator) -> list[Primitive]:
    w, d = rng.uniform(0.35, 0.90), rng.uniform(0.35, 0.80)
    h, top_t = rng.uniform(0.70, 0.78), rng.uniform(0.03, 0.06)
    leg = rng.uniform(0.025, 0.05)
    leg_h = (h - top_t) / 2
    parts: list[Primitive] = [_box(0, h - top_t / 2, 0, w, top_t / 2, d)]
    if rng.random() < 0.3:
        # Panel sides instead of legs.
        for sx in (-1.0, 1.0):
            parts.append(_box(sx * (w - leg), leg_h, 0, leg, leg_h, d * 0.9))
    else:
        inset = rng.uniform(0.0, 0.08)
        for sx in (-1.0, 1.0):
            for sz in (-1.0, 1.0):
                parts.append(_box(sx * (w - leg - inset), leg_h, sz * (d - leg - inset), leg, leg_h, leg))
    return parts


def _bed(rng: np.random.Generator) -> list[Primitive]:
    w, d = rng.uniform(0.45, 1.0), rng.uniform(1.0, 1.15)
    base_h, mattress = rng.uniform(0.20, 0.35), rng.uniform(0.15, 0.25)
    head_h, head_t = rng.uniform(0.35, 0.80), rng.uniform(0.04, 0.08)
    top = base_h + mattress + head_h
    return [
        _box(0, base_h / 2, 0, w, base_h / 2, d),
        _box(0, base_h + mattress / 2, head_t / 2, w * 0.97, mattress / 2, d - head_t / 2),
        _box(0, top / 2, -d + head_t / 2, w, top / 2, head_t / 2),
    ]


def _nightstand(rng: np.random.Generator) -> list[Primitive]:
    w, d, h = rng.uniform(0.20, 0.30), rng.uniform(0.18, 0.25), rng.uniform(0.45, 0.60)
    leg_h = rng.uniform(0.0, 0.12)
    top_t = rng.uniform(0.02, 0.04)
    parts: list[Primitive] = [
        _box(0, leg_h + (h - leg_h - top_t) / 2, 0, w, (h - leg_h - top_t) / 2, d),
        _box(0, h - top_t / 2, 0, w + 0.01, top_t / 2, d + 0.01),
    ]
    if leg_h > 0.02:
        leg = rng.uniform(0.015, 0.03)
        for sx in (-1.0, 1.0):
            for sz in (-1.0, 1.0):
                parts.append(_box(sx * (w - leg), leg_h / 2, sz * (d - leg), leg, leg_h / 2, leg))
    return parts


def _wardrobe(rng: np.random.Generator) -> list[Primitive]:
    w, d, h = rng.uniform(0.45, 1.0), rng.uniform(0.28, 0.32), rng.uniform(1.8, 2.2)
    plinth, crown = rng.uniform(0.05, 0.1), rng.uniform(0.02, 0.06)
    parts: list[Primitive] = [
        _box(0, plinth / 2, 0, w * 0.97, plinth / 2, d * 0.95),
        _box(0, plinth + (h - plinth - crown) / 2, 0, w, (h - plinth - crown) / 2, d),
        _box(0, h - crown / 2, 0.01, w + 0.02, crown / 2, d + 0.01),
    ]
    doors = int(rng.integers(1, 4))
    for i in range(doors):
        x = -w + (2 * i + 1) * w / doors
        parts.append(_box(x, h * 0.5, d + 0.015, 0.01, rng.uniform(0.05, 0.2), 0.015))
    return parts


def _sofa(rng: np.random.Generator) -> list[Primitive]:
    w, d = rng.uniform(0.8, 1.2), rng.uniform(0.40, 0.50)
    seat_h, back_h = rng.uniform(0.38, 0.45), rng.uniform(0.35, 0.50)
    arm_w, arm_h = rng.uniform(0.08, 0.15), rng.uniform(0.15, 0.25)
    back_t = rng.uniform(0.10, 0.18)
    return [
        _box(0, seat_h / 2, 0, w, seat_h / 2, d),
        _box(0, (seat_h + back_h) / 2, -d + back_t / 2, w, (seat_h + back_h) / 2, back_t / 2),
        _box(-w + arm_w, (seat_h + arm_h) / 2, 0, arm_w, (seat_h + arm_h) / 2, d),
        _box(w - arm_w, (seat_h + arm_h) / 2, 0, arm_w, (seat_h + arm_h) / 2, d),
    ]


def _lamp(rng: np.random.Generator) -> list[Primitive]:
    base_r, base_hh = rng.uniform(0.08, 0.15), rng.uniform(0.01, 0.03)
    pole_r, pole_h = rng.uniform(0.01, 0.02), rng.uniform(0.8, 1.5)
    shade_r, shade_hh = rng.uniform(0.15, 0.25), rng.uniform(0.10, 0.18)
    return [
        Cylinder(center=(0, base_hh, 0), radius=base_r, half_height=base_hh),
        Cylinder(center=(0, 2 * base_hh + pole_h / 2, 0), radius=pole_r, half_height=pole_h / 2),
        Cylinder(center=(0, 2 * base_hh + pole_h, 0), radius=shade_r, half_height=shade_hh),
    ]


def _shelf(rng: np.random.Generator) -> list[Primitive]:
    w, d, h = rng.uniform(0.3, 0.6), rng.uniform(0.14, 0.20), rng.uniform(0.8, 2.0)
    t = rng.uniform(0.01, 0.025)
    boards = int(rng.integers(3, 6))
    parts: list[Primitive] = [
        _box(-w + t, h / 2, 0, t, h / 2, d),
        _box(w - t, h / 2, 0, t, h / 2, d),
    ]
    for i in range(boards):
        y = t + i * (h - 2 * t) / (boards - 1)
        parts.append(_box(0, y, 0, w - 2 * t, t, d))
    if rng.random() < 0.5:
        parts.append(_box(0, h / 2, -d + t / 2, w, h / 2, t / 2))
    return parts


TEMPLATES: dict[str, Template] = {
    Category.BED.value: _bed,
    Category.NIGHTSTAND.value: _nightstand,
    Category.WARDROBE.value: _wardrobe,
    Category.TABLE.value: _table,
    Category.CHAIR.value: _chair,
    Category.SOFA.value: _sofa,
    Category.LAMP.value: _lamp,
    Category.SHELF.value: _shelf,
}


def _normalize(primitives: list[Primitive]) -> tuple[list[Primitive], FloatArray]:
    lo = np.min([p.lower for p in primitives], axis=0)
    hi = np.max([p.upper for p in primitives], axis=0)
    center = (lo + hi) / 2
    half = (hi - lo) / 2
    factor = CANONICAL_HALF_EXTENT / half
    return [p.scaled(center, factor) for p in primitives], half


def make_furniture(category: str, style_seed: int) -> FurnitureSolid:
    """Deterministic procedural solid for ``(category, style_seed)``."""
    template = TEMPLATES.get(category)
    if template is None:
        raise ContractViolation(f"no furniture template for category {category!r}")
    if style_seed < 0:
        raise ContractViolation(f"style_seed must be non-negative, got {style_seed}")
    code = list(TEMPLATES).index(category)
    rng = np.random.default_rng([code, style_seed])
    primitives, half = _normalize(template(rng))
    return FurnitureSolid(
        category=category,
        primitives=tuple(primitives),
        style_seed=style_seed,
        natural_size=(float(half[0]), float(half[1]), float(half[2])),
    )


def _inside(prim: Primitive, points: FloatArray, margin: float) -> NDArray[np.bool_]:
    """Membership with the boundary shifted outward by ``margin`` (negative = strict)."""
    rel = points - np.asarray(prim.center)
    if isinstance(prim, Box):
        return np.all(np.abs(rel) <= np.asarray(prim.half_extents) + margin, axis=-1)
    radial = rel[..., 0] ** 2 + rel[..., 2] ** 2
    return (radial <= (prim.radius + margin) ** 2) & (np.abs(rel[..., 1]) <= prim.half_height + margin)


def occupancy(solid: FurnitureSolid, points: ArrayLike) -> NDArray[np.bool_]:
    """True where a point lies inside any primitive; the boundary counts as inside.

    Accepts a single point (3,) or an array (..., 3).
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.shape[-1] != 3:
        raise ContractViolation(f"points must end in a 3-axis, got {pts.shape}")
    inside = np.zeros(pts.shape[:-1], dtype=bool)
    for prim in solid.primitives:
        inside |= _inside(prim, pts, _BOUNDARY_TOL)
    return inside


def _faces(solid: FurnitureSolid) -> list[tuple[int, str, int, float]]:
    """(primitive index, kind, axis/sign code, area) for every face."""
    faces: list[tuple[int, str, int, float]] = []
    for i, prim in enumerate(solid.primitives):
        if isinstance(prim, Box):
            h = prim.half_extents
            for axis in range(3):
                a, b = (h[j] for j in range(3) if j != axis)
                for sign in (0, 1):
                    faces.append((i, "box", axis * 2 + sign, 4.0 * a * b))
        else:
            faces.append((i, "side", 0, 4.0 * math.pi * prim.radius * prim.half_height))
            faces.append((i, "cap", 0, math.pi * prim.radius**2))
            faces.append((i, "cap", 1, math.pi * prim.radius**2))
    return faces


def _points_on_face(
    prim: Primitive, kind: str, code: int, count: int, rng: np.random.Generator
) -> FloatArray:
    center = np.asarray(prim.center)
    if isinstance(prim, Box):
        axis, sign = divmod(code, 2)
        u = rng.uniform(-1.0, 1.0, size=(count, 3))
        u[:, axis] = 1.0 if sign else -1.0
        return center + u * np.asarray(prim.half_extents)
    theta = rng.uniform(0.0, 2.0 * math.pi, size=count)
    if kind == "side":
        y = rng.uniform(-prim.half_height, prim.half_height, size=count)
        r = np.full(count, prim.radius)
    else:
        y = np.full(count, prim.half_height if code else -prim.half_height)
        r = prim.radius * np.sqrt(rng.uniform(0.0, 1.0, size=count))
    return center + np.stack([r * np.cos(theta), y, r * np.sin(theta)], axis=-1)


def sample_surface(solid: FurnitureSolid, n: int, rng: np.random.Generator) -> FloatArray:
    """``n`` points on the union's surface, area-weighted over primitive faces.

    Samples falling strictly inside another primitive are rejected and redrawn.
    """
    if n < 1:
        raise ContractViolation(f"need at least one sample, got {n}")
    faces = _faces(solid)
    areas = np.array([f[3] for f in faces])
    if areas.sum() <= 0:
        raise ContractViolation("solid has zero surface area")
    probs = areas / areas.sum()

    kept: list[FloatArray] = []
    total = 0
    for _ in range(_MAX_SAMPLING_ROUNDS):
        batch = max(2 * (n - total), 64)
        choice = rng.choice(len(faces), size=batch, p=probs)
        pts = np.empty((batch, 3))
        owner = np.empty(batch, dtype=np.int64)
        for f, (prim_index, kind, code, _) in enumerate(faces):
            sel = np.nonzero(choice == f)[0]
            if sel.size:
                pts[sel] = _points_on_face(solid.primitives[prim_index], kind, code, sel.size, rng)
                owner[sel] = prim_index
        buried = np.zeros(batch, dtype=bool)
        for j, prim in enumerate(solid.primitives):
            buried |= (owner != j) & _inside(prim, pts, -_BOUNDARY_TOL)
        accepted = pts[~buried]
        kept.append(accepted)
        total += accepted.shape[0]
        if total >= n:
            return np.concatenate(kept)[:n]
    raise ContractViolation("surface sampling stalled; the union has almost no exposed area")


def sample_queries(
    solid: FurnitureSolid,
    count: int,
    rng: np.random.Generator,
    surface_fraction: float = 0.5,
    noise: float = 0.05,
) -> tuple[FloatArray, FloatArray]:
    """Training queries and their analytic occupancy labels.

    A ``surface_fraction`` share are surface samples jittered by Gaussian noise, the rest
    are uniform in [-1, 1]^3.
    """
    if count < 1:
        raise ContractViolation("query count must be positive")
    near = int(round(count * surface_fraction))
    parts: list[FloatArray] = []
    if near:
        parts.append(sample_surface(solid, near, rng) + rng.normal(0.0, noise, size=(near, 3)))
    if count - near:
        parts.append(rng.uniform(-1.0, 1.0, size=(count - near, 3)))
    queries = np.concatenate(parts)
    return queries, occupancy(solid, queries).astype(np.float64)


def mask_iou(predicted: NDArray[np.bool_], target: NDArray[np.bool_]) -> float:
    """Intersection over union of two boolean occupancy vectors (1.0 when both are empty)."""
    p, t = np.asarray(predicted, dtype=bool), np.asarray(target, dtype=bool)
    union = np.logical_or(p, t).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(p, t).sum() / union)


def surface_cloud(solid: FurnitureSolid, n: int, seed: int) -> FloatArray:
    """Surface samples from a dedicated seed, validated as a point cloud."""
    return validate_cloud(sample_surface(solid, n, np.random.default_rng(seed)))
