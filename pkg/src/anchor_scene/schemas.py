"""Pydantic schemas: run configuration with presets, and scene JSON documents."""

import hashlib
import json
from pathlib import Path
from typing import Annotated, Any, Literal, Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from anchor_scene.domain.errors import ConfigError, SceneParseError
from anchor_scene.domain.models import AnchorLatentSet, FloorPlanMask, FurnitureInstance, RoomType, Scene
from anchor_scene.geometry.floor import decode_rle, encode_rle

Preset = Literal["desk", "paper"]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class CodecConfig(_Section):
    """Shape codec hyperparameters."""

    n_points: Annotated[int, Field(ge=1, description="Surface samples per shape (N)")] = 1024
    n_anchors: Annotated[int, Field(ge=1, description="Anchor count (M)")] = 64
    k: Annotated[int, Field(ge=1, description="Patch size of the kNN grouping")] = 16
    codebook_size: Annotated[int, Field(ge=2)] = 128
    code_dim: Annotated[int, Field(ge=1, description="Latent width (C)")] = 32
    patch_hidden: Annotated[int, Field(ge=1)] = 64
    heads: Annotated[int, Field(ge=1)] = 4
    encoder_layers: Annotated[int, Field(ge=0)] = 2
    decoder_layers: Annotated[int, Field(ge=0)] = 4
    pos_dims: Annotated[int, Field(ge=2, multiple_of=2)] = 8
    anchor_pos_enc: bool = True
    interp_neighbors: Annotated[int, Field(ge=1)] = 8
    head_hidden: Annotated[int, Field(ge=1)] = 64
    queries: Annotated[int, Field(ge=1, description="Occupancy queries per shape and step (Q)")] = 512
    surface_fraction: Annotated[float, Field(ge=0.0, le=1.0)] = 0.5
    query_noise: Annotated[float, Field(gt=0.0)] = 0.05
    commitment: Annotated[float, Field(ge=0.0, description="Commitment weight (lambda)")] = 0.25
    ema_decay: Annotated[float, Field(gt=0.0, lt=1.0)] = 0.99
    ema_eps: Annotated[float, Field(gt=0.0)] = 1e-5
    dead_code_steps: Annotated[int, Field(ge=1)] = 50
    shapes: Annotated[int, Field(ge=1, description="Procedural training shapes")] = 50
    epochs: Annotated[int, Field(ge=1)] = 200
    lr: Annotated[float, Field(gt=0.0)] = 1e-3
    grid_resolution: Annotated[int, Field(ge=8)] = 32

    @model_validator(mode="after")
    def _check_sizes(self) -> Self:
        if self.k > self.n_points or self.n_anchors > self.n_points:
            raise ValueError("k and n_anchors must not exceed n_points")
        if self.code_dim % self.heads:
            raise ValueError("code_dim must be divisible by heads")
        return self


# Categories a room type may hold beyond its anchor group. A bedroom "table" is a desk
# and always comes with its chair.
OPTIONAL_CATEGORIES: dict[str, frozenset[str]] = {
    RoomType.BEDROOM.value: frozenset({"table", "wardrobe", "shelf", "lamp", "sofa"}),
    RoomType.DINING_ROOM.value: frozenset({"wardrobe", "shelf", "lamp", "sofa"}),
}

Share = Annotated[float, Field(ge=0.0, le=1.0)]


def _default_quotas() -> dict[str, dict[str, float]]:
    return {
        RoomType.BEDROOM.value: {"table": 0.3, "wardrobe": 0.6, "shelf": 0.4, "lamp": 0.5},
        RoomType.DINING_ROOM.value: {"sofa": 0.5, "shelf": 0.5, "lamp": 0.5, "wardrobe": 0.2},
    }


class SceneConfig(_Section):
    """Procedural corpus and floor-plan settings."""

    room_types: tuple[str, ...] = ("bedroom", "dining_room")
    category_quotas: dict[str, dict[str, Share]] = Field(
        default_factory=_default_quotas,
        description="Share of rooms of each type that hold each optional category",
    )
    grid: Annotated[int, Field(ge=8, description="Floor mask height and width")] = 64
    room_extent: Annotated[float, Field(gt=0.0)] = 4.0
    room_half_min: Annotated[float, Field(gt=0.0)] = 1.6
    room_half_max: Annotated[float, Field(gt=0.0)] = 3.4
    notch_probability: Annotated[float, Field(ge=0.0, le=1.0)] = 0.5
    min_objects: Annotated[int, Field(ge=1)] = 2
    max_objects: Annotated[int, Field(ge=1)] = 10
    placement_attempts: Annotated[int, Field(ge=1)] = 500
    style_pool: Annotated[int, Field(ge=1, description="Distinct style seeds per category")] = 64

    @model_validator(mode="after")
    def _check_ranges(self) -> Self:
        if self.min_objects > self.max_objects:
            raise ValueError("min_objects exceeds max_objects")
        if not self.room_half_min <= self.room_half_max <= self.room_extent:
            raise ValueError("room half-sizes must satisfy min <= max <= room_extent")
        for room_type in self.room_types:
            if room_type not in OPTIONAL_CATEGORIES:
                raise ValueError(f"unknown room type {room_type!r}")
        for room_type, quotas in self.category_quotas.items():
            allowed = OPTIONAL_CATEGORIES.get(room_type)
            if allowed is None:
                raise ValueError(f"quotas for unknown room type {room_type!r}")
            if extra := sorted(set(quotas) - allowed):
                raise ValueError(f"{room_type} cannot hold optional {extra}; allowed {sorted(allowed)}")
        return self


class GeneratorConfig(_Section):
    """Scene and shape transformer hyperparameters."""

    token_dim: Annotated[int, Field(ge=2, multiple_of=2)] = 128
    query_dim: Annotated[int, Field(ge=1)] = 32
    layers: Annotated[int, Field(ge=1)] = 2
    heads: Annotated[int, Field(ge=1)] = 4
    head_dim: Annotated[int, Field(ge=1)] = 32
    ff_dim: Annotated[int, Field(ge=1)] = 256
    floor_channels: tuple[int, ...] = (8, 16, 32, 32)
    box_pos_dims: Annotated[int, Field(ge=2, multiple_of=2)] = 16
    category_dim: Annotated[int, Field(ge=1)] = 64
    anchor_pos_dims: Annotated[int, Field(ge=2, multiple_of=2)] = 16
    anchor_hidden: Annotated[int, Field(ge=1)] = 32
    head_hidden: Annotated[int, Field(ge=1)] = 128
    mixture_components: Annotated[int, Field(ge=1, description="K")] = 5
    shape_width: Annotated[int, Field(ge=1)] = 64
    shape_layers: Annotated[int, Field(ge=1)] = 6
    shape_heads: Annotated[int, Field(ge=1)] = 4
    shape_head_dim: Annotated[int, Field(ge=1)] = 16
    shape_ff_dim: Annotated[int, Field(ge=1)] = 256
    readout_depths: tuple[int, int, int, int] = (3, 4, 5, 6)
    temperature: Annotated[float, Field(ge=0.0)] = 1.0
    max_objects: Annotated[int, Field(ge=1)] = 12

    @model_validator(mode="after")
    def _check_readouts(self) -> Self:
        d = self.readout_depths
        if any(a >= b for a, b in zip(d, d[1:], strict=False)) or d[0] < 1:
            raise ValueError("readout_depths must be positive and strictly increasing")
        if d[-1] != self.shape_layers:
            raise ValueError("the last readout depth must equal shape_layers")
        return self


class TrainingConfig(_Section):
    batch_size: Annotated[int, Field(ge=1)] = 16
    epochs: Annotated[int, Field(ge=1)] = 50
    lr: Annotated[float, Field(gt=0.0)] = 1e-3
    layout_warmup_steps: Annotated[int, Field(ge=0)] = 0
    checkpoint_every: Annotated[int, Field(ge=1, description="Epochs between checkpoints")] = 1


class EvaluationConfig(_Section):
    n_scenes: Annotated[int, Field(ge=1)] = 100
    grid_resolution: Annotated[int, Field(ge=8)] = 32
    threshold: Annotated[float, Field(gt=0.0, lt=1.0)] = 0.5
    diversity_runs: Annotated[int, Field(ge=2)] = 10
    diversity_masks: Annotated[int, Field(ge=1)] = 10
    kl_smoothing: Annotated[float, Field(gt=0.0)] = 1e-4
    collision_eps: Annotated[float, Field(ge=0.0)] = 1e-6
    category: str = "chair"


PRESETS: dict[str, dict[str, Any]] = {
    "desk": {},
    "paper": {
        "codec": {
            "n_points": 2048,
            "n_anchors": 512,
            "k": 32,
            "codebook_size": 1024,
            "code_dim": 256,
            "patch_hidden": 256,
            "heads": 8,
            "head_hidden": 256,
            "queries": 2048,
            "epochs": 1000,
            "grid_resolution": 64,
        },
        "scene": {"min_objects": 3, "max_objects": 13},
        "generator": {
            "token_dim": 1024,
            "query_dim": 64,
            "layers": 4,
            "heads": 16,
            "head_dim": 64,
            "ff_dim": 2048,
            "floor_channels": (32, 64, 128, 256),
            "box_pos_dims": 64,
            "category_dim": 512,
            "anchor_pos_dims": 64,
            "anchor_hidden": 64,
            "head_hidden": 512,
            "mixture_components": 10,
            "shape_width": 512,
            "shape_layers": 12,
            "shape_heads": 8,
            "shape_head_dim": 64,
            "shape_ff_dim": 2048,
            "readout_depths": (6, 8, 10, 12),
        },
        "training": {"batch_size": 128},
        "evaluation": {"n_scenes": 1000, "grid_resolution": 64},
    },
}


def deep_merge(base: dict[str, Any], override: dict[str, Any]) -> dict[str, Any]:
    """Recursive dict merge; ``override`` wins on conflicts."""
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


class RunConfig(_Section):
    """Resolved run configuration."""

    preset: Preset = "desk"
    codec: CodecConfig = Field(default_factory=CodecConfig)
    scene: SceneConfig = Field(default_factory=SceneConfig)
    generator: GeneratorConfig = Field(default_factory=GeneratorConfig)
    training: TrainingConfig = Field(default_factory=TrainingConfig)
    evaluation: EvaluationConfig = Field(default_factory=EvaluationConfig)

    @classmethod
    def resolve(cls, document: dict[str, Any] | None = None) -> "RunConfig":
        """Apply the document's preset, then its explicit keys."""
        doc = dict(document or {})
        preset = doc.get("preset", "desk")
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; expected one of {sorted(PRESETS)}")
        try:
            return cls.model_validate(deep_merge(PRESETS[preset], doc))
        except ValidationError as e:
            raise ConfigError(f"invalid run configuration:\n{e}") from e

    @classmethod
    def load(cls, path: Path | None) -> "RunConfig":
        if path is None:
            return cls.resolve()
        try:
            document = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError as e:
            raise ConfigError(f"config file not found: {path}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file is not valid JSON: {e}") from e
        if not isinstance(document, dict):
            raise ConfigError("config document must be a JSON object")
        return cls.resolve(document)

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Scene documents
# ---------------------------------------------------------------------------


class FloorDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    H: Annotated[int, Field(ge=1)]
    W: Annotated[int, Field(ge=1)]
    cells: str
    transform: Annotated[list[float], Field(min_length=6, max_length=6)]


class FurnitureDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    category: str
    t: Annotated[list[float], Field(min_length=3, max_length=3)]
    s: Annotated[list[float], Field(min_length=3, max_length=3)]
    r: float
    anchors: list[Annotated[list[float], Field(min_length=3, max_length=3)]] | None = None
    codes: list[Annotated[int, Field(ge=0)]] | None = None
    style_seed: Annotated[int, Field(ge=0)] | None = None

    @model_validator(mode="after")
    def _check_shape(self) -> Self:
        if (self.anchors is None) != (self.codes is None):
            raise ValueError("anchors and codes must be given together")
        if self.anchors is not None and self.codes is not None and len(self.anchors) != len(self.codes):
            raise ValueError("anchors and codes differ in length")
        return self


class SceneDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    room_type: str
    floor: FloorDocument
    furniture: list[FurnitureDocument]


def _error_path(loc: tuple[int | str, ...]) -> str:
    path = ""
    for part in loc:
        if isinstance(part, int):
            path += f"[{part}]"
        else:
            path += f".{part}" if path else str(part)
    return path or "<root>"


def scene_to_document(scene: Scene) -> dict[str, Any]:
    floor = scene.floor
    furniture: list[dict[str, Any]] = []
    for f in scene.furniture:
        item: dict[str, Any] = {
            "category": f.category,
            "t": list(f.translation),
            "s": list(f.size),
            "r": f.yaw,
        }
        if f.shape is not None:
            item["anchors"] = f.shape.anchors.tolist()
            item["codes"] = [int(c) for c in f.shape.codes]
        if f.style_seed is not None:
            item["style_seed"] = f.style_seed
        furniture.append(item)
    return {
        "room_type": scene.room_type,
        "floor": {
            "H": floor.height,
            "W": floor.width,
            "cells": encode_rle(floor.cells),
            "transform": list(floor.transform),
        },
        "furniture": furniture,
    }


def scene_to_json(scene: Scene) -> str:
    """Compact, deterministic JSON text for one scene."""
    return json.dumps(scene_to_document(scene), separators=(",", ":"))


def _floor(doc: FloorDocument, path: str = "floor") -> FloorPlanMask:
    try:
        cells = decode_rle(doc.cells, doc.H, doc.W)
        t6 = doc.transform
        return FloorPlanMask(cells=cells, transform=(t6[0], t6[1], t6[2], t6[3], t6[4], t6[5]))
    except ValueError as e:
        raise SceneParseError(path, str(e)) from e


def floor_from_document(data: Any) -> FloorPlanMask:
    """A bare floor document, as found under a scene's "floor" key."""
    try:
        doc = FloorDocument.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        raise SceneParseError(_error_path(tuple(first["loc"])), first["msg"]) from e
    return _floor(doc, "<root>")


def scene_from_document(data: Any) -> Scene:
    try:
        doc = SceneDocument.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        raise SceneParseError(_error_path(tuple(first["loc"])), first["msg"]) from e

    floor = _floor(doc.floor)

    furniture: list[FurnitureInstance] = []
    for i, item in enumerate(doc.furniture):
        try:
            shape = None
            if item.anchors is not None and item.codes is not None:
                shape = AnchorLatentSet(
                    anchors=np.array(item.anchors, dtype=np.float64),
                    codes=np.array(item.codes, dtype=np.int64),
                )
            furniture.append(
                FurnitureInstance(
                    category=item.category,
                    translation=(item.t[0], item.t[1], item.t[2]),
                    size=(item.s[0], item.s[1], item.s[2]),
                    yaw=item.r,
                    shape=shape,
                    style_seed=item.style_seed,
                )
            )
        except ValueError as e:
            raise SceneParseError(f"furniture[{i}]", str(e)) from e
    return Scene(floor=floor, furniture=tuple(furniture), room_type=doc.room_type)


def scene_from_json(text: str) -> Scene:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise SceneParseError("<root>", f"invalid JSON: {e}") from e
    return scene_from_document(data)
