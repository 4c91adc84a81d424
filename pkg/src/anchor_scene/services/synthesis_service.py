"""Sampling scenes from a trained generator, and the editing applications built on it."""

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Self

import numpy as np
from numpy.typing import NDArray

from anchor_scene.domain.errors import ContractViolation
from anchor_scene.domain.models import (
    AnchorLatentSet,
    AttributeStats,
    CategoryTable,
    FloorPlanMask,
    FurnitureInstance,
    Scene,
    denormalize_row,
    normalize_instance,
)
from anchor_scene.domain.shapes import FloatArray, Vec3
from anchor_scene.networks.generator import GeneratorModel
from anchor_scene.numerics import ops
from anchor_scene.numerics.tensor import Tensor
from anchor_scene.services.generator_service import encode_instances

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Correction:
    scene: Scene
    flagged: tuple[int, ...]
    scores: tuple[float, ...]


def flag_mismatches(scores: Sequence[float], threshold_pct: float) -> list[int]:
    """Indices whose score is at or below the ``threshold_pct`` percentile; none for pct <= 0."""
    if threshold_pct <= 0 or not scores:
        return []
    values = np.asarray(scores, dtype=np.float64)
    cut = np.percentile(values, min(threshold_pct, 100.0))
    return [int(i) for i in np.flatnonzero(values <= cut)]


class SceneSynthesizer:
    """Autoregressive scene sampling around a trained :class:`GeneratorModel`."""

    def __init__(
        self,
        model: GeneratorModel,
        table: CategoryTable,
        stats: AttributeStats,
        *,
        temperature: float = 1.0,
        max_objects: int | None = None,
    ) -> None:
        """
        Initialize synthesizer.

        Args:
            model: Trained generator
            table: Category table the generator was trained with
            stats: Corpus attribute ranges used for (de)normalization
            temperature: Sampling temperature of every categorical and mixture draw
            max_objects: Default object cap (the generator config's when omitted)
        """
        if len(table) != model.n_categories:
            raise ContractViolation(f"category table has {len(table)} labels, model expects {model.n_categories}")
        self._model = model
        self._table = table
        self._stats = stats
        self._temperature = temperature
        self._max_objects = model.config.max_objects if max_objects is None else max_objects

    @property
    def model(self) -> GeneratorModel:
        return self._model

    @property
    def table(self) -> CategoryTable:
        return self._table

    def _context(self, furniture: Sequence[FurnitureInstance]) -> Tensor | None:
        if not furniture:
            return None
        labels, rows, anchors, codes = encode_instances(furniture, self._table, self._stats)
        return self._model.object_tokens(labels, rows, anchors, codes)

    def _sample_shape(self, q_hat: Tensor, label: int, row: FloatArray, rng: np.random.Generator) -> AnchorLatentSet:
        condition = self._model.shape_condition(q_hat, [label], row[None])
        anchors, codes = self._model.sample_shape(condition, rng, self._temperature)
        return AnchorLatentSet.sorted(anchors, codes)

    def _next_object(
        self,
        floor_token: Tensor,
        furniture: Sequence[FurnitureInstance],
        rng: np.random.Generator,
    ) -> FurnitureInstance | None:
        """One sampled object, or None when the category head chooses 'end'."""
        q_hat = self._model.scene_forward(floor_token, [self._context(furniture)])
        labels, values, _ = self._model.extract_attributes(
            q_hat, "sample", rng=rng, temperature=self._temperature, exclude=[self._table.start_index]
        )
        label, row = int(labels[0]), values[0]
        if label == self._table.end_index:
            return None
        translation, yaw, size = denormalize_row(row, self._stats)
        shape = self._sample_shape(q_hat, label, row, rng)
        return FurnitureInstance(
            category=self._table.label(label), translation=translation, size=size, yaw=yaw, shape=shape
        )

    def _extend(
        self,
        floor: FloorPlanMask,
        furniture: list[FurnitureInstance],
        rng: np.random.Generator,
        max_objects: int,
    ) -> list[FurnitureInstance]:
        floor_token = self._model.encode_floor(floor.cells.astype(np.float64)[None])
        while len(furniture) < max_objects:
            item = self._next_object(floor_token, furniture, rng)
            if item is None:
                break
            furniture.append(item)
        return furniture

    def generate_scene(
        self,
        floor: FloorPlanMask,
        rng: np.random.Generator,
        max_objects: int | None = None,
        room_type: str = "bedroom",
    ) -> Scene:
        """Sample objects until 'end' or the object cap; an immediate 'end' gives an empty scene."""
        cap = self._max_objects if max_objects is None else max_objects
        if cap < 1:
            raise ContractViolation(f"max_objects must be >= 1, got {cap}")
        furniture = self._extend(floor, [], rng, cap)
        logger.debug(f"generated {len(furniture)} objects")
        return Scene(floor=floor, furniture=tuple(furniture), room_type=room_type)

    def complete_scene(self, partial: Scene, rng: np.random.Generator, max_objects: int | None = None) -> Scene:
        """Continue ``partial``; its objects are kept verbatim and come first."""
        cap = self._max_objects if max_objects is None else max_objects
        furniture = self._extend(partial.floor, list(partial.furniture), rng, cap)
        logger.debug(f"completed scene with {len(furniture) - len(partial)} new objects")
        return partial.with_furniture(furniture)

    def leave_one_out_likelihood(self, scene: Scene) -> list[float]:
        """Log-likelihood of each object given all the others, -(L_layout + L_shape)."""
        n = len(scene)
        if n == 0:
            return []
        labels, rows, anchors, codes = encode_instances(scene.furniture, self._table, self._stats)
        tokens = self._model.object_tokens(labels, rows, anchors, codes)
        contexts: list[Tensor | None] = []
        for j in range(n):
            others = np.array([i for i in range(n) if i != j], dtype=np.int64)
            contexts.append(None if others.size == 0 else ops.index(tokens, others))
        floor = self._model.encode_floor(np.repeat(scene.floor.cells.astype(np.float64)[None], n, axis=0))
        q_hat = self._model.scene_forward(floor, contexts)
        _, _, prediction = self._model.extract_attributes(q_hat, "teacher", labels=labels, rows=rows)
        layout = prediction.nll(labels, rows, np.ones(n))
        condition = self._model.shape_condition(q_hat, labels, rows)
        shape = self._model.shape_forward(condition, anchors, codes)
        values = np.concatenate([anchors, codes[..., None].astype(np.float64)], axis=-1)
        total = layout.data + shape.nll(values).data
        return [float(-v) for v in total]

    def correct(self, scene: Scene, rng: np.random.Generator, threshold_pct: float) -> Correction:
        """Resample the anchor-latents of low-likelihood objects; box attributes stay as they are."""
        scores = self.leave_one_out_likelihood(scene)
        flagged = flag_mismatches(scores, threshold_pct)
        if not flagged:
            return Correction(scene, (), tuple(scores))
        furniture = list(scene.furniture)
        floor = self._model.encode_floor(scene.floor.cells.astype(np.float64)[None])
        for j in flagged:
            item = scene.furniture[j]
            others = [f for i, f in enumerate(scene.furniture) if i != j]
            q_hat = self._model.scene_forward(floor, [self._context(others)])
            row = normalize_instance(item, self._stats)
            shape = self._sample_shape(q_hat, self._table.index(item.category), row, rng)
            furniture[j] = item.with_shape(shape)
        logger.info(f"resampled shapes of objects {flagged}")
        return Correction(scene.with_furniture(furniture), tuple(flagged), tuple(scores))

    def correct_mismatch(self, scene: Scene, rng: np.random.Generator, threshold_pct: float) -> Scene:
        return self.correct(scene, rng, threshold_pct).scene


@dataclass(frozen=True)
class Region:
    """Axis-aligned box in the canonical frame; ``lo > hi`` on any axis makes it empty."""

    lo: Vec3
    hi: Vec3

    @classmethod
    def parse(cls, text: str) -> Self:
        """``"x0,y0,z0,x1,y1,z1"``."""
        try:
            values = [float(v) for v in text.split(",")]
        except ValueError as e:
            raise ContractViolation(f"region must be six comma-separated numbers: {text!r}") from e
        if len(values) != 6:
            raise ContractViolation(f"region needs 6 numbers, got {len(values)}")
        return cls((values[0], values[1], values[2]), (values[3], values[4], values[5]))

    @classmethod
    def everything(cls) -> Self:
        return cls((-1.0, -1.0, -1.0), (1.0, 1.0, 1.0))

    def contains(self, points: FloatArray) -> NDArray[np.bool_]:
        p = np.asarray(points, dtype=np.float64)
        return np.all((p >= np.asarray(self.lo)) & (p <= np.asarray(self.hi)), axis=-1)


def mix_anchor_latents(a: AnchorLatentSet, b: AnchorLatentSet, region: Region) -> AnchorLatentSet:
    """Anchors of ``a`` outside ``region`` joined with anchors of ``b`` inside it, re-sorted."""
    keep = ~region.contains(a.anchors)
    take = region.contains(b.anchors)
    anchors = np.concatenate([a.anchors[keep], b.anchors[take]])
    codes = np.concatenate([a.codes[keep], b.codes[take]])
    if codes.size == 0:
        raise ContractViolation("mixing produced an empty anchor set")
    return AnchorLatentSet.sorted(anchors, codes)
