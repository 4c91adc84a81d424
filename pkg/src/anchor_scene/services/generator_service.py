"""Joint layout and shape training of the scene generator."""

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from datetime import datetime
from typing import Any

import numpy as np
from numpy.typing import NDArray

from anchor_scene.domain.errors import CheckpointMismatchError, DataError, NumericError
from anchor_scene.domain.events import CheckpointSavedEvent, EpochCompletedEvent, TrainingStepEvent
from anchor_scene.domain.models import (
    ATTRIBUTE_WIDTH,
    AttributeStats,
    CategoryTable,
    FurnitureInstance,
    Scene,
    normalize_instance,
)
from anchor_scene.networks.generator import GeneratorModel
from anchor_scene.numerics import ops
from anchor_scene.numerics.optim import AdamState, adam_step
from anchor_scene.numerics.tensor import FloatArray, Tape, Tensor
from anchor_scene.schemas import GeneratorConfig, TrainingConfig
from anchor_scene.services.checkpointing import restore, restore_rng, rng_state, snapshot
from anchor_scene.services.ports import CheckpointStorePort, EventBusPort

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EncodedScene:
    """Array view of one scene: floor cells, category ids, normalized rows and shapes."""

    floor: FloatArray
    labels: NDArray[np.int64]
    rows: FloatArray
    anchors: FloatArray
    codes: NDArray[np.int64]

    def __len__(self) -> int:
        return int(self.labels.shape[0])


def encode_instances(
    furniture: Sequence[FurnitureInstance],
    table: CategoryTable,
    stats: AttributeStats,
) -> tuple[NDArray[np.int64], FloatArray, FloatArray, NDArray[np.int64]]:
    """(labels, rows, anchors, codes) of instances that all carry anchor-latents."""
    missing = [f.category for f in furniture if f.shape is None]
    if missing:
        raise DataError(f"{len(missing)} furniture instances have no anchor-latents (encode the corpus with a codec)")
    labels = np.array([table.index(f.category) for f in furniture], dtype=np.int64)
    if not furniture:
        return labels, np.zeros((0, ATTRIBUTE_WIDTH)), np.zeros((0, 0, 3)), np.zeros((0, 0), dtype=np.int64)
    rows = np.stack([normalize_instance(f, stats) for f in furniture])
    anchors = np.stack([f.shape.anchors for f in furniture if f.shape is not None])
    codes = np.stack([f.shape.codes for f in furniture if f.shape is not None])
    return labels, rows, anchors, codes


def encode_scene(scene: Scene, table: CategoryTable, stats: AttributeStats) -> EncodedScene:
    labels, rows, anchors, codes = encode_instances(scene.furniture, table, stats)
    return EncodedScene(scene.floor.cells.astype(np.float64), labels, rows, anchors, codes)


def context_tokens(model: GeneratorModel, scene: EncodedScene, members: NDArray[np.int64]) -> Tensor | None:
    """Object tokens of the selected furniture, or None for an empty context."""
    if members.size == 0:
        return None
    return model.object_tokens(scene.labels[members], scene.rows[members], scene.anchors[members], scene.codes[members])


@dataclass
class SceneLoss:
    total: Tensor
    layout: float
    shape: float

    @property
    def parts(self) -> dict[str, float]:
        return {"L_layout": self.layout, "L_shape": self.shape}


def scene_batch_loss(
    model: GeneratorModel,
    batch: Sequence[EncodedScene],
    table: CategoryTable,
    rng: np.random.Generator,
    *,
    include_shape: bool = True,
) -> SceneLoss:
    """Random-prefix teacher-forced loss over a batch of scenes.

    Each scene is permuted and cut after j - 1 objects, j - 1 uniform in [0, n]; the
    target is object j, or 'end' when the prefix is the whole scene. L_layout is the batch
    mean of the attribute NLL; L_shape sums the per-anchor NLL over the target's sorted
    anchor-latents and divides by the batch size. 'end' targets add no shape term.
    """
    if not batch:
        raise DataError("empty training batch")
    contexts: list[Tensor | None] = []
    labels = np.full(len(batch), table.end_index, dtype=np.int64)
    rows = np.zeros((len(batch), ATTRIBUTE_WIDTH))
    targets: list[tuple[int, EncodedScene, int]] = []
    for b, scene in enumerate(batch):
        order = rng.permutation(len(scene))
        prefix = int(rng.integers(0, len(scene) + 1))
        contexts.append(context_tokens(model, scene, order[:prefix]))
        if prefix < len(scene):
            target = int(order[prefix])
            labels[b] = scene.labels[target]
            rows[b] = scene.rows[target]
            targets.append((b, scene, target))

    floor = model.encode_floor(np.stack([scene.floor for scene in batch]))
    q_hat = model.scene_forward(floor, contexts)
    has_box = labels != table.end_index
    _, _, prediction = model.extract_attributes(q_hat, "teacher", labels=labels, rows=rows)
    layout = ops.mean(prediction.nll(labels, rows, has_box))

    shape_value = 0.0
    total = layout
    if include_shape and targets:
        picked = np.array([b for b, _, _ in targets], dtype=np.int64)
        anchors = np.stack([scene.anchors[t] for _, scene, t in targets])
        codes = np.stack([scene.codes[t] for _, scene, t in targets])
        condition = model.shape_condition(ops.index(q_hat, picked), labels[picked], rows[picked])
        shape_prediction = model.shape_forward(condition, anchors, codes)
        values = np.concatenate([anchors, codes[..., None].astype(np.float64)], axis=-1)
        shape = ops.div(ops.sum(shape_prediction.nll(values)), float(len(batch)))
        shape_value = shape.item()
        total = ops.add(layout, shape)

    if not np.isfinite(total.item()):
        raise NumericError("scene loss is not finite")
    return SceneLoss(total, layout.item(), shape_value)


def generator_from_manifest(manifest: dict[str, Any]) -> GeneratorModel:
    floor_shape = manifest["floor_shape"]
    return GeneratorModel(
        GeneratorConfig.model_validate(manifest["architecture"]),
        n_categories=len(manifest["categories"]),
        codebook_size=int(manifest["D"]),
        n_anchors=int(manifest["M"]),
        floor_shape=(int(floor_shape[0]), int(floor_shape[1])),
        rng=np.random.default_rng(0),
    )


@dataclass(frozen=True)
class GeneratorBundle:
    """A restored generator with everything needed to sample from it."""

    model: GeneratorModel
    table: CategoryTable
    stats: AttributeStats
    codec_hash: str
    config_hash: str


def load_generator(store: CheckpointStorePort, name: str) -> GeneratorBundle:
    if not store.exists(name):
        raise DataError(f"no generator checkpoint named {name!r}")
    tensors, manifest = store.load(name)
    if manifest.get("stage") != "generator":
        raise DataError(f"checkpoint {name!r} is not a generator checkpoint")
    model = generator_from_manifest(manifest)
    restore(model, tensors)
    return GeneratorBundle(
        model=model,
        table=CategoryTable(tuple(manifest["categories"])),
        stats=AttributeStats.from_dict(manifest["stats"]),
        codec_hash=str(manifest.get("codec_hash", "")),
        config_hash=str(manifest.get("config_hash", "")),
    )


@dataclass
class GeneratorTrainer:
    """Adam over mini-batches of random-prefix scene losses."""

    model: GeneratorModel
    scenes: Sequence[EncodedScene]
    table: CategoryTable
    stats: AttributeStats
    training: TrainingConfig
    rng: np.random.Generator
    config_hash: str = ""
    codec_hash: str = ""
    event_bus: EventBusPort | None = None
    store: CheckpointStorePort | None = None
    checkpoint_name: str = "generator"
    step: int = 0
    epoch: int = 0
    adam: AdamState = field(init=False)

    def __post_init__(self) -> None:
        if not self.scenes:
            raise DataError("scene training needs at least one scene")
        self.adam = AdamState(lr=self.training.lr)

    @property
    def in_warmup(self) -> bool:
        return self.step < self.training.layout_warmup_steps

    def train_step(self, batch: Sequence[EncodedScene]) -> dict[str, float]:
        params = self.model.parameters()
        with Tape() as tape:
            loss = scene_batch_loss(self.model, batch, self.table, self.rng, include_shape=not self.in_warmup)
            tape.backward(loss.total)
        adam_step(params, self.adam, allow_missing=True)
        self.step += 1
        parts = loss.parts
        logger.debug(f"scene step {self.step}: {parts}")
        if self.event_bus is not None:
            self.event_bus.publish(TrainingStepEvent(stage="scene", step=self.step, epoch=self.epoch, losses=parts))
        return parts

    def train_epoch(self) -> dict[str, float]:
        self.epoch += 1
        order = self.rng.permutation(len(self.scenes))
        size = self.training.batch_size
        totals: dict[str, float] = {}
        batches = 0
        for start in range(0, len(order), size):
            batch = [self.scenes[int(i)] for i in order[start : start + size]]
            for key, value in self.train_step(batch).items():
                totals[key] = totals.get(key, 0.0) + value
            batches += 1
        means = {key: value / batches for key, value in totals.items()}
        logger.info(f"scene epoch {self.epoch}: {means}")
        if self.event_bus is not None:
            self.event_bus.publish(EpochCompletedEvent(stage="scene", epoch=self.epoch, mean_losses=means))
        return means

    def train(self, epochs: int) -> GeneratorModel:
        """Run until ``epochs`` epochs are complete; checkpoints every ``checkpoint_every`` and at the end."""
        while self.epoch < epochs:
            self.train_epoch()
            if self.epoch % self.training.checkpoint_every == 0 or self.epoch == epochs:
                self.save()
        return self.model

    def manifest(self) -> dict[str, Any]:
        return {
            "stage": "generator",
            "architecture": self.model.config.model_dump(mode="json"),
            "categories": self.table.to_list(),
            "stats": self.stats.to_dict(),
            "floor_shape": list(self.model.floor_shape),
            "M": self.model.n_anchors,
            "D": self.model.codebook_size,
            "codec_hash": self.codec_hash,
            "config_hash": self.config_hash,
            "step": self.step,
            "epoch": self.epoch,
            "adam_step": self.adam.step,
            "rng": rng_state(self.rng),
            "created_at": datetime.now().isoformat(timespec="seconds"),
        }

    def save(self) -> None:
        if self.store is None:
            return
        path = self.store.save(self.checkpoint_name, snapshot(self.model, self.adam), self.manifest())
        if self.event_bus is not None:
            self.event_bus.publish(CheckpointSavedEvent(stage="scene", path=path, step=self.step, epoch=self.epoch))

    def resume(self) -> bool:
        """Continue from the stored checkpoint if one exists."""
        if self.store is None or not self.store.exists(self.checkpoint_name):
            return False
        tensors, manifest = self.store.load(self.checkpoint_name)
        if manifest.get("config_hash") != self.config_hash:
            raise CheckpointMismatchError("stored generator checkpoint was trained with a different configuration")
        if manifest.get("codec_hash") != self.codec_hash:
            raise CheckpointMismatchError("stored generator checkpoint was trained against a different codec")
        restore(self.model, tensors, self.adam, int(manifest["adam_step"]))
        self.step, self.epoch = int(manifest["step"]), int(manifest["epoch"])
        self.rng = restore_rng(manifest["rng"])
        logger.info(f"resumed scene training at epoch {self.epoch}, step {self.step}")
        return True


def build_generator(
    config: GeneratorConfig,
    table: CategoryTable,
    *,
    codebook_size: int,
    n_anchors: int,
    floor_shape: tuple[int, int],
    rng: np.random.Generator,
) -> GeneratorModel:
    return GeneratorModel(
        config,
        n_categories=len(table),
        codebook_size=codebook_size,
        n_anchors=n_anchors,
        floor_shape=floor_shape,
        rng=rng,
    )

