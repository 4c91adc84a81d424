"""Codec losses, training loop, grid reconstruction and the shape encoder/decoder adapters."""

import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from datetime import datetime
from typing import Any

import numpy as np
from numpy.typing import NDArray

from anchor_scene.domain.errors import CheckpointMismatchError, ContractViolation, DataError, NumericError
from anchor_scene.domain.events import CheckpointSavedEvent, EpochCompletedEvent, TrainingStepEvent
from anchor_scene.domain.models import AnchorLatentSet, Scene
from anchor_scene.domain.shapes import FloatArray, FurnitureSolid, OccupancyGrid, voxel_centers
from anchor_scene.geometry.grids import extract_boundary_points
from anchor_scene.geometry.solids import (
    TEMPLATES,
    make_furniture,
    mask_iou,
    occupancy,
    sample_queries,
    sample_surface,
)
from anchor_scene.networks.codec import CodecModel
from anchor_scene.numerics import ops
from anchor_scene.numerics.optim import AdamState, adam_step
from anchor_scene.numerics.tensor import Tape, Tensor, as_tensor
from anchor_scene.schemas import CodecConfig
from anchor_scene.services.checkpointing import manifest_hash, restore, restore_rng, rng_state, snapshot
from anchor_scene.services.ports import CheckpointStorePort, EventBusPort, ShapeDecoderPort, ShapeEncoderPort

logger = logging.getLogger(__name__)

BCE_CLAMP = 1e-7
_GRID_CHUNK = 4096


@dataclass
class CodecStep:
    """Loss of one shape plus what the EMA codebook update needs."""

    loss: Tensor
    occupancy: float
    commitment: float
    latents: FloatArray
    ids: NDArray[np.int64]

    @property
    def parts(self) -> dict[str, float]:
        return {"L_occ": self.occupancy, "L_commit": self.commitment}


def binary_cross_entropy(probs: Tensor, targets: FloatArray) -> Tensor:
    """Mean BCE with probabilities clamped to [1e-7, 1 - 1e-7]."""
    y = np.asarray(targets, dtype=np.float64)
    if y.shape != probs.shape:
        raise ContractViolation(f"targets {y.shape} do not match predictions {probs.shape}")
    p = ops.clip(probs, BCE_CLAMP, 1.0 - BCE_CLAMP)
    pos = ops.mul(ops.log(p), y)
    neg = ops.mul(ops.log(ops.sub(1.0, p)), 1.0 - y)
    return ops.neg(ops.mean(ops.add(pos, neg)))


def commitment_loss(z: Tensor, quantized: FloatArray) -> Tensor:
    """mean_i ||sg(ẑ_i) - z_i||^2."""
    diff = ops.sub(z, as_tensor(quantized))
    return ops.mean(ops.sum(ops.square(diff), axis=-1))


def codec_loss_on(
    model: CodecModel,
    cloud: FloatArray,
    queries: FloatArray,
    labels: FloatArray,
) -> CodecStep:
    """L = L_occ + λ L_commit for fixed samples."""
    anchors, z = model.encode(cloud)
    quantized, ids = model.quantize(z)
    probs = model.decode_tokens(anchors, quantized, queries)
    occ = binary_cross_entropy(probs, labels)
    commit = commitment_loss(z, quantized.data)
    loss = ops.add(occ, ops.mul(commit, model.config.commitment))
    if not np.isfinite(loss.item()):
        raise NumericError("codec loss is not finite")
    return CodecStep(loss, occ.item(), commit.item(), z.data.copy(), ids)


def codec_loss(model: CodecModel, solid: FurnitureSolid, rng: np.random.Generator) -> CodecStep:
    """Draw a surface cloud and a query batch from ``solid``, then evaluate the loss."""
    cfg = model.config
    cloud = sample_surface(solid, cfg.n_points, rng)
    queries, labels = sample_queries(solid, cfg.queries, rng, cfg.surface_fraction, cfg.query_noise)
    return codec_loss_on(model, cloud, queries, labels)


def reconstruct_grid(model: CodecModel, latents: AnchorLatentSet, resolution: int) -> OccupancyGrid:
    """Decoded occupancy at every voxel center of an R^3 canonical grid."""
    if resolution < 8:
        raise ContractViolation(f"grid resolution must be >= 8, got {resolution}")
    latents.check_codes(model.codebook.size)
    anchors = np.asarray(latents.anchors)
    tokens = model.decoder_tokens(anchors, as_tensor(model.codebook.lookup(latents.codes)))
    centers = voxel_centers(resolution).reshape(-1, 3)
    values = np.concatenate(
        [
            model.occupancy(anchors, tokens, centers[i : i + _GRID_CHUNK]).data
            for i in range(0, len(centers), _GRID_CHUNK)
        ]
    )
    return OccupancyGrid(values.reshape(resolution, resolution, resolution))


def occupancy_iou(
    model: CodecModel,
    latents: AnchorLatentSet,
    solid: FurnitureSolid,
    rng: np.random.Generator,
    n_queries: int = 10_000,
    threshold: float = 0.5,
) -> float:
    """IoU of the thresholded decoded field against analytic occupancy on uniform queries."""
    queries = rng.uniform(-1.0, 1.0, size=(n_queries, 3))
    anchors = np.asarray(latents.anchors)
    tokens = model.decoder_tokens(anchors, as_tensor(model.codebook.lookup(latents.codes)))
    predicted = np.concatenate(
        [model.occupancy(anchors, tokens, queries[i : i + _GRID_CHUNK]).data for i in range(0, n_queries, _GRID_CHUNK)]
    )
    return mask_iou(predicted >= threshold, occupancy(solid, queries))


def solids_from_scenes(scenes: Iterable[Scene], limit: int) -> list[FurnitureSolid]:
    """Distinct (category, style_seed) solids in first-appearance order, at most ``limit``."""
    seen: dict[tuple[str, int], FurnitureSolid] = {}
    for scene in scenes:
        for f in scene.furniture:
            if f.style_seed is None:
                continue
            key = (f.category, f.style_seed)
            if key not in seen:
                seen[key] = make_furniture(f.category, f.style_seed)
            if len(seen) >= limit:
                return list(seen.values())
    if not seen:
        raise DataError("corpus carries no style seeds; cannot rebuild training solids")
    return list(seen.values())


def codec_manifest(model: CodecModel, config_hash: str, extra: dict[str, Any] | None = None) -> dict[str, Any]:
    cfg = model.config
    manifest: dict[str, Any] = {
        "stage": "codec",
        "M": cfg.n_anchors,
        "C": cfg.code_dim,
        "D": cfg.codebook_size,
        "k": cfg.k,
        "architecture": cfg.model_dump(mode="json"),
        "config_hash": config_hash,
    }
    manifest.update(extra or {})
    return manifest


def load_codec(store: CheckpointStorePort, name: str) -> tuple[CodecModel, str]:
    """Rebuild a codec from its checkpoint; returns the model and its manifest hash."""
    if not store.exists(name):
        raise DataError(f"no codec checkpoint named {name!r}")
    tensors, manifest = store.load(name)
    if manifest.get("stage") != "codec":
        raise DataError(f"checkpoint {name!r} is not a codec checkpoint")
    model = CodecModel(CodecConfig.model_validate(manifest["architecture"]), np.random.default_rng(0))
    restore(model, tensors)
    return model, manifest_hash(manifest)


@dataclass
class CodecTrainer:
    """Adam over codec_loss, one shape per step, with EMA codebook updates after each step."""

    model: CodecModel
    solids: Sequence[FurnitureSolid]
    rng: np.random.Generator
    config_hash: str = ""
    event_bus: EventBusPort | None = None
    store: CheckpointStorePort | None = None
    checkpoint_name: str = "codec"
    step: int = 0
    epoch: int = 0
    adam: AdamState = field(init=False)

    def __post_init__(self) -> None:
        if not self.solids:
            raise DataError("codec training needs at least one shape")
        self.adam = AdamState(lr=self.model.config.lr)

    def train_step(self, solid: FurnitureSolid) -> dict[str, float]:
        params = self.model.parameters()
        with Tape() as tape:
            result = codec_loss(self.model, solid, self.rng)
            tape.backward(result.loss)
        adam_step(params, self.adam, allow_missing=True)
        self.model.codebook.update(result.latents, result.ids, self.rng)
        self.step += 1
        parts = result.parts
        logger.debug(f"codec step {self.step}: {parts}")
        if self.event_bus is not None:
            self.event_bus.publish(TrainingStepEvent(stage="codec", step=self.step, epoch=self.epoch, losses=parts))
        return parts

    def train_epoch(self) -> dict[str, float]:
        self.epoch += 1
        self.model.codebook.reset_usage()
        totals: dict[str, float] = {}
        order = self.rng.permutation(len(self.solids))
        for i in order:
            for key, value in self.train_step(self.solids[int(i)]).items():
                totals[key] = totals.get(key, 0.0) + value
        means = {key: value / len(order) for key, value in totals.items()}
        usage = self.model.codebook.usage_fraction()
        logger.info(f"codec epoch {self.epoch}: {means} codebook usage {usage:.2f}")
        if self.event_bus is not None:
            self.event_bus.publish(
                EpochCompletedEvent(stage="codec", epoch=self.epoch, mean_losses=means, extras={"usage": usage})
            )
        return means

    def train(self, epochs: int) -> CodecModel:
        """Run until ``epochs`` epochs are complete in total, checkpointing after each one."""
        while self.epoch < epochs:
            self.train_epoch()
            self.save()
        return self.model

    def manifest(self) -> dict[str, Any]:
        return codec_manifest(
            self.model,
            self.config_hash,
            {
                "step": self.step,
                "epoch": self.epoch,
                "adam_step": self.adam.step,
                "rng": rng_state(self.rng),
                "created_at": datetime.now().isoformat(timespec="seconds"),
            },
        )

    def save(self) -> None:
        if self.store is None:
            return
        path = self.store.save(self.checkpoint_name, snapshot(self.model, self.adam), self.manifest())
        if self.event_bus is not None:
            self.event_bus.publish(CheckpointSavedEvent(stage="codec", path=path, step=self.step, epoch=self.epoch))

    def resume(self) -> bool:
        """Continue from the stored checkpoint if one exists."""
        if self.store is None or not self.store.exists(self.checkpoint_name):
            return False
        tensors, manifest = self.store.load(self.checkpoint_name)
        if manifest.get("config_hash") != self.config_hash:
            raise CheckpointMismatchError("stored codec checkpoint was trained with a different configuration")
        restore(self.model, tensors, self.adam, int(manifest["adam_step"]))
        self.step, self.epoch = int(manifest["step"]), int(manifest["epoch"])
        self.rng = restore_rng(manifest["rng"])
        logger.info(f"resumed codec training at epoch {self.epoch}, step {self.step}")
        return True


def train_codec(
    solids: Sequence[FurnitureSolid],
    config: CodecConfig,
    rng: np.random.Generator,
    epochs: int | None = None,
) -> CodecModel:
    """Train a fresh codec in memory."""
    model = CodecModel(config, rng)
    return CodecTrainer(model, solids, rng).train(epochs or config.epochs)


class CodecShapeEncoder(ShapeEncoderPort):
    """Encodes solids through a trained codec; the surface sample depends only on the solid."""

    def __init__(self, model: CodecModel) -> None:
        self._model = model
        self._cache: dict[tuple[str, int], AnchorLatentSet] = {}

    def encode(self, solid: FurnitureSolid) -> AnchorLatentSet:
        key = (solid.category, solid.style_seed)
        if key not in self._cache:
            rng = np.random.default_rng([list(TEMPLATES).index(solid.category), solid.style_seed])
            cloud = sample_surface(solid, self._model.config.n_points, rng)
            self._cache[key] = self._model.encode_latents(cloud)
        return self._cache[key]


class CodecShapeDecoder(ShapeDecoderPort):
    """Reconstructs grids and boundary clouds through a trained codec."""

    def __init__(self, model: CodecModel, resolution: int = 32, threshold: float = 0.5) -> None:
        self._model = model
        self._resolution = resolution
        self._threshold = threshold
        self._clouds: dict[bytes, FloatArray] = {}

    def decode_grid(self, latents: AnchorLatentSet, resolution: int) -> OccupancyGrid:
        return reconstruct_grid(self._model, latents, resolution)

    def boundary_cloud(self, latents: AnchorLatentSet) -> FloatArray:
        key = latents.anchors.tobytes() + latents.codes.tobytes()
        if key not in self._clouds:
            grid = self.decode_grid(latents, self._resolution)
            self._clouds[key] = extract_boundary_points(grid, self._threshold)
        return self._clouds[key]


