"""Tests for the anchor-latent codec and its training service."""

from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from anchor_scene.domain.errors import CheckpointMismatchError, ContractViolation, DataError
from anchor_scene.domain.events import DomainEvent, EpochCompletedEvent
from anchor_scene.domain.models import FloorPlanMask, Scene
from anchor_scene.domain.shapes import FurnitureSolid
from anchor_scene.geometry.solids import make_furniture, sample_surface
from anchor_scene.infrastructure.checkpoint import CheckpointStore
from anchor_scene.infrastructure.event_bus import InMemoryEventBus
from anchor_scene.networks.codec import Codebook, CodecModel
from anchor_scene.numerics.tensor import Tensor
from anchor_scene.schemas import CodecConfig
from anchor_scene.services.codec_service import (
    CodecShapeEncoder,
    CodecTrainer,
    binary_cross_entropy,
    codec_loss,
    load_codec,
    occupancy_iou,
    reconstruct_grid,
    solids_from_scenes,
)

from tests.conftest import D, M, furniture


class TestCodebook:
    """EMA codebook."""

    def test_ema_preserves_total_cluster_size(self, rng: np.random.Generator) -> None:
        """Cluster sizes keep summing to the latents per update."""
        book = Codebook(D, 4, rng, latents_per_update=M)
        for _ in range(5):
            z = rng.normal(size=(M, 4))
            book.update(z, book.nearest(z), rng)
        assert book.cluster_size.sum() == pytest.approx(M)
        assert np.all(book.cluster_size > 0)

    def test_dead_codes_are_reseeded(self, rng: np.random.Generator) -> None:
        """Codes unused for dead_code_steps updates jump onto batch latents."""
        book = Codebook(4, 2, rng, latents_per_update=3, dead_code_steps=1)
        z = rng.normal(size=(3, 2))
        book.update(z, np.zeros(3, dtype=np.int64), rng)
        for row in book.embeddings[1:]:
            assert any(np.array_equal(row, latent) for latent in z)
        np.testing.assert_array_equal(book.unused_steps, 0.0)

    def test_nearest_ties_go_low(self, rng: np.random.Generator) -> None:
        """Equidistant codewords resolve to the lowest index."""
        book = Codebook(4, 2, rng, latents_per_update=4)
        book.embeddings[:] = 0.0
        np.testing.assert_array_equal(book.nearest(rng.normal(size=(3, 2))), [0, 0, 0])

    def test_lookup_range(self, rng: np.random.Generator) -> None:
        """Codes outside the codebook are refused."""
        with pytest.raises(ContractViolation):
            Codebook(4, 2, rng, latents_per_update=4).lookup(np.array([4]))


class TestCodecModel:
    """Encoding, quantization and decoding."""

    def test_encode_latents(self, codec_config: CodecConfig, rng: np.random.Generator) -> None:
        """M sorted anchors drawn from the cloud, each with a valid code."""
        model = CodecModel(codec_config, rng)
        cloud = sample_surface(make_furniture("chair", 0), codec_config.n_points, rng)
        latents = model.encode_latents(cloud)
        assert len(latents) == M
        latents.check_codes(D)
        for anchor in latents.anchors:
            assert np.any(np.all(cloud == anchor, axis=1))

    def test_cloud_too_small(self, codec_config: CodecConfig, rng: np.random.Generator) -> None:
        """The cloud must hold at least N points."""
        model = CodecModel(codec_config, rng)
        with pytest.raises(ContractViolation, match="points"):
            model.encode_latents(rng.normal(size=(10, 3)))

    def test_reconstruct_grid(self, codec_config: CodecConfig, rng: np.random.Generator) -> None:
        """Probabilities on every voxel center."""
        model = CodecModel(codec_config, rng)
        latents = model.encode_latents(sample_surface(make_furniture("table", 0), codec_config.n_points, rng))
        grid = reconstruct_grid(model, latents, 8)
        assert grid.resolution == 8
        assert np.all((grid.values >= 0.0) & (grid.values <= 1.0))
        with pytest.raises(ContractViolation):
            reconstruct_grid(model, latents, 4)

    def test_occupancy_iou(self, codec_config: CodecConfig, rng: np.random.Generator) -> None:
        """The decoded field scores an IoU in [0, 1] against the analytic solid."""
        model = CodecModel(codec_config, rng)
        solid = make_furniture("bed", 3)
        latents = model.encode_latents(sample_surface(solid, codec_config.n_points, rng))
        assert 0.0 <= occupancy_iou(model, latents, solid, rng, n_queries=500) <= 1.0


class TestCodecLoss:
    """Occupancy and commitment terms."""

    def test_bce(self) -> None:
        """Half-confidence predictions cost log 2."""
        assert binary_cross_entropy(Tensor([0.5, 0.5]), np.array([1.0, 0.0])).item() == pytest.approx(np.log(2))

    def test_bce_clamps(self) -> None:
        """Saturated wrong predictions stay finite."""
        assert np.isfinite(binary_cross_entropy(Tensor([0.0, 1.0]), np.array([1.0, 0.0])).item())

    def test_loss_parts(self, codec_config: CodecConfig, rng: np.random.Generator) -> None:
        """Both loss terms are finite and non-negative."""
        step = codec_loss(CodecModel(codec_config, rng), make_furniture("sofa", 0), rng)
        assert step.parts["L_occ"] > 0
        assert step.parts["L_commit"] >= 0
        assert step.ids.shape == (M,)


class TestCodecTrainer:
    """Training loop, checkpoints and resume."""

    @pytest.fixture
    def solids(self) -> list[FurnitureSolid]:
        """Two training shapes."""
        return [make_furniture("chair", 0), make_furniture("lamp", 1)]

    def test_step_counts(
        self, codec_config: CodecConfig, solids: list[FurnitureSolid], rng: np.random.Generator
    ) -> None:
        """One step per shape per epoch."""
        trainer = CodecTrainer(CodecModel(codec_config, rng), solids, rng)
        trainer.train(2)
        assert trainer.step == 4
        assert trainer.epoch == 2

    def test_epoch_events(
        self, codec_config: CodecConfig, solids: list[FurnitureSolid], rng: np.random.Generator
    ) -> None:
        """Each epoch reports mean losses and codebook usage."""
        bus = InMemoryEventBus()
        epochs: list[DomainEvent] = []
        bus.subscribe(EpochCompletedEvent, epochs.append)
        CodecTrainer(CodecModel(codec_config, rng), solids, rng, event_bus=bus).train(1)
        (event,) = epochs
        assert isinstance(event, EpochCompletedEvent)
        assert set(event.mean_losses) == {"L_occ", "L_commit"}
        assert 0.0 < event.extras["usage"] <= 1.0

    def test_needs_shapes(self, codec_config: CodecConfig, rng: np.random.Generator) -> None:
        """An empty shape list is a data error."""
        with pytest.raises(DataError):
            CodecTrainer(CodecModel(codec_config, rng), [], rng)

    def test_checkpoint_round_trip(
        self, codec_config: CodecConfig, solids: list[FurnitureSolid], rng: np.random.Generator, tmp_path: Path
    ) -> None:
        """A loaded codec decodes exactly like the trained one."""
        store = CheckpointStore(tmp_path)
        model = CodecModel(codec_config, rng)
        CodecTrainer(model, solids, rng, config_hash="abc", store=store).train(1)
        loaded, codec_hash = load_codec(store, "codec")
        latents = model.encode_latents(sample_surface(solids[0], codec_config.n_points, rng))
        queries = rng.uniform(-1, 1, size=(16, 3))
        np.testing.assert_allclose(loaded.decode(latents, queries).data, model.decode(latents, queries).data)
        assert len(codec_hash) == 16

    def test_resume(self, codec_config: CodecConfig, solids: list[FurnitureSolid], tmp_path: Path) -> None:
        """Resuming restores counters; a different config hash is refused."""
        store = CheckpointStore(tmp_path)

        def trainer(seed: int, config_hash: str) -> CodecTrainer:
            rng = np.random.default_rng(seed)
            return CodecTrainer(CodecModel(codec_config, rng), solids, rng, config_hash=config_hash, store=store)

        trainer(0, "abc").train(1)
        again = trainer(1, "abc")
        assert again.resume()
        assert (again.epoch, again.step) == (1, 2)
        with pytest.raises(CheckpointMismatchError):
            trainer(1, "xyz").resume()

    def test_missing_checkpoint(self, tmp_path: Path) -> None:
        """Loading from an empty directory is a data error."""
        with pytest.raises(DataError):
            load_codec(CheckpointStore(tmp_path), "codec")


class TestShapeAdapters:
    """Solid selection and cached encoding."""

    def test_encoder_caches(self, codec_config: CodecConfig, rng: np.random.Generator) -> None:
        """The same solid always maps to the same latents."""
        encoder = CodecShapeEncoder(CodecModel(codec_config, rng))
        solid = make_furniture("shelf", 5)
        assert encoder.encode(solid) is encoder.encode(solid)

    def test_solids_from_scenes(self, floor: FloorPlanMask) -> None:
        """Distinct (category, seed) pairs in order of appearance."""
        chair = replace(furniture("chair", 0.0, 0.0), style_seed=3)
        bed = replace(furniture("bed", 1.0, 1.0), style_seed=4)
        scene = Scene(floor=floor, furniture=(chair, bed, chair))
        solids = solids_from_scenes([scene], limit=10)
        assert [(s.category, s.style_seed) for s in solids] == [("chair", 3), ("bed", 4)]

    def test_solids_need_seeds(self, shaped_scene: Scene) -> None:
        """Scenes without style seeds cannot rebuild solids."""
        with pytest.raises(DataError):
            solids_from_scenes([shaped_scene], limit=10)
