"""Tests for scene sampling, completion, mismatch correction and shape mixing."""

import numpy as np
import pytest
from numpy.typing import NDArray

from anchor_scene.domain.errors import ContractViolation
from anchor_scene.domain.models import (
    ATTRIBUTE_WIDTH,
    AnchorLatentSet,
    AttributeStats,
    CategoryTable,
    FloorPlanMask,
    Scene,
)
from anchor_scene.networks.generator import GeneratorModel
from anchor_scene.numerics.tensor import FloatArray, Tensor
from anchor_scene.services.synthesis_service import Region, SceneSynthesizer, flag_mismatches, mix_anchor_latents

from tests.conftest import M


@pytest.fixture
def synthesizer(model: GeneratorModel, stats: AttributeStats) -> SceneSynthesizer:
    """Sampler around the untrained tiny generator."""
    return SceneSynthesizer(model, CategoryTable(), stats, max_objects=3)


class TestGeneration:
    """Unconditional and partial-scene sampling."""

    def test_generate_is_seeded(self, synthesizer: SceneSynthesizer, floor: FloorPlanMask) -> None:
        """Equal seeds give identical scenes."""
        a = synthesizer.generate_scene(floor, np.random.default_rng(9))
        b = synthesizer.generate_scene(floor, np.random.default_rng(9))
        assert a == b

    def test_generated_objects(self, synthesizer: SceneSynthesizer, floor: FloorPlanMask) -> None:
        """Objects respect the cap, carry M anchors and never use a reserved label."""
        scene = synthesizer.generate_scene(floor, np.random.default_rng(1), max_objects=2)
        assert len(scene) <= 2
        for item in scene.furniture:
            assert item.category not in ("start", "end")
            assert item.shape is not None and len(item.shape) == M

    def test_cap_must_be_positive(self, synthesizer: SceneSynthesizer, floor: FloorPlanMask) -> None:
        """A zero cap is refused."""
        with pytest.raises(ContractViolation):
            synthesizer.generate_scene(floor, np.random.default_rng(0), max_objects=0)

    def test_completion_keeps_prefix(self, synthesizer: SceneSynthesizer, shaped_scene: Scene) -> None:
        """Given objects come first and unchanged."""
        completed = synthesizer.complete_scene(shaped_scene, np.random.default_rng(2), max_objects=4)
        assert completed.furniture[:3] == shaped_scene.furniture
        assert len(completed) <= 4

    def test_table_must_match(self, model: GeneratorModel, stats: AttributeStats) -> None:
        """The label table must have the model's category count."""
        with pytest.raises(ContractViolation):
            SceneSynthesizer(model, CategoryTable(labels=("chair", "start", "end")), stats)


class TestSingleDrawPerObject:
    """Each object comes from exactly one attribute draw, wherever it lands."""

    @staticmethod
    def scripted(model: GeneratorModel, labels: list[str], monkeypatch: pytest.MonkeyPatch) -> list[int]:
        """Replace the attribute heads with draws of ``labels`` at normalized x = 1 (3 m, outside the room)."""
        calls: list[int] = []
        table = CategoryTable()

        def extract(q_hat: Tensor, mode: str, **kwargs: object) -> tuple[NDArray[np.int64], FloatArray, None]:
            label = labels[min(len(calls), len(labels) - 1)]
            calls.append(table.index(label))
            row = np.zeros((1, ATTRIBUTE_WIDTH))
            row[0, 0] = 1.0
            return np.array([table.index(label)]), row, None

        monkeypatch.setattr(model, "extract_attributes", extract)
        return calls

    def test_off_floor_objects_are_kept(
        self, synthesizer: SceneSynthesizer, floor: FloorPlanMask, monkeypatch: pytest.MonkeyPatch
    ) -> None:
        """Translations outside the mask are not redrawn."""
        calls = self.scripted(synthesizer.model, ["chair"], monkeypatch)
        scene = synthesizer.generate_scene(floor, np.random.default_rng(0), max_objects=3)
        assert len(calls) == 3
        assert len(scene) == 3
        assert all(item.translation[0] == pytest.approx(3.0) for item in scene.furniture)
        assert not floor.contains(3.0, 0.0)

    def test_end_is_drawn_once_per_step(
        self, synthesizer: SceneSynthesizer, floor: FloorPlanMask, monkeypatch: pytest.MonkeyPatch
    ) -> None:
        """An off-floor object followed by 'end' stops after two draws."""
        calls = self.scripted(synthesizer.model, ["chair", "end"], monkeypatch)
        scene = synthesizer.generate_scene(floor, np.random.default_rng(0), max_objects=3)
        assert len(calls) == 2
        assert [item.category for item in scene.furniture] == ["chair"]


class TestMismatchCorrection:
    """Leave-one-out scoring and shape resampling."""

    def test_scores_follow_objects(self, synthesizer: SceneSynthesizer, shaped_scene: Scene) -> None:
        """Reordering the scene reorders the scores."""
        scores = synthesizer.leave_one_out_likelihood(shaped_scene)
        order = [2, 0, 1]
        permuted = shaped_scene.with_furniture(shaped_scene.furniture[i] for i in order)
        np.testing.assert_allclose(synthesizer.leave_one_out_likelihood(permuted), [scores[i] for i in order])
        assert all(np.isfinite(scores))

    def test_empty_scene_has_no_scores(self, synthesizer: SceneSynthesizer, floor: FloorPlanMask) -> None:
        """Nothing to score."""
        assert synthesizer.leave_one_out_likelihood(Scene(floor=floor)) == []

    def test_zero_percentile_is_a_no_op(self, synthesizer: SceneSynthesizer, shaped_scene: Scene) -> None:
        """pct 0 flags nothing and returns the scene unchanged."""
        result = synthesizer.correct(shaped_scene, np.random.default_rng(0), 0.0)
        assert result.flagged == ()
        assert result.scene == shaped_scene

    def test_only_shapes_are_resampled(self, synthesizer: SceneSynthesizer, shaped_scene: Scene) -> None:
        """Flagged objects keep their boxes and get new anchor-latents."""
        corrected = synthesizer.correct_mismatch(shaped_scene, np.random.default_rng(0), 100.0)
        for before, after in zip(shaped_scene.furniture, corrected.furniture, strict=True):
            assert (after.category, after.translation, after.size, after.yaw) == (
                before.category,
                before.translation,
                before.size,
                before.yaw,
            )
            assert after.shape is not None and len(after.shape) == M
            assert after.shape != before.shape

    def test_flag_mismatches(self) -> None:
        """Scores at or below the percentile are flagged."""
        assert flag_mismatches([3.0, 1.0, 2.0], 34.0) == [1]
        assert flag_mismatches([3.0, 1.0, 2.0], 100.0) == [0, 1, 2]
        assert flag_mismatches([3.0, 1.0, 2.0], 0.0) == []
        assert flag_mismatches([], 50.0) == []


class TestShapeMixing:
    """Region-based anchor-latent mixing."""

    @pytest.fixture
    def halves(self) -> tuple[AnchorLatentSet, AnchorLatentSet]:
        """a lives at x > 0 with code 1, b at x < 0 with code 2."""
        grid = np.linspace(0.1, 0.9, 4)
        a = AnchorLatentSet.sorted(np.stack([grid, grid, grid], axis=1), np.ones(4))
        b = AnchorLatentSet.sorted(np.stack([-grid, grid, grid], axis=1), np.full(4, 2))
        return a, b

    def test_region_parse(self) -> None:
        """Six numbers, lower corner first."""
        region = Region.parse("-1,0,-1,1,1,1")
        assert region.lo == (-1.0, 0.0, -1.0)
        assert region.hi == (1.0, 1.0, 1.0)
        with pytest.raises(ContractViolation):
            Region.parse("0,0,0")
        with pytest.raises(ContractViolation):
            Region.parse("a,b,c,d,e,f")

    def test_everything_takes_b(self, halves: tuple[AnchorLatentSet, AnchorLatentSet]) -> None:
        """A region covering the cube returns b."""
        a, b = halves
        assert mix_anchor_latents(a, b, Region.everything()) == b

    def test_empty_region_keeps_a(self, halves: tuple[AnchorLatentSet, AnchorLatentSet]) -> None:
        """lo > hi selects nothing."""
        a, b = halves
        assert mix_anchor_latents(a, b, Region((1.0, 1.0, 1.0), (-1.0, -1.0, -1.0))) == a

    def test_half_and_half(self, halves: tuple[AnchorLatentSet, AnchorLatentSet]) -> None:
        """The negative-x half from b, the rest from a, re-sorted."""
        a, b = halves
        region = Region((-1.0, -1.0, -1.0), (0.0, 1.0, 1.0))
        mixed = mix_anchor_latents(a, b, region)
        assert len(mixed) == 8
        np.testing.assert_array_equal(mixed.codes, [2, 2, 2, 2, 1, 1, 1, 1])

    def test_empty_result(self, halves: tuple[AnchorLatentSet, AnchorLatentSet]) -> None:
        """Dropping all of a and taking none of b is an error."""
        a, b = halves
        with pytest.raises(ContractViolation, match="empty"):
            mix_anchor_latents(a, b, Region((0.0, -1.0, -1.0), (1.0, 1.0, 1.0)))
