"""Tests for the procedural room corpus."""

import math
from collections import defaultdict

import numpy as np
import pytest

from anchor_scene.domain.errors import ContractViolation
from anchor_scene.domain.models import AnchorLatentSet, Scene
from anchor_scene.domain.shapes import FurnitureSolid
from anchor_scene.geometry.floor import polygon_area
from anchor_scene.geometry.obb import OrientedBox, colliding_mask
from anchor_scene.schemas import SceneConfig, scene_to_json
from anchor_scene.services.corpus_service import (
    ScenePlan,
    attach_shapes,
    category_presence,
    fit_budget,
    generate_corpus,
    generate_procedural_scene,
    plan_corpus,
    presence_targets,
    sample_room,
    yaw_facing,
)
from anchor_scene.services.ports import ShapeEncoderPort

from tests.conftest import random_latents


class SeededEncoder(ShapeEncoderPort):
    """Latents derived from the solid's style seed."""

    def __init__(self) -> None:
        self.calls = 0

    def encode(self, solid: FurnitureSolid) -> AnchorLatentSet:
        self.calls += 1
        return random_latents(np.random.default_rng(solid.style_seed))


class TestCorpus:
    """Authored scenes."""

    @pytest.fixture
    def scenes(self, scene_config: SceneConfig) -> list[Scene]:
        """Five scenes from a fixed seed."""
        return generate_corpus(scene_config, 5, np.random.default_rng(11))

    def test_scenes_are_valid(self, scenes: list[Scene], scene_config: SceneConfig) -> None:
        """Count bounds hold, everything is inside the room and nothing collides."""
        for scene in scenes:
            scene.validate(scene_config.min_objects, scene_config.max_objects)
            assert scene.inside_fraction() == 1.0
            boxes = [OrientedBox.from_instance(f) for f in scene.furniture]
            assert not colliding_mask(boxes).any()

    def test_objects_rest_on_the_floor(self, scenes: list[Scene]) -> None:
        """Translation height equals the half height."""
        for scene in scenes:
            for item in scene.furniture:
                assert item.translation[1] == item.size[1]
                assert item.shape is None
                assert item.style_seed is not None

    def test_group_members_share_styles(self, scenes: list[Scene]) -> None:
        """All chairs (and all nightstands) of a room come from one style seed."""
        for scene in scenes:
            seeds: dict[str, set[int | None]] = defaultdict(set)
            for item in scene.furniture:
                seeds[item.category].add(item.style_seed)
            for category in ("chair", "nightstand"):
                assert len(seeds.get(category, set())) <= 1

    def test_deterministic(self, scene_config: SceneConfig) -> None:
        """Equal seeds give identical corpora."""
        a = generate_corpus(scene_config, 2, np.random.default_rng(3))
        b = generate_corpus(scene_config, 2, np.random.default_rng(3))
        assert [scene_to_json(s) for s in a] == [scene_to_json(s) for s in b]

    def test_count_must_be_positive(self, scene_config: SceneConfig, rng: np.random.Generator) -> None:
        """Zero scenes is refused."""
        with pytest.raises(ContractViolation):
            generate_corpus(scene_config, 0, rng)

    def test_room_types(self, scene_config: SceneConfig) -> None:
        """Both room types turn up."""
        scenes = generate_corpus(scene_config, 12, np.random.default_rng(5))
        assert {s.room_type for s in scenes} == {"bedroom", "dining_room"}


class TestQuotas:
    """Planned room contents and corpus category shares."""

    def test_plans_follow_quotas(self, scene_config: SceneConfig) -> None:
        """Room types split evenly and each optional category is within one room of its quota."""
        plans = plan_corpus(scene_config, 200, np.random.default_rng(4))
        assert len(plans) == 200
        for room_type, quotas in scene_config.category_quotas.items():
            rooms = [plan for plan in plans if plan.room_type == room_type]
            assert len(rooms) == 100
            for category, share in quotas.items():
                held = sum(category in plan.extras for plan in rooms)
                assert abs(held - share * len(rooms)) < 1.0

    def test_extras_keep_quota_order(self, scene_config: SceneConfig) -> None:
        """Optional categories are placed in the order the quotas list them."""
        for plan in plan_corpus(scene_config, 50, np.random.default_rng(1)):
            order = list(scene_config.category_quotas[plan.room_type])
            assert list(plan.extras) == sorted(plan.extras, key=order.index)

    def test_budget_trims_extras(self) -> None:
        """Trailing extras go first; a bedroom desk counts as two objects."""
        plan = ScenePlan("bedroom", ("table", "wardrobe", "lamp"))
        assert plan.minimum_objects() == 6
        assert fit_budget(plan, 4) == ScenePlan("bedroom", ("table",))
        assert fit_budget(plan, 10) == plan

    def test_plan_is_respected(self, scene_config: SceneConfig) -> None:
        """A dining room planned with a lamp holds exactly its anchor group and the lamp."""
        roomy = scene_config.model_copy(update={"notch_probability": 0.0, "room_half_min": 3.0})
        plan = ScenePlan("dining_room", ("lamp",))
        scene = generate_procedural_scene(roomy, np.random.default_rng(8), plan)
        assert scene.room_type == "dining_room"
        assert {item.category for item in scene.furniture} == {"table", "chair", "lamp"}

    def test_presence_targets(self, scene_config: SceneConfig) -> None:
        """Anchor categories count fully; a bedroom desk brings its chair."""
        targets = presence_targets(scene_config)
        assert targets["bed"] == pytest.approx(0.5)
        assert targets["table"] == pytest.approx(0.5 + 0.5 * 0.3)
        assert targets["chair"] == pytest.approx(targets["table"])
        assert targets["wardrobe"] == pytest.approx(0.5 * 0.6 + 0.5 * 0.2)

    @pytest.mark.slow
    def test_corpus_marginals(self, scene_config: SceneConfig) -> None:
        """Over 1000 rooms every category's share is within 3% of its target."""
        scenes = generate_corpus(scene_config, 1000, np.random.default_rng(0))
        presence = category_presence(scenes)
        targets = presence_targets(scene_config)
        for category in set(presence) | set(targets):
            assert abs(presence.get(category, 0.0) - targets.get(category, 0.0)) <= 0.03, category


class TestShapes:
    """Attaching anchor-latents."""

    def test_attach_shapes(self, scene_config: SceneConfig) -> None:
        """Every instance gets latents from its own style seed."""
        encoder = SeededEncoder()
        (scene,) = generate_corpus(scene_config, 1, np.random.default_rng(2), encoder=encoder)
        assert encoder.calls == len(scene)
        for item in scene.furniture:
            assert item.shape == random_latents(np.random.default_rng(item.style_seed))

    def test_missing_style_seed(self, shaped_scene: Scene) -> None:
        """Instances without a seed cannot be rebuilt."""
        with pytest.raises(ContractViolation, match="style seed"):
            attach_shapes(shaped_scene, SeededEncoder())


class TestRooms:
    """Room outlines and orientation helpers."""

    def test_notched_room(self, scene_config: SceneConfig, rng: np.random.Generator) -> None:
        """A notch removes area from the bounding rectangle."""
        config = scene_config.model_copy(update={"notch_probability": 1.0})
        polygon, floor = sample_room(config, rng)
        span = polygon.max(axis=0) - polygon.min(axis=0)
        assert polygon.shape == (6, 2)
        assert polygon_area(polygon) < span[0] * span[1]
        assert floor.cells.any()

    def test_yaw_facing(self) -> None:
        """Yaw turns local +z toward the requested direction."""
        assert yaw_facing(0.0, 1.0) == 0.0
        assert yaw_facing(1.0, 0.0) == pytest.approx(math.pi / 2)
        yaw = yaw_facing(-1.0, -1.0)
        np.testing.assert_allclose([math.sin(yaw), math.cos(yaw)], [-math.sqrt(0.5), -math.sqrt(0.5)])
