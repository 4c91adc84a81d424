"""Shared fixtures: tiny model configs, floors, scenes and a gradient checker."""

from collections.abc import Callable, Sequence

import numpy as np
import pytest

from anchor_scene.domain.models import (
    AnchorLatentSet,
    AttributeStats,
    CategoryTable,
    FloorPlanMask,
    FurnitureInstance,
    Scene,
)
from anchor_scene.domain.shapes import FloatArray, OccupancyGrid
from anchor_scene.geometry.floor import rasterize_floor, rectangle_polygon
from anchor_scene.networks.generator import GeneratorModel
from anchor_scene.numerics import ops
from anchor_scene.numerics.tensor import Tape, Tensor, parameter
from anchor_scene.schemas import CodecConfig, GeneratorConfig, SceneConfig
from anchor_scene.services.generator_service import EncodedScene, build_generator, encode_scene
from anchor_scene.services.ports import ShapeDecoderPort

M = 8
D = 16
FLOOR = 16

TINY_CODEC = {
    "n_points": 128,
    "n_anchors": M,
    "k": 8,
    "codebook_size": D,
    "code_dim": 8,
    "patch_hidden": 16,
    "heads": 2,
    "encoder_layers": 1,
    "decoder_layers": 1,
    "pos_dims": 4,
    "interp_neighbors": 4,
    "head_hidden": 16,
    "queries": 64,
    "shapes": 4,
    "epochs": 1,
    "grid_resolution": 8,
}

TINY_GENERATOR = {
    "token_dim": 16,
    "query_dim": 8,
    "layers": 1,
    "heads": 2,
    "head_dim": 4,
    "ff_dim": 16,
    "floor_channels": [2, 4],
    "box_pos_dims": 2,
    "category_dim": 4,
    "anchor_pos_dims": 2,
    "anchor_hidden": 4,
    "head_hidden": 16,
    "mixture_components": 2,
    "shape_width": 8,
    "shape_layers": 4,
    "shape_heads": 2,
    "shape_head_dim": 4,
    "shape_ff_dim": 16,
    "readout_depths": [1, 2, 3, 4],
    "max_objects": 4,
}

TINY_SCENE = {"grid": 32}


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator."""
    return np.random.default_rng(1234)


@pytest.fixture
def codec_config() -> CodecConfig:
    """Codec small enough for unit tests."""
    return CodecConfig.model_validate(TINY_CODEC)


@pytest.fixture
def generator_config() -> GeneratorConfig:
    """Generator small enough for unit tests."""
    return GeneratorConfig.model_validate(TINY_GENERATOR)


@pytest.fixture
def scene_config() -> SceneConfig:
    """Corpus settings with a coarse floor grid."""
    return SceneConfig.model_validate(TINY_SCENE)


@pytest.fixture
def floor() -> FloorPlanMask:
    """4 m x 4 m room on a 16 x 16 grid spanning 8 m."""
    return rasterize_floor(rectangle_polygon(2.0, 2.0), FLOOR, FLOOR, 4.0)


@pytest.fixture
def stats() -> AttributeStats:
    """Attribute ranges wide enough for every fixture scene."""
    return AttributeStats(t_min=(-3.0, 0.0, -3.0), t_max=(3.0, 1.2, 3.0), s_min=(0.1, 0.1, 0.1), s_max=(1.2, 1.2, 1.2))


def random_latents(rng: np.random.Generator, m: int = M, codebook: int = D) -> AnchorLatentSet:
    return AnchorLatentSet.sorted(rng.uniform(-0.9, 0.9, size=(m, 3)), rng.integers(0, codebook, size=m))


def furniture(
    category: str,
    x: float,
    z: float,
    *,
    size: tuple[float, float, float] = (0.3, 0.4, 0.3),
    yaw: float = 0.0,
    shape: AnchorLatentSet | None = None,
) -> FurnitureInstance:
    return FurnitureInstance(category=category, translation=(x, size[1], z), size=size, yaw=yaw, shape=shape)


@pytest.fixture
def shaped_scene(floor: FloorPlanMask, rng: np.random.Generator) -> Scene:
    """Three non-overlapping objects that all carry anchor-latents."""
    items = [
        furniture("bed", -1.0, -1.0, size=(0.6, 0.3, 0.9), shape=random_latents(rng)),
        furniture("chair", 1.0, 1.0, shape=random_latents(rng)),
        furniture("chair", 1.0, -0.5, shape=random_latents(rng)),
    ]
    return Scene(floor=floor, furniture=tuple(items))


@pytest.fixture
def model(generator_config: GeneratorConfig, rng: np.random.Generator) -> GeneratorModel:
    """Untrained tiny generator over the default label table."""
    return build_generator(
        generator_config, CategoryTable(), codebook_size=D, n_anchors=M, floor_shape=(FLOOR, FLOOR), rng=rng
    )


@pytest.fixture
def encoded(shaped_scene: Scene, stats: AttributeStats) -> EncodedScene:
    """The three-object fixture scene as arrays."""
    return encode_scene(shaped_scene, CategoryTable(), stats)


class AnchorCloudDecoder(ShapeDecoderPort):
    """Decoder stand-in whose boundary cloud is the anchor set itself."""

    def decode_grid(self, latents: AnchorLatentSet, resolution: int) -> OccupancyGrid:
        return OccupancyGrid(np.full((resolution, resolution, resolution), 0.75))

    def boundary_cloud(self, latents: AnchorLatentSet) -> FloatArray:
        return np.asarray(latents.anchors)


def numeric_gradient(f: Callable[[], float], x: FloatArray, eps: float = 1e-6) -> FloatArray:
    """Central differences of ``f`` with respect to the array ``x`` (modified in place)."""
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        original = x[i]
        x[i] = original + eps
        up = f()
        x[i] = original - eps
        down = f()
        x[i] = original
        grad[i] = (up - down) / (2 * eps)
    return grad


def assert_gradients(
    fn: Callable[..., Tensor],
    inputs: Sequence[FloatArray],
    rng: np.random.Generator,
    rtol: float = 1e-4,
    atol: float = 1e-6,
) -> None:
    """Tape gradients of sum(w * fn(*inputs)) must match central differences."""
    params = [parameter(np.array(x, dtype=np.float64)) for x in inputs]
    weights = rng.normal(size=fn(*params).shape)

    def scalar() -> float:
        return float(np.sum(fn(*params).data * weights))

    with Tape() as tape:
        loss = ops.sum(ops.mul(fn(*params), weights))
        tape.backward(loss)
    analytic = [p.grad.copy() if p.grad is not None else np.zeros_like(p.data) for p in params]
    for p, grad in zip(params, analytic, strict=True):
        np.testing.assert_allclose(grad, numeric_gradient(scalar, p.data), rtol=rtol, atol=atol)
