"""Scene and shape transformers of the second stage.

A scene is a set of object tokens (box half + anchor half) plus a floor token and a
learnable query token. The scene transformer carries no positional encoding, so the
feature read at the query slot does not depend on object order. Attributes of the next
object are read one head at a time, and its anchor-latents come from a causal shape
transformer whose coordinate heads fire at increasing depths.
"""

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray

from anchor_scene.domain.errors import ContractViolation
from anchor_scene.domain.models import ATTRIBUTE_WIDTH, R_INDEX, S_SLICE, T_SLICE, sort_order
from anchor_scene.numerics import ops
from anchor_scene.numerics.distributions import (
    CategoricalParams,
    MixtureParams,
    categorical_nll,
    categorical_sample,
    mol_nll,
    mol_sample,
    pos_enc,
)
from anchor_scene.numerics.layers import (
    MLP,
    Conv2d,
    Embedding,
    LayerNorm,
    Linear,
    Module,
    TransformerEncoder,
    TransformerLayer,
)
from anchor_scene.numerics.tensor import FloatArray, Tensor, as_tensor, parameter
from anchor_scene.schemas import GeneratorConfig

logger = logging.getLogger(__name__)

type Mode = Literal["teacher", "sample"]

# Columns of an anchor-latent row fed to the shape transformer.
ANCHOR_FIELDS = ("x", "y", "z", "id")


@dataclass(frozen=True)
class AttributePrediction:
    """Distribution parameters of the four sequential heads, batch-major."""

    category: CategoricalParams
    translation: MixtureParams
    rotation: MixtureParams
    size: MixtureParams

    def nll(self, labels: ArrayLike, rows: ArrayLike, has_box: ArrayLike) -> Tensor:
        """Per-row CE(category) plus the attribute NLLs where ``has_box`` is set."""
        values = np.asarray(rows, dtype=np.float64)
        weight = np.asarray(has_box, dtype=np.float64)
        box = ops.add(
            ops.add(
                ops.sum(mol_nll(values[:, T_SLICE], self.translation), axis=-1),
                ops.sum(mol_nll(values[:, R_INDEX : R_INDEX + 1], self.rotation), axis=-1),
            ),
            ops.sum(mol_nll(values[:, S_SLICE], self.size), axis=-1),
        )
        return ops.add(categorical_nll(labels, self.category), ops.mul(box, weight))


@dataclass(frozen=True)
class ShapePrediction:
    """Per-position parameters of the coordinate and code heads, shape (B, L, ...)."""

    x: MixtureParams
    y: MixtureParams
    z: MixtureParams
    code: CategoricalParams

    def nll(self, values: FloatArray) -> Tensor:
        """Σ over positions of NLL_x + NLL_y + NLL_z + NLL_id, one value per sequence."""
        total = categorical_nll(values[..., 3].astype(np.int64), self.code)
        for axis, params in enumerate((self.x, self.y, self.z)):
            total = ops.add(total, mol_nll(values[..., axis], params))
        return ops.sum(total, axis=-1)


def check_sorted(anchors: FloatArray, codes: NDArray[np.int64]) -> None:
    if not np.array_equal(sort_order(anchors, codes), np.arange(codes.shape[0])):
        raise ContractViolation("anchor-latent prefix is not sorted ascending by (x, y, z, code)")


def _one_hot(labels: NDArray[np.int64], count: int) -> FloatArray:
    out = np.zeros((labels.shape[0], count))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def _mixture(raw: Tensor, dims: int, components: int) -> MixtureParams:
    lead = raw.shape[:-1]
    return MixtureParams.from_raw(ops.reshape(raw, (*lead, dims, 3 * components)), components)


class FloorEncoder(Module):
    """Strided convolution stack with global average pooling."""

    def __init__(self, channels: Sequence[int], out_dim: int, rng: np.random.Generator) -> None:
        widths = [1, *channels]
        self.convs = [Conv2d(a, b, 3, rng, stride=2, padding=1) for a, b in zip(widths[:-1], widths[1:], strict=True)]
        self.proj = Linear(widths[-1], out_dim, rng)

    def __call__(self, masks: FloatArray) -> Tensor:
        h = as_tensor(masks[:, None, :, :])
        for conv in self.convs:
            h = ops.relu(conv(h))
        return self.proj(ops.mean(h, axis=(2, 3)))


class GeneratorModel(Module):
    """Floor, box and anchor encoders, scene transformer, attribute heads, shape transformer."""

    def __init__(
        self,
        config: GeneratorConfig,
        *,
        n_categories: int,
        codebook_size: int,
        n_anchors: int,
        floor_shape: tuple[int, int],
        rng: np.random.Generator,
    ) -> None:
        """
        Build a generator with freshly initialized parameters.

        Args:
            config: Transformer widths, depths and head settings.
            n_categories: Size of the category table, reserved labels included.
            codebook_size: Number of codec codewords (range of anchor ids).
            n_anchors: Anchor-latents per furniture shape (M).
            floor_shape: (H, W) of the floor masks.
            rng: Generator used for every parameter initialization.
        """
        self.config = config
        self.n_categories = n_categories
        self.codebook_size = codebook_size
        self.n_anchors = n_anchors
        self.floor_shape = floor_shape
        half = config.token_dim // 2
        k = config.mixture_components

        self.floor_encoder = FloorEncoder(config.floor_channels, config.token_dim, rng)
        self.category_embedding = Embedding(n_categories, config.category_dim, rng)
        self.box_proj = Linear(config.category_dim + ATTRIBUTE_WIDTH * config.box_pos_dims, half, rng)
        self.anchor_embedding = MLP([4 * config.anchor_pos_dims, config.anchor_hidden, 1], rng)
        self.anchor_proj = Linear(n_anchors, half, rng) if n_anchors != half else None
        self.query = parameter(rng.normal(0.0, 0.02, size=config.token_dim))
        self.scene_transformer = TransformerEncoder(
            config.layers, config.token_dim, config.heads, config.head_dim, config.ff_dim, rng
        )
        self.query_readout = Linear(config.token_dim, config.query_dim, rng)

        q, c, h = config.query_dim, n_categories, config.head_hidden
        self.category_head = MLP([q, h, c], rng)
        self.translation_head = MLP([q + c, h, 3 * 3 * k], rng)
        self.rotation_head = MLP([q + c + 3, h, 3 * k], rng)
        self.size_head = MLP([q + c + 4, h, 3 * 3 * k], rng)

        w = config.shape_width
        self.condition_proj = Linear(q + c + ATTRIBUTE_WIDTH, w, rng)
        self.anchor_field_embeddings = [Linear(config.anchor_pos_dims, w, rng) for _ in ANCHOR_FIELDS]
        self.slot_embedding = parameter(rng.normal(0.0, 0.02, size=(n_anchors, w)))
        self.shape_layers = [
            TransformerLayer(w, config.shape_heads, config.shape_head_dim, config.shape_ff_dim, rng)
            for _ in range(config.shape_layers)
        ]
        self.readout_norms = [LayerNorm(w) for _ in ANCHOR_FIELDS]
        self.coordinate_heads = [MLP([w, w, 3 * k], rng) for _ in range(3)]
        self.code_head = MLP([w, w, codebook_size], rng)

    # ------------------------------------------------------------------
    # Encoders
    # ------------------------------------------------------------------

    def encode_floor(self, masks: ArrayLike) -> Tensor:
        """Floor token(s) of width ``token_dim`` from one (H, W) mask or a (B, H, W) batch."""
        cells = np.asarray(masks, dtype=np.float64)
        single = cells.ndim == 2
        if single:
            cells = cells[None]
        if cells.ndim != 3 or cells.shape[1:] != self.floor_shape:
            raise ContractViolation(f"floor mask must be {self.floor_shape}, got {cells.shape[-2:]}")
        out = self.floor_encoder(cells)
        return ops.reshape(out, (self.config.token_dim,)) if single else out

    def encode_box(self, labels: ArrayLike, rows: ArrayLike) -> Tensor:
        """Box halves (n, token_dim / 2) from category ids and normalized attribute rows."""
        ids = np.asarray(labels, dtype=np.int64).reshape(-1)
        values = np.asarray(rows, dtype=np.float64).reshape(-1, ATTRIBUTE_WIDTH)
        if ids.shape[0] != values.shape[0]:
            raise ContractViolation("one attribute row per category id required")
        if ids.size and (ids.min() < 0 or ids.max() >= self.n_categories):
            raise ContractViolation(f"category id outside [0, {self.n_categories})")
        features = ops.concat(
            [self.category_embedding(ids), as_tensor(pos_enc(values, self.config.box_pos_dims))], axis=-1
        )
        return self.box_proj(features)

    def anchor_features(self, anchors: ArrayLike, codes: ArrayLike) -> Tensor:
        """g ∈ R^M per object: one scalar per anchor-latent, shape (n, M)."""
        points = np.asarray(anchors, dtype=np.float64)
        ids = np.asarray(codes, dtype=np.int64)
        if points.ndim == 2:
            points, ids = points[None], ids[None]
        if points.shape[1:] != (self.n_anchors, 3) or ids.shape != points.shape[:2]:
            raise ContractViolation(f"expected (n, {self.n_anchors}, 3) anchors, got {points.shape}")
        if ids.size and (ids.min() < 0 or ids.max() >= self.codebook_size):
            raise ContractViolation(f"anchor code outside [0, {self.codebook_size})")
        rows = np.concatenate([points, ids[..., None].astype(np.float64)], axis=-1)
        scores = self.anchor_embedding(pos_enc(rows, self.config.anchor_pos_dims))
        return ops.reshape(scores, points.shape[:2])

    def encode_anchors(self, anchors: ArrayLike, codes: ArrayLike) -> Tensor:
        """Anchor halves (n, token_dim / 2)."""
        g = self.anchor_features(anchors, codes)
        return self.anchor_proj(g) if self.anchor_proj is not None else g

    def object_tokens(self, labels: ArrayLike, rows: ArrayLike, anchors: ArrayLike, codes: ArrayLike) -> Tensor:
        return ops.concat([self.encode_box(labels, rows), self.encode_anchors(anchors, codes)], axis=-1)

    # ------------------------------------------------------------------
    # Scene transformer and attribute heads
    # ------------------------------------------------------------------

    def scene_forward(self, floor: Tensor, contexts: Sequence[Tensor | None]) -> Tensor:
        """q̂ (B, query_dim) for B scenes given floor tokens (B, D) and per-scene context tokens.

        Shorter contexts are padded; padded slots are masked out of every attention row.
        """
        d = self.config.token_dim
        batch = len(contexts)
        if floor.shape != (batch, d):
            raise ContractViolation(f"floor tokens must be ({batch}, {d}), got {floor.shape}")
        lengths = [0 if c is None else c.shape[0] for c in contexts]
        longest = max(lengths, default=0)

        pool = [c for c in contexts if c is not None and c.shape[0] > 0]
        pad_row = sum(lengths)
        flat = ops.concat([*pool, as_tensor(np.zeros((1, d)))], axis=0)
        gather = np.full((batch, longest), pad_row, dtype=np.int64)
        offset = 0
        for b, n in enumerate(lengths):
            gather[b, :n] = np.arange(offset, offset + n)
            offset += n

        parts = [ops.reshape(floor, (batch, 1, d))]
        if longest:
            parts.append(ops.index(flat, gather))
        parts.append(ops.broadcast_to(ops.reshape(self.query, (1, 1, d)), (batch, 1, d)))
        tokens = ops.concat(parts, axis=1)

        padding = np.zeros((batch, longest + 2), dtype=bool)
        for b, n in enumerate(lengths):
            padding[b, 1 + n : 1 + longest] = True
        hidden = self.scene_transformer(tokens, key_padding=padding)
        return self.query_readout(ops.index(hidden, (slice(None), -1)))

    def extract_attributes(
        self,
        q_hat: Tensor,
        mode: Mode,
        *,
        labels: ArrayLike | None = None,
        rows: ArrayLike | None = None,
        rng: np.random.Generator | None = None,
        temperature: float = 1.0,
        exclude: Sequence[int] = (),
    ) -> tuple[NDArray[np.int64], FloatArray, AttributePrediction]:
        """Category, translation, rotation and size heads, each conditioned on the previous ones.

        Teacher mode conditions on the given ``labels``/``rows``; sample mode conditions on
        the drawn values, which are returned as drawn.
        """
        batch = q_hat.shape[0]
        k = self.config.mixture_components
        if mode == "teacher":
            if labels is None or rows is None:
                raise ContractViolation("teacher mode needs labels and attribute rows")
            chosen = np.asarray(labels, dtype=np.int64).reshape(batch)
            values = np.asarray(rows, dtype=np.float64).reshape(batch, ATTRIBUTE_WIDTH)
        elif rng is None:
            raise ContractViolation("sample mode needs an rng")
        else:
            chosen = np.zeros(batch, dtype=np.int64)
            values = np.zeros((batch, ATTRIBUTE_WIDTH))

        category = CategoricalParams(self.category_head(q_hat))
        if mode == "sample":
            assert rng is not None
            chosen = categorical_sample(category, rng, temperature, exclude=list(exclude))
        onehot = _one_hot(chosen, self.n_categories)

        translation = _mixture(self.translation_head(ops.concat([q_hat, as_tensor(onehot)], axis=-1)), 3, k)
        if mode == "sample":
            assert rng is not None
            values[:, T_SLICE] = mol_sample(translation, rng, temperature)

        cond = np.concatenate([onehot, values[:, T_SLICE]], axis=-1)
        rotation = _mixture(self.rotation_head(ops.concat([q_hat, as_tensor(cond)], axis=-1)), 1, k)
        if mode == "sample":
            assert rng is not None
            values[:, R_INDEX] = mol_sample(rotation, rng, temperature)[:, 0]

        cond = np.concatenate([onehot, values[:, T_SLICE], values[:, R_INDEX : R_INDEX + 1]], axis=-1)
        size = _mixture(self.size_head(ops.concat([q_hat, as_tensor(cond)], axis=-1)), 3, k)
        if mode == "sample":
            assert rng is not None
            values[:, S_SLICE] = mol_sample(size, rng, temperature)

        return chosen, values, AttributePrediction(category, translation, rotation, size)

    def shape_condition(self, q_hat: Tensor, labels: ArrayLike, rows: ArrayLike) -> Tensor:
        """C_shape = (q̂, one-hot ĉ, t̂, r̂, ŝ) projected to the shape transformer width."""
        ids = np.asarray(labels, dtype=np.int64).reshape(-1)
        values = np.asarray(rows, dtype=np.float64).reshape(-1, ATTRIBUTE_WIDTH)
        cond = np.concatenate([_one_hot(ids, self.n_categories), values], axis=-1)
        return self.condition_proj(ops.concat([q_hat, as_tensor(cond)], axis=-1))

    # ------------------------------------------------------------------
    # Shape transformer
    # ------------------------------------------------------------------

    def _embed_field(self, field: int, values: FloatArray) -> Tensor:
        return self.anchor_field_embeddings[field](pos_enc(values[..., None], self.config.anchor_pos_dims))

    def _shape_pass(
        self,
        condition: Tensor,
        previous: FloatArray,
        choose: Callable[[int, MixtureParams | CategoricalParams], FloatArray],
    ) -> ShapePrediction:
        """Causal pass over [C_shape, previous anchor-latents]; L = len(previous) + 1.

        After each coordinate readout, ``choose`` supplies the (B, L) values that are
        embedded and added to the residual stream before the next layers run.
        """
        batch, length = condition.shape[0], previous.shape[1] + 1
        w = self.config.shape_width
        k = self.config.mixture_components
        if length > self.n_anchors:
            raise ContractViolation(f"shape sequence longer than {self.n_anchors} anchors")

        start = ops.reshape(condition, (batch, 1, w))
        if previous.shape[1]:
            embedded = self._embed_field(0, previous[..., 0])
            for field in range(1, len(ANCHOR_FIELDS)):
                embedded = ops.add(embedded, self._embed_field(field, previous[..., field]))
            h = ops.concat([start, embedded], axis=1)
        else:
            h = start
        h = ops.add(h, ops.index(self.slot_embedding, slice(0, length)))

        readouts: list[MixtureParams | CategoricalParams] = []
        depth = 0
        for field, target_depth in enumerate(self.config.readout_depths):
            while depth < target_depth:
                h = self.shape_layers[depth](h, causal=True)
                depth += 1
            features = self.readout_norms[field](h)
            if field < 3:
                params: MixtureParams | CategoricalParams = _mixture(self.coordinate_heads[field](features), 1, k)
            else:
                params = CategoricalParams(self.code_head(features))
            readouts.append(params)
            if field < 3:
                h = ops.add(h, self._embed_field(field, choose(field, params)))

        def squeeze(p: MixtureParams) -> MixtureParams:
            shape = (batch, length, k)
            return MixtureParams(
                ops.reshape(p.logits, shape), ops.reshape(p.means, shape), ops.reshape(p.log_scales, shape)
            )

        x, y, z, code = readouts
        assert isinstance(x, MixtureParams) and isinstance(y, MixtureParams) and isinstance(z, MixtureParams)
        assert isinstance(code, CategoricalParams)
        return ShapePrediction(squeeze(x), squeeze(y), squeeze(z), code)

    def shape_forward(self, condition: Tensor, anchors: ArrayLike, codes: ArrayLike) -> ShapePrediction:
        """Teacher-forced parameters for all M positions of sorted target anchor-latents.

        ``anchors`` is (B, L, 3) and ``codes`` (B, L); position i is predicted from the
        condition and the ground-truth anchor-latents before it.
        """
        points = np.asarray(anchors, dtype=np.float64)
        ids = np.asarray(codes, dtype=np.int64)
        if points.ndim == 2:
            points, ids = points[None], ids[None]
        for b in range(points.shape[0]):
            check_sorted(points[b], ids[b])
        targets = np.concatenate([points, ids[..., None].astype(np.float64)], axis=-1)

        def teacher(field: int, _: MixtureParams | CategoricalParams) -> FloatArray:
            return targets[..., field]

        return self._shape_pass(condition, targets[:, :-1], teacher)

    def sample_shape(
        self,
        condition: Tensor,
        rng: np.random.Generator,
        temperature: float = 1.0,
    ) -> tuple[FloatArray, NDArray[np.int64]]:
        """Draw M anchor-latents for one object one position at a time (no key cache).

        Returns unsorted (M, 3) anchors and (M,) codes in generation order.
        """
        if condition.shape[0] != 1:
            raise ContractViolation("sample_shape draws one object at a time")
        drawn = np.zeros((1, 0, len(ANCHOR_FIELDS)))
        for _ in range(self.n_anchors):
            current = np.zeros(len(ANCHOR_FIELDS))

            def sample(field: int, params: MixtureParams | CategoricalParams) -> FloatArray:
                assert isinstance(params, MixtureParams)
                last = MixtureParams(
                    ops.index(params.logits, (0, -1)),
                    ops.index(params.means, (0, -1)),
                    ops.index(params.log_scales, (0, -1)),
                )
                current[field] = float(mol_sample(last, rng, temperature)[0])
                return np.concatenate([drawn[..., field], [[current[field]]]], axis=1)

            prediction = self._shape_pass(condition, drawn, sample)
            last_code = CategoricalParams(ops.index(prediction.code.logits, (slice(0, 1), -1)))
            current[3] = float(categorical_sample(last_code, rng, temperature)[0])
            drawn = np.concatenate([drawn, current[None, None, :]], axis=1)
        return drawn[0, :, :3].copy(), drawn[0, :, 3].astype(np.int64)
