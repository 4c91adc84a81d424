"""Vector-quantized anchor-latent codec for furniture occupancy fields.

The encoder picks M anchors by farthest point sampling, summarizes each anchor's kNN
patch with a shared point MLP and max-pooling, and mixes the anchor tokens with
self-attention. Latents snap to the nearest codeword of an EMA codebook. The decoder
attends over the quantized anchor tokens and answers occupancy queries from an
inverse-squared-distance blend of the nearest anchor tokens.
"""

import logging

import numpy as np
from numpy.typing import NDArray
from scipy.spatial.distance import cdist

from anchor_scene.domain.errors import ContractViolation
from anchor_scene.domain.models import AnchorLatentSet
from anchor_scene.domain.shapes import FloatArray, PatchSet, validate_cloud
from anchor_scene.geometry.sampling import fps, knn_patches
from anchor_scene.numerics import ops
from anchor_scene.numerics.distributions import pos_enc
from anchor_scene.numerics.layers import MLP, Linear, Module, TransformerEncoder
from anchor_scene.numerics.tensor import Tensor, as_tensor
from anchor_scene.schemas import CodecConfig

logger = logging.getLogger(__name__)

_INTERP_EPS = 1e-8


class Codebook(Module):
    """Codewords learned by exponential moving averages instead of gradients.

    ``cluster_size`` starts at M/|D| per entry so the sizes sum to the number of latents
    per update; Laplace smoothing keeps every size strictly positive.
    """

    buffer_names = ("embeddings", "cluster_size", "cluster_sum", "unused_steps")

    def __init__(
        self,
        size: int,
        dim: int,
        rng: np.random.Generator,
        latents_per_update: int,
        decay: float = 0.99,
        eps: float = 1e-5,
        dead_code_steps: int = 50,
    ) -> None:
        self.size = size
        self.dim = dim
        self.decay = decay
        self.eps = eps
        self.dead_code_steps = dead_code_steps
        self.embeddings: FloatArray = rng.normal(0.0, 1.0, size=(size, dim))
        self.cluster_size: FloatArray = np.full(size, latents_per_update / size)
        self.cluster_sum: FloatArray = self.embeddings * self.cluster_size[:, None]
        self.unused_steps: FloatArray = np.zeros(size)
        self._usage = np.zeros(size, dtype=np.int64)

    def nearest(self, z: FloatArray) -> NDArray[np.int64]:
        """Index of the closest codeword per row; ties go to the lowest index."""
        if z.ndim != 2 or z.shape[1] != self.dim:
            raise ContractViolation(f"latents must be (n, {self.dim}), got {z.shape}")
        return np.argmin(cdist(z, self.embeddings, "sqeuclidean"), axis=1).astype(np.int64)

    def lookup(self, ids: NDArray[np.int64]) -> FloatArray:
        idx = np.asarray(ids, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= self.size):
            raise ContractViolation(f"code outside [0, {self.size})")
        return np.asarray(self.embeddings[idx], dtype=np.float64)

    def quantize(self, z: Tensor) -> tuple[Tensor, NDArray[np.int64]]:
        """Nearest codewords forward, identity gradient backward."""
        ids = self.nearest(z.data)
        return ops.straight_through(z, self.embeddings[ids]), ids

    def update(self, z: FloatArray, ids: NDArray[np.int64], rng: np.random.Generator) -> None:
        """One EMA step on the assignments of a batch, then reseed long-unused codes."""
        counts = np.bincount(ids, minlength=self.size).astype(np.float64)
        self._usage += counts.astype(np.int64)
        size = self.decay * self.cluster_size + (1.0 - self.decay) * counts
        total = size.sum()
        size = (size + self.eps) / (total + self.size * self.eps) * total
        onehot = np.zeros((ids.shape[0], self.size))
        onehot[np.arange(ids.shape[0]), ids] = 1.0
        self.cluster_sum = self.decay * self.cluster_sum + (1.0 - self.decay) * (onehot.T @ z)
        self.cluster_size = size
        self.embeddings = self.cluster_sum / size[:, None]

        self.unused_steps = np.where(counts > 0, 0.0, self.unused_steps + 1.0)
        dead = np.nonzero(self.unused_steps >= self.dead_code_steps)[0]
        if dead.size:
            rows = rng.integers(0, z.shape[0], size=dead.size)
            self.embeddings[dead] = z[rows]
            self.cluster_sum[dead] = z[rows] * self.cluster_size[dead, None]
            self.unused_steps[dead] = 0.0
            logger.debug(f"reseeded {dead.size} dead codewords")

    def usage_fraction(self) -> float:
        """Share of codewords selected at least once since the last reset."""
        return float((self._usage > 0).mean())

    def reset_usage(self) -> None:
        self._usage[:] = 0


class CodecModel(Module):
    """Patch encoder, EMA codebook and attention decoder with an occupancy head."""

    def __init__(self, config: CodecConfig, rng: np.random.Generator) -> None:
        """
        Initialize the codec.

        Args:
            config: Codec hyperparameters (widths, depths, anchors, codebook).
            rng: Generator used for every parameter initialization.
        """
        self.config = config
        c = config.code_dim
        pos_width = 3 * config.pos_dims
        head_dim = c // config.heads
        self.patch_mlp = MLP([3, config.patch_hidden, config.patch_hidden, c], rng)
        self.anchor_proj = Linear(pos_width, c, rng)
        self.encoder = TransformerEncoder(config.encoder_layers, c, config.heads, head_dim, 2 * c, rng)
        self.codebook = Codebook(
            config.codebook_size,
            c,
            rng,
            latents_per_update=config.n_anchors,
            decay=config.ema_decay,
            eps=config.ema_eps,
            dead_code_steps=config.dead_code_steps,
        )
        self.token_proj = Linear(pos_width, c, rng)
        self.decoder = TransformerEncoder(config.decoder_layers, c, config.heads, head_dim, 2 * c, rng)
        self.query_proj = Linear(pos_width, c, rng)
        self.occupancy_head = MLP([c, config.head_hidden, config.head_hidden, 1], rng)

    def patchify(self, cloud: FloatArray) -> PatchSet:
        points = validate_cloud(cloud, "cloud")
        needed = max(self.config.n_points, self.config.k)
        if points.shape[0] < needed:
            raise ContractViolation(f"cloud has {points.shape[0]} points, the codec needs {needed}")
        anchors = points[fps(points, self.config.n_anchors)]
        return knn_patches(points, anchors, self.config.k)

    def encode(self, cloud: FloatArray, anchor_pos_enc: bool | None = None) -> tuple[FloatArray, Tensor]:
        """Anchors (M, 3) and raw latents z (M, C)."""
        use_pos = self.config.anchor_pos_enc if anchor_pos_enc is None else anchor_pos_enc
        patches = self.patchify(cloud)
        m = len(patches)
        features = self.patch_mlp(as_tensor(patches.patches))
        pooled = ops.max(features, axis=1)
        if use_pos:
            pooled = ops.add(pooled, self.anchor_proj(pos_enc(patches.anchors, self.config.pos_dims)))
        h = self.encoder(ops.reshape(pooled, (1, m, self.config.code_dim)))
        return patches.anchors, ops.reshape(h, (m, self.config.code_dim))

    def quantize(self, z: Tensor) -> tuple[Tensor, NDArray[np.int64]]:
        return self.codebook.quantize(z)

    def interpolation_weights(self, anchors: FloatArray, queries: FloatArray) -> FloatArray:
        """Dense (Q, M) blend weights over each query's nearest anchors."""
        d2 = cdist(queries, anchors, "sqeuclidean")
        k = min(self.config.interp_neighbors, anchors.shape[0])
        nearest = np.argsort(d2, axis=1, kind="stable")[:, :k]
        rows = np.arange(queries.shape[0])[:, None]
        inv = 1.0 / (d2[rows, nearest] + _INTERP_EPS)
        weights = np.zeros_like(d2)
        weights[rows, nearest] = inv / inv.sum(axis=1, keepdims=True)
        return weights

    def decoder_tokens(self, anchors: FloatArray, latents: Tensor) -> Tensor:
        """Anchor tokens (M, C) after the decoder transformer."""
        m, c = anchors.shape[0], self.config.code_dim
        tokens = ops.add(latents, self.token_proj(pos_enc(anchors, self.config.pos_dims)))
        return ops.reshape(self.decoder(ops.reshape(tokens, (1, m, c))), (m, c))

    def occupancy(self, anchors: FloatArray, tokens: Tensor, queries: FloatArray) -> Tensor:
        """Occupancy probabilities (Q,) from decoded anchor tokens."""
        q = validate_cloud(queries, "queries")
        blended = ops.matmul(as_tensor(self.interpolation_weights(anchors, q)), tokens)
        features = ops.add(blended, self.query_proj(pos_enc(q, self.config.pos_dims)))
        logits = self.occupancy_head(features)
        return ops.sigmoid(ops.reshape(logits, (q.shape[0],)))

    def decode_tokens(self, anchors: FloatArray, latents: Tensor, queries: FloatArray) -> Tensor:
        """Occupancy probabilities (Q,) from anchor positions and (quantized) latents."""
        return self.occupancy(anchors, self.decoder_tokens(anchors, latents), queries)

    def decode(self, latents: AnchorLatentSet, queries: FloatArray) -> Tensor:
        return self.decode_tokens(
            np.asarray(latents.anchors), as_tensor(self.codebook.lookup(latents.codes)), queries
        )

    def encode_latents(self, cloud: FloatArray) -> AnchorLatentSet:
        """Encode and quantize a cloud into a sorted anchor-latent set (no EMA update)."""
        anchors, z = self.encode(cloud)
        ids = self.codebook.nearest(z.data)
        return AnchorLatentSet.sorted(anchors, ids)
