"""Likelihood heads shared by the generators.

Mixture-of-logistics densities for continuous attributes, categorical heads for labels
and codebook ids, and the sinusoidal positional encoding used to embed scalars.
"""

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import special

from anchor_scene.domain.errors import ContractViolation, NumericError
from anchor_scene.numerics import ops
from anchor_scene.numerics.tensor import FloatArray, Tensor, as_tensor

LOG_SCALE_FLOOR = -7.0
_UNIFORM_EPS = 1e-12


@dataclass(frozen=True)
class MixtureParams:
    """K-component logistic mixture per attribute dimension.

    All three tensors share the shape ``(..., K)``; leading axes index independent
    distributions (batch, attribute dimension).
    """

    logits: Tensor
    means: Tensor
    log_scales: Tensor

    def __post_init__(self) -> None:
        shapes = {self.logits.shape, self.means.shape, self.log_scales.shape}
        if len(shapes) != 1:
            raise ContractViolation(f"mixture tensors disagree in shape: {sorted(shapes)}")
        if self.logits.ndim == 0 or self.logits.shape[-1] < 1:
            raise ContractViolation("mixture needs at least one component")

    @property
    def components(self) -> int:
        return self.logits.shape[-1]

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return self.logits.shape[:-1]

    def weights(self) -> FloatArray:
        """softmax(logits) as a plain array."""
        return np.asarray(special.softmax(self.logits.data, axis=-1), dtype=np.float64)

    def scales(self) -> FloatArray:
        return np.exp(np.maximum(self.log_scales.data, LOG_SCALE_FLOOR))

    def mean(self) -> FloatArray:
        """Analytic mean Σ_k w_k μ_k."""
        return np.asarray((self.weights() * self.means.data).sum(axis=-1), dtype=np.float64)

    @classmethod
    def from_raw(cls, raw: Tensor, components: int) -> "MixtureParams":
        """Split a head output of width ``3 * components`` into (logits, means, log-scales)."""
        if raw.shape[-1] != 3 * components:
            raise ContractViolation(f"expected width {3 * components}, got {raw.shape}")
        k = components
        return cls(
            logits=ops.index(raw, (..., slice(0, k))),
            means=ops.index(raw, (..., slice(k, 2 * k))),
            log_scales=ops.index(raw, (..., slice(2 * k, 3 * k))),
        )


@dataclass(frozen=True)
class CategoricalParams:
    """Logits over a fixed label set on the last axis."""

    logits: Tensor

    def __post_init__(self) -> None:
        if self.logits.ndim == 0 or self.logits.shape[-1] == 0:
            raise ContractViolation("categorical head has an empty label set")

    @property
    def labels(self) -> int:
        return self.logits.shape[-1]

    def probabilities(self) -> FloatArray:
        return np.asarray(special.softmax(self.logits.data, axis=-1), dtype=np.float64)


def mol_nll(x: ArrayLike, params: MixtureParams) -> Tensor:
    """Negative log-density of ``x`` under the mixture, one value per distribution.

    ``x`` has the mixture's batch shape. The logistic log-density is written as
    ``-z - log σ - 2 softplus(-z)`` and combined over components with log-sum-exp.
    """
    values = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise NumericError("mol_nll: non-finite observation")
    if values.shape != params.batch_shape:
        raise ContractViolation(f"mol_nll: value shape {values.shape} vs batch {params.batch_shape}")
    log_scale = ops.clip(params.log_scales, low=LOG_SCALE_FLOOR)
    centered = ops.sub(as_tensor(values[..., None]), params.means)
    z = ops.mul(centered, ops.exp(ops.neg(log_scale)))
    log_pdf = ops.sub(ops.sub(ops.neg(z), log_scale), ops.mul(ops.softplus(ops.neg(z)), 2.0))
    joint = ops.add(ops.log_softmax(params.logits), log_pdf)
    return ops.neg(ops.logsumexp(joint, axis=-1))


def categorical_nll(labels: ArrayLike, params: CategoricalParams) -> Tensor:
    """Cross-entropy of integer ``labels`` (batch shape) under the logits."""
    idx = np.asarray(labels, dtype=np.int64)
    batch = params.logits.shape[:-1]
    if idx.shape != batch:
        raise ContractViolation(f"categorical_nll: label shape {idx.shape} vs batch {batch}")
    if idx.size and (idx.min() < 0 or idx.max() >= params.labels):
        raise ContractViolation(f"label outside [0, {params.labels})")
    flat = ops.reshape(ops.log_softmax(params.logits), (-1, params.labels))
    picked = ops.index(flat, (np.arange(idx.size), idx.reshape(-1)))
    return ops.neg(ops.reshape(picked, batch))


def _draw_index(probs: FloatArray, rng: np.random.Generator) -> NDArray[np.int64]:
    """Inverse-CDF draw along the last axis, one uniform per distribution."""
    cdf = np.cumsum(probs, axis=-1)
    u = rng.random(probs.shape[:-1])[..., None] * cdf[..., -1:]
    idx = (cdf <= u).sum(axis=-1)
    return np.minimum(idx, probs.shape[-1] - 1).astype(np.int64)


def mol_sample(
    params: MixtureParams,
    rng: np.random.Generator,
    temperature: float = 1.0,
) -> FloatArray:
    """Draw one value per distribution: a component, then the logistic inverse CDF.

    Temperature divides the component logits and scales the logistic noise; zero picks
    the most likely component and returns its mean.
    """
    if temperature < 0:
        raise ContractViolation(f"temperature must be >= 0, got {temperature}")
    means = params.means.data
    if temperature == 0:
        k = np.argmax(params.logits.data, axis=-1)
        return np.asarray(np.take_along_axis(means, k[..., None], axis=-1)[..., 0], dtype=np.float64)

    k = _draw_index(special.softmax(params.logits.data / temperature, axis=-1), rng)
    mu = np.take_along_axis(means, k[..., None], axis=-1)[..., 0]
    sigma = np.take_along_axis(params.scales(), k[..., None], axis=-1)[..., 0]
    u = np.clip(rng.random(mu.shape), _UNIFORM_EPS, 1.0 - _UNIFORM_EPS)
    return np.asarray(mu + temperature * sigma * (np.log(u) - np.log1p(-u)), dtype=np.float64)


def categorical_sample(
    params: CategoricalParams,
    rng: np.random.Generator,
    temperature: float = 1.0,
    exclude: ArrayLike | None = None,
) -> NDArray[np.int64]:
    """Sample label indices from softmax(logits / temperature).

    ``exclude`` lists labels that are never drawn. Temperature zero is argmax.
    """
    if temperature < 0:
        raise ContractViolation(f"temperature must be >= 0, got {temperature}")
    logits = params.logits.data.copy()
    if exclude is not None:
        banned = np.asarray(exclude, dtype=np.int64)
        logits[..., banned] = -np.inf
        if np.all(np.isinf(logits), axis=-1).any():
            raise ContractViolation("every label is excluded")
    if temperature == 0:
        return np.asarray(np.argmax(logits, axis=-1), dtype=np.int64)
    return _draw_index(special.softmax(logits / temperature, axis=-1), rng)


def pos_enc(v: ArrayLike, dims_per_scalar: int) -> FloatArray:
    """Sinusoidal encoding of each scalar on the last axis.

    Each scalar expands to ``[sin(v ω_0), cos(v ω_0), sin(v ω_1), ...]`` with
    ``ω_i = 10000^(-2i / dims_per_scalar)``; encodings of consecutive scalars are
    concatenated, so the last axis grows by a factor ``dims_per_scalar``.
    """
    if dims_per_scalar <= 0 or dims_per_scalar % 2:
        raise ContractViolation(f"dims_per_scalar must be a positive even number, got {dims_per_scalar}")
    values = np.asarray(v, dtype=np.float64)
    if values.ndim == 0:
        values = values.reshape(1)
    freqs = 1.0 / 10000.0 ** (2.0 * np.arange(dims_per_scalar // 2) / dims_per_scalar)
    angles = values[..., None] * freqs
    pairs = np.stack([np.sin(angles), np.cos(angles)], axis=-1)
    return pairs.reshape(*values.shape[:-1], values.shape[-1] * dims_per_scalar)
