"""Parameterized building blocks on top of the operator set."""

import math
from collections.abc import Iterator, Mapping, Sequence

import numpy as np
from numpy.typing import NDArray

from anchor_scene.domain.errors import ContractViolation
from anchor_scene.numerics import ops
from anchor_scene.numerics.tensor import FloatArray, Tensor, TensorLike, as_tensor, parameter


class Module:
    """Container of trainable tensors and sub-modules.

    Parameters are discovered by walking instance attributes in definition order, so the
    naming (and therefore checkpoint layout) is stable across runs.
    """

    buffer_names: tuple[str, ...] = ()

    def named_parameters(self, prefix: str = "") -> list[tuple[str, Tensor]]:
        found: list[tuple[str, Tensor]] = []
        for name, value in vars(self).items():
            full = f"{prefix}{name}"
            if isinstance(value, Tensor):
                if value.requires_grad:
                    found.append((full, value))
            elif isinstance(value, Module):
                found.extend(value.named_parameters(f"{full}."))
            elif isinstance(value, list | tuple):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        found.extend(item.named_parameters(f"{full}.{i}."))
                    elif isinstance(item, Tensor) and item.requires_grad:
                        found.append((f"{full}.{i}", item))
        return found

    def named_buffers(self, prefix: str = "") -> list[tuple[str, FloatArray]]:
        found: list[tuple[str, FloatArray]] = [
            (f"{prefix}{name}", getattr(self, name)) for name in self.buffer_names
        ]
        for name, value in vars(self).items():
            if isinstance(value, Module):
                found.extend(value.named_buffers(f"{prefix}{name}."))
            elif isinstance(value, list | tuple):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        found.extend(item.named_buffers(f"{prefix}{name}.{i}."))
        return found

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def state_dict(self) -> dict[str, FloatArray]:
        state = {name: p.data.copy() for name, p in self.named_parameters()}
        for name, buf in self.named_buffers():
            state[f"buffer:{name}"] = np.asarray(buf, dtype=np.float64).copy()
        return state

    def load_state_dict(self, state: Mapping[str, FloatArray]) -> None:
        params = dict(self.named_parameters())
        expected = set(params) | {f"buffer:{name}" for name, _ in self.named_buffers()}
        missing = expected - set(state)
        if missing:
            raise ContractViolation(f"checkpoint lacks tensors: {sorted(missing)[:5]}")
        for name, p in params.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != p.data.shape:
                raise ContractViolation(f"{name}: checkpoint shape {value.shape} vs model {p.shape}")
            p.data[...] = value
        for name, buf in self.named_buffers():
            value = np.asarray(state[f"buffer:{name}"])
            if value.shape != buf.shape:
                raise ContractViolation(f"{name}: checkpoint shape {value.shape} vs buffer {buf.shape}")
            buf[...] = value

    def parameter_count(self) -> int:
        return sum(p.size for p in self.parameters())


class Linear(Module):
    """Affine map over the last axis."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator, bias: bool = True) -> None:
        bound = 1.0 / math.sqrt(in_dim)
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.weight = parameter(rng.uniform(-bound, bound, size=(in_dim, out_dim)))
        self.bias = parameter(rng.uniform(-bound, bound, size=(out_dim,))) if bias else None

    def __call__(self, x: TensorLike) -> Tensor:
        inp = as_tensor(x)
        if inp.shape[-1] != self.in_dim:
            raise ContractViolation(f"Linear expects width {self.in_dim}, got {inp.shape}")
        if inp.ndim == 1:
            out = ops.reshape(ops.matmul(ops.reshape(inp, (1, self.in_dim)), self.weight), (self.out_dim,))
        else:
            out = ops.matmul(inp, self.weight)
        return ops.add(out, self.bias) if self.bias is not None else out


class MLP(Module):
    """Linear layers with ReLU between them (none after the last)."""

    def __init__(self, dims: Sequence[int], rng: np.random.Generator) -> None:
        if len(dims) < 2:
            raise ContractViolation("MLP needs at least an input and an output width")
        self.layers = [Linear(a, b, rng) for a, b in zip(dims[:-1], dims[1:], strict=True)]

    def __call__(self, x: TensorLike) -> Tensor:
        out = as_tensor(x)
        for i, layer in enumerate(self.layers):
            out = layer(out)
            if i < len(self.layers) - 1:
                out = ops.relu(out)
        return out


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-5) -> None:
        self.eps = eps
        self.gamma = parameter(np.ones(dim))
        self.beta = parameter(np.zeros(dim))

    def __call__(self, x: TensorLike) -> Tensor:
        return ops.layer_norm(x, self.gamma, self.beta, self.eps)


class Embedding(Module):
    """Lookup table of learned rows."""

    def __init__(self, count: int, dim: int, rng: np.random.Generator, scale: float = 1.0) -> None:
        self.table = parameter(rng.normal(0.0, scale, size=(count, dim)))

    def __call__(self, ids: NDArray[np.integer] | Sequence[int]) -> Tensor:
        return ops.embedding(self.table, ids)


class Conv2d(Module):
    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel: int,
        rng: np.random.Generator,
        stride: int = 1,
        padding: int = 0,
    ) -> None:
        bound = 1.0 / math.sqrt(in_channels * kernel * kernel)
        self.stride = stride
        self.padding = padding
        self.weight = parameter(rng.uniform(-bound, bound, size=(out_channels, in_channels, kernel, kernel)))
        self.bias = parameter(rng.uniform(-bound, bound, size=(out_channels,)))

    def __call__(self, x: TensorLike) -> Tensor:
        return ops.conv2d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)


def causal_mask(length: int) -> NDArray[np.bool_]:
    """True above the diagonal: position i may not attend to j > i."""
    return np.triu(np.ones((length, length), dtype=bool), k=1)


class MultiHeadAttention(Module):
    """Scaled dot-product self-attention over (B, n, D) sequences."""

    def __init__(self, dim: int, heads: int, head_dim: int, rng: np.random.Generator) -> None:
        self.heads = heads
        self.head_dim = head_dim
        inner = heads * head_dim
        self.query = Linear(dim, inner, rng)
        self.key = Linear(dim, inner, rng)
        self.value = Linear(dim, inner, rng)
        self.out = Linear(inner, dim, rng)

    def _split(self, x: Tensor) -> Tensor:
        batch, length = x.shape[0], x.shape[1]
        return ops.transpose(ops.reshape(x, (batch, length, self.heads, self.head_dim)), (0, 2, 1, 3))

    def __call__(
        self,
        x: Tensor,
        key_padding: NDArray[np.bool_] | None = None,
        causal: bool = False,
    ) -> Tensor:
        if x.ndim != 3:
            raise ContractViolation(f"attention expects (batch, tokens, width), got {x.shape}")
        batch, length = x.shape[0], x.shape[1]
        q = self._split(self.query(x))
        k = self._split(self.key(x))
        v = self._split(self.value(x))
        scores = ops.mul(ops.matmul(q, ops.swap_last(k)), 1.0 / math.sqrt(self.head_dim))

        mask: NDArray[np.bool_] | None = None
        if key_padding is not None:
            padding = np.asarray(key_padding, dtype=bool).reshape(batch, 1, 1, length)
            mask = np.broadcast_to(padding, (batch, self.heads, length, length))
        if causal:
            future = np.broadcast_to(causal_mask(length), (batch, self.heads, length, length))
            mask = future if mask is None else (mask | future)
        weights = ops.softmax(scores, mask=None if mask is None else np.array(mask))

        context = ops.transpose(ops.matmul(weights, v), (0, 2, 1, 3))
        merged = ops.reshape(context, (batch, length, self.heads * self.head_dim))
        return self.out(merged)


class TransformerLayer(Module):
    """Pre-norm self-attention block with a ReLU feed-forward."""

    def __init__(self, dim: int, heads: int, head_dim: int, ff_dim: int, rng: np.random.Generator) -> None:
        self.norm1 = LayerNorm(dim)
        self.attention = MultiHeadAttention(dim, heads, head_dim, rng)
        self.norm2 = LayerNorm(dim)
        self.feed_forward = MLP([dim, ff_dim, dim], rng)

    def __call__(
        self,
        x: Tensor,
        key_padding: NDArray[np.bool_] | None = None,
        causal: bool = False,
    ) -> Tensor:
        h = ops.add(x, self.attention(self.norm1(x), key_padding=key_padding, causal=causal))
        return ops.add(h, self.feed_forward(self.norm2(h)))


class TransformerEncoder(Module):
    """Stack of transformer layers followed by a final layer norm."""

    def __init__(
        self,
        depth: int,
        dim: int,
        heads: int,
        head_dim: int,
        ff_dim: int,
        rng: np.random.Generator,
    ) -> None:
        self.layers = [TransformerLayer(dim, heads, head_dim, ff_dim, rng) for _ in range(depth)]
        self.norm = LayerNorm(dim)

    def __iter__(self) -> Iterator[TransformerLayer]:
        return iter(self.layers)

    def __call__(
        self,
        x: Tensor,
        key_padding: NDArray[np.bool_] | None = None,
        causal: bool = False,
    ) -> Tensor:
        h = x
        for layer in self.layers:
            h = layer(h, key_padding=key_padding, causal=causal)
        return self.norm(h)
