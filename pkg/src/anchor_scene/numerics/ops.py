"""Differentiable operators over :class:`Tensor`.

Each operator computes its forward value with numpy and records a backward rule that maps
the output gradient to one gradient per input (``None`` for inputs that take none).
"""

from collections.abc import Sequence
from typing import Any

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from numpy.typing import NDArray
from scipy import special

from anchor_scene.domain.errors import ContractViolation
from anchor_scene.numerics.tensor import FloatArray, Tensor, TensorLike, as_tensor, record


def _unbroadcast(grad: FloatArray, shape: tuple[int, ...]) -> FloatArray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_broadcast(op: str, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError as e:
        raise ContractViolation(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from e


# ---------------------------------------------------------------------------
# Elementwise arithmetic
# ---------------------------------------------------------------------------


def add(a: TensorLike, b: TensorLike) -> Tensor:
    x, y = as_tensor(a), as_tensor(b)
    _check_broadcast("add", x, y)

    def backward(g: FloatArray) -> list[FloatArray | None]:
        return [_unbroadcast(g, x.shape), _unbroadcast(g, y.shape)]

    return record("add", x.data + y.data, (x, y), backward)


def sub(a: TensorLike, b: TensorLike) -> Tensor:
    x, y = as_tensor(a), as_tensor(b)
    _check_broadcast("sub", x, y)

    def backward(g: FloatArray) -> list[FloatArray | None]:
        return [_unbroadcast(g, x.shape), _unbroadcast(-g, y.shape)]

    return record("sub", x.data - y.data, (x, y), backward)


def mul(a: TensorLike, b: TensorLike) -> Tensor:
    x, y = as_tensor(a), as_tensor(b)
    _check_broadcast("mul", x, y)

    def backward(g: FloatArray) -> list[FloatArray | None]:
        return [_unbroadcast(g * y.data, x.shape), _unbroadcast(g * x.data, y.shape)]

    return record("mul", x.data * y.data, (x, y), backward)


def div(a: TensorLike, b: TensorLike) -> Tensor:
    x, y = as_tensor(a), as_tensor(b)
    _check_broadcast("div", x, y)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = x.data / y.data

    def backward(g: FloatArray) -> list[FloatArray | None]:
        return [
            _unbroadcast(g / y.data, x.shape),
            _unbroadcast(-g * x.data / (y.data * y.data), y.shape),
        ]

    return record("div", out, (x, y), backward)


def neg(a: TensorLike) -> Tensor:
    x = as_tensor(a)
    return record("neg", -x.data, (x,), lambda g: [-g])


def matmul(a: TensorLike, b: TensorLike) -> Tensor:
    """Batched matrix product over the last two axes with broadcast batch axes."""
    x, y = as_tensor(a), as_tensor(b)
    if x.ndim < 2 or y.ndim < 2:
        raise ContractViolation(f"matmul needs rank >= 2 operands, got {x.shape} and {y.shape}")
    if x.shape[-1] != y.shape[-2]:
        raise ContractViolation(f"matmul: inner extents differ, {x.shape} @ {y.shape}")
    try:
        out = np.matmul(x.data, y.data)
    except ValueError as e:
        raise ContractViolation(f"matmul: batch axes {x.shape} and {y.shape} differ") from e

    def backward(g: FloatArray) -> list[FloatArray | None]:
        gx = np.matmul(g, np.swapaxes(y.data, -1, -2))
        gy = np.matmul(np.swapaxes(x.data, -1, -2), g)
        return [_unbroadcast(gx, x.shape), _unbroadcast(gy, y.shape)]

    return record("matmul", out, (x, y), backward)


def broadcast_to(a: TensorLike, shape: Sequence[int]) -> Tensor:
    x = as_tensor(a)
    try:
        out = np.broadcast_to(x.data, tuple(shape)).copy()
    except ValueError as e:
        raise ContractViolation(f"cannot broadcast {x.shape} to {tuple(shape)}") from e
    return record("broadcast_to", out, (x,), lambda g: [_unbroadcast(g, x.shape)])


# ---------------------------------------------------------------------------
# Shape manipulation
# ---------------------------------------------------------------------------


def reshape(a: TensorLike, shape: Sequence[int]) -> Tensor:
    x = as_tensor(a)
    try:
        out = x.data.reshape(tuple(shape))
    except ValueError as e:
        raise ContractViolation(f"cannot reshape {x.shape} to {tuple(shape)}") from e
    return record("reshape", out, (x,), lambda g: [g.reshape(x.shape)])


def transpose(a: TensorLike, axes: Sequence[int]) -> Tensor:
    x = as_tensor(a)
    perm = tuple(axes)
    if sorted(perm) != list(range(x.ndim)):
        raise ContractViolation(f"transpose: {perm} is not a permutation of {x.ndim} axes")
    inverse = tuple(int(i) for i in np.argsort(perm))
    return record("transpose", np.transpose(x.data, perm), (x,), lambda g: [np.transpose(g, inverse)])


def swap_last(a: TensorLike) -> Tensor:
    """Swap the two trailing axes."""
    x = as_tensor(a)
    perm = list(range(x.ndim))
    perm[-1], perm[-2] = perm[-2], perm[-1]
    return transpose(x, perm)


def concat(tensors: Sequence[TensorLike], axis: int = -1) -> Tensor:
    parts = tuple(as_tensor(t) for t in tensors)
    if not parts:
        raise ContractViolation("concat needs at least one tensor")
    try:
        out = np.concatenate([p.data for p in parts], axis=axis)
    except ValueError as e:
        shapes = [p.shape for p in parts]
        raise ContractViolation(f"concat: incompatible shapes {shapes} on axis {axis}") from e
    sizes = [p.shape[axis] for p in parts]
    bounds = np.cumsum(sizes)[:-1]

    def backward(g: FloatArray) -> list[FloatArray | None]:
        return list(np.split(g, bounds, axis=axis))

    return record("concat", out, parts, backward)


def stack(tensors: Sequence[TensorLike], axis: int = 0) -> Tensor:
    parts = tuple(as_tensor(t) for t in tensors)
    if not parts:
        raise ContractViolation("stack needs at least one tensor")
    try:
        out = np.stack([p.data for p in parts], axis=axis)
    except ValueError as e:
        raise ContractViolation(f"stack: shapes differ {[p.shape for p in parts]}") from e

    def backward(g: FloatArray) -> list[FloatArray | None]:
        return [np.take(g, i, axis=axis) for i in range(len(parts))]

    return record("stack", out, parts, backward)


def index(a: TensorLike, key: Any) -> Tensor:
    """Basic or integer-array indexing (slice)."""
    x = as_tensor(a)
    try:
        out = np.array(x.data[key], dtype=np.float64)
    except IndexError as e:
        raise ContractViolation(f"index {key!r} out of range for shape {x.shape}") from e

    parts = key if isinstance(key, tuple) else (key,)
    basic = all(p is Ellipsis or p is None or isinstance(p, int | slice) for p in parts)

    def backward(g: FloatArray) -> list[FloatArray | None]:
        full = np.zeros_like(x.data)
        if basic:
            full[key] = g
        else:
            np.add.at(full, key, g)
        return [full]

    return record("index", out, (x,), backward)


def embedding(table: TensorLike, ids: NDArray[np.integer[Any]] | Sequence[int]) -> Tensor:
    """Row-select ``table[ids]``; gradients scatter-add back into the selected rows."""
    weights = as_tensor(table)
    idx = np.asarray(ids, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= weights.shape[0]):
        raise ContractViolation(
            f"embedding index out of range [0, {weights.shape[0]}): {idx.min()}..{idx.max()}"
        )

    def backward(g: FloatArray) -> list[FloatArray | None]:
        full = np.zeros_like(weights.data)
        np.add.at(full, idx, g)
        return [full]

    return record("embedding", weights.data[idx], (weights,), backward)


# ---------------------------------------------------------------------------
# Reductions
# ---------------------------------------------------------------------------


def _expand_reduced(
    g: FloatArray, shape: tuple[int, ...], axis: int | tuple[int, ...] | None, keepdims: bool
) -> FloatArray:
    if axis is None:
        return np.broadcast_to(g.reshape((1,) * len(shape)), shape)
    if not keepdims:
        axes = (axis,) if isinstance(axis, int) else axis
        normalized = sorted(a % len(shape) for a in axes)
        for ax in normalized:
            g = np.expand_dims(g, ax)
    return np.broadcast_to(g, shape)


def sum(a: TensorLike, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    x = as_tensor(a)
    out = np.sum(x.data, axis=axis, keepdims=keepdims)

    def backward(g: FloatArray) -> list[FloatArray | None]:
        return [np.array(_expand_reduced(g, x.shape, axis, keepdims))]

    return record("sum", np.asarray(out), (x,), backward)


def mean(a: TensorLike, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
    x = as_tensor(a)
    out = np.mean(x.data, axis=axis, keepdims=keepdims)
    count = x.size // (np.asarray(out).size or 1) if x.size else 1

    def backward(g: FloatArray) -> list[FloatArray | None]:
        return [np.array(_expand_reduced(g, x.shape, axis, keepdims)) / count]

    return record("mean", np.asarray(out), (x,), backward)


def max(a: TensorLike, axis: int = -1, keepdims: bool = False) -> Tensor:  # noqa: A001
    """Max-pool over one axis; the gradient goes to the first maximal entry."""
    x = as_tensor(a)
    arg = np.argmax(x.data, axis=axis)
    out = np.take_along_axis(x.data, np.expand_dims(arg, axis), axis=axis)
    if not keepdims:
        out = np.squeeze(out, axis=axis)

    def backward(g: FloatArray) -> list[FloatArray | None]:
        full = np.zeros_like(x.data)
        gk = g if keepdims else np.expand_dims(g, axis)
        np.put_along_axis(full, np.expand_dims(arg, axis), gk, axis=axis)
        return [full]

    return record("max", out, (x,), backward)


def logsumexp(a: TensorLike, axis: int = -1, keepdims: bool = False) -> Tensor:
    x = as_tensor(a)
    out = special.logsumexp(x.data, axis=axis, keepdims=True)
    weights = np.exp(x.data - out)
    if not keepdims:
        out = np.squeeze(out, axis=axis)

    def backward(g: FloatArray) -> list[FloatArray | None]:
        gk = g if keepdims else np.expand_dims(g, axis)
        return [gk * weights]

    return record("logsumexp", out, (x,), backward)


# ---------------------------------------------------------------------------
# Nonlinearities
# ---------------------------------------------------------------------------


def relu(a: TensorLike) -> Tensor:
    x = as_tensor(a)
    mask = x.data > 0
    return record("relu", np.where(mask, x.data, 0.0), (x,), lambda g: [g * mask])


def sigmoid(a: TensorLike) -> Tensor:
    x = as_tensor(a)
    out = special.expit(x.data)
    return record("sigmoid", out, (x,), lambda g: [g * out * (1.0 - out)])


def softplus(a: TensorLike) -> Tensor:
    """log(1 + e^x), computed without overflow."""
    x = as_tensor(a)
    out = np.logaddexp(0.0, x.data)
    return record("softplus", out, (x,), lambda g: [g * special.expit(x.data)])


def exp(a: TensorLike) -> Tensor:
    x = as_tensor(a)
    with np.errstate(over="ignore"):
        out = np.exp(x.data)
    return record("exp", out, (x,), lambda g: [g * out])


def log(a: TensorLike) -> Tensor:
    x = as_tensor(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(x.data)
    return record("log", out, (x,), lambda g: [g / x.data])


def clip(a: TensorLike, low: float | None = None, high: float | None = None) -> Tensor:
    """Clamp values; the gradient is zero where the clamp is active."""
    x = as_tensor(a)
    out = np.clip(x.data, low, high)
    inside = np.ones(x.shape, dtype=bool)
    if low is not None:
        inside &= x.data >= low
    if high is not None:
        inside &= x.data <= high
    return record("clip", out, (x,), lambda g: [g * inside])


def softmax(a: TensorLike, mask: NDArray[np.bool_] | None = None) -> Tensor:
    """Softmax over the last axis. ``mask`` marks entries that receive exactly zero weight."""
    x = as_tensor(a)
    logits = x.data if mask is None else np.where(mask, -np.inf, x.data)
    peak = np.max(logits, axis=-1, keepdims=True)
    if not np.all(np.isfinite(peak)):
        raise ContractViolation("softmax: a row is fully masked")
    out = special.softmax(logits, axis=-1)

    def backward(g: FloatArray) -> list[FloatArray | None]:
        return [out * (g - np.sum(g * out, axis=-1, keepdims=True))]

    return record("softmax", out, (x,), backward)


def log_softmax(a: TensorLike) -> Tensor:
    x = as_tensor(a)
    out = special.log_softmax(x.data, axis=-1)
    probs = np.exp(out)

    def backward(g: FloatArray) -> list[FloatArray | None]:
        return [g - probs * np.sum(g, axis=-1, keepdims=True)]

    return record("log_softmax", out, (x,), backward)


def layer_norm(
    a: TensorLike,
    gamma: TensorLike | None = None,
    beta: TensorLike | None = None,
    eps: float = 1e-5,
) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then apply the affine terms."""
    x = as_tensor(a)
    width = x.shape[-1]
    centered = x.data - np.mean(x.data, axis=-1, keepdims=True)
    var = np.mean(centered * centered, axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    g_t = as_tensor(gamma) if gamma is not None else None
    b_t = as_tensor(beta) if beta is not None else None
    out = xhat
    if g_t is not None:
        out = out * g_t.data
    if b_t is not None:
        out = out + b_t.data

    def backward(g: FloatArray) -> list[FloatArray | None]:
        dxhat = g * g_t.data if g_t is not None else g
        dx = (
            inv_std
            / width
            * (
                width * dxhat
                - np.sum(dxhat, axis=-1, keepdims=True)
                - xhat * np.sum(dxhat * xhat, axis=-1, keepdims=True)
            )
        )
        grads: list[FloatArray | None] = [dx]
        if g_t is not None:
            grads.append(_unbroadcast(g * xhat, g_t.shape))
        if b_t is not None:
            grads.append(_unbroadcast(g, b_t.shape))
        return grads

    inputs = (x,) + tuple(t for t in (g_t, b_t) if t is not None)
    return record("layer_norm", out, inputs, backward)


# ---------------------------------------------------------------------------
# Convolution
# ---------------------------------------------------------------------------


def conv2d(
    a: TensorLike,
    weight: TensorLike,
    bias: TensorLike | None = None,
    stride: int = 1,
    padding: int = 0,
) -> Tensor:
    """2-D cross-correlation of (B, C, H, W) inputs with (O, C, kh, kw) kernels."""
    x, w = as_tensor(a), as_tensor(weight)
    b = as_tensor(bias) if bias is not None else None
    if x.ndim != 4 or w.ndim != 4:
        raise ContractViolation(f"conv2d expects rank-4 input and kernel, got {x.shape}, {w.shape}")
    if x.shape[1] != w.shape[1]:
        raise ContractViolation(f"conv2d: input has {x.shape[1]} channels, kernel expects {w.shape[1]}")
    if stride < 1:
        raise ContractViolation("conv2d: stride must be positive")
    kh, kw = w.shape[2], w.shape[3]
    padded = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    if padded.shape[2] < kh or padded.shape[3] < kw:
        raise ContractViolation("conv2d: kernel larger than padded input")
    windows = sliding_window_view(padded, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    out_h, out_w = windows.shape[2], windows.shape[3]
    out = np.einsum("bchwij,ocij->bohw", windows, w.data, optimize=True)
    if b is not None:
        out = out + b.data.reshape(1, -1, 1, 1)

    def backward(g: FloatArray) -> list[FloatArray | None]:
        gw = np.einsum("bchwij,bohw->ocij", windows, g, optimize=True)
        cols = np.einsum("bohw,ocij->bchwij", g, w.data, optimize=True)
        gpad = np.zeros_like(padded)
        for i in range(kh):
            for j in range(kw):
                gpad[:, :, i : i + stride * out_h : stride, j : j + stride * out_w : stride] += cols[..., i, j]
        gx = gpad[:, :, padding : padding + x.shape[2], padding : padding + x.shape[3]]
        grads: list[FloatArray | None] = [np.ascontiguousarray(gx), gw]
        if b is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return grads

    inputs = (x, w) + ((b,) if b is not None else ())
    return record("conv2d", out, inputs, backward)


# ---------------------------------------------------------------------------
# Gradient plumbing
# ---------------------------------------------------------------------------


def straight_through(a: TensorLike, values: FloatArray) -> Tensor:
    """Forward ``values``, backward the identity to ``a`` (straight-through estimator)."""
    x = as_tensor(a)
    target = np.asarray(values, dtype=np.float64)
    if target.shape != x.shape:
        raise ContractViolation(f"straight_through: {target.shape} vs {x.shape}")
    return record("straight_through", target.copy(), (x,), lambda g: [g])


def stop_gradient(a: TensorLike) -> Tensor:
    return as_tensor(a).detach()


def square(a: TensorLike) -> Tensor:
    x = as_tensor(a)
    return mul(x, x)
