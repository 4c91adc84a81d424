"""Dense float64 tensors with tape-based reverse-mode differentiation.

Operations record themselves on the active :class:`Tape` (entered with ``with Tape():``)
when at least one input requires a gradient. Outside a tape nothing is recorded, which is
how inference runs.
"""

from __future__ import annotations

import contextvars
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from types import TracebackType
from typing import TYPE_CHECKING, Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from anchor_scene.domain.errors import ContractViolation, NumericError

if TYPE_CHECKING:
    from typing import Self

FloatArray = NDArray[np.float64]
BackwardFn = Callable[[FloatArray], Sequence[FloatArray | None]]

_active_tape: contextvars.ContextVar[Tape | None] = contextvars.ContextVar(
    "active_tape", default=None
)


class Tensor:
    """Row-major float64 array with an optional gradient buffer."""

    __slots__ = ("data", "grad", "name", "requires_grad")

    def __init__(self, data: ArrayLike, requires_grad: bool = False, name: str = "") -> None:
        self.data: FloatArray = np.array(data, dtype=np.float64)
        self.grad: FloatArray | None = None
        self.requires_grad = requires_grad
        self.name = name

    @classmethod
    def wrap(cls, data: FloatArray, requires_grad: bool = False) -> Tensor:
        """Wrap an existing float64 array without copying."""
        tensor = cls.__new__(cls)
        tensor.data = data
        tensor.grad = None
        tensor.requires_grad = requires_grad
        tensor.name = ""
        return tensor

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def ndim(self) -> int:
        return int(self.data.ndim)

    @property
    def size(self) -> int:
        return int(self.data.size)

    def item(self) -> float:
        """Scalar value of a one-element tensor."""
        if self.data.size != 1:
            raise ContractViolation(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> FloatArray:
        return self.data

    def detach(self) -> Tensor:
        """Same values, cut from the tape."""
        return Tensor.wrap(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    # Operator sugar; the implementations live in ops.py.

    def __add__(self, other: TensorLike) -> Tensor:
        from anchor_scene.numerics import ops

        return ops.add(self, other)

    def __radd__(self, other: TensorLike) -> Tensor:
        from anchor_scene.numerics import ops

        return ops.add(other, self)

    def __sub__(self, other: TensorLike) -> Tensor:
        from anchor_scene.numerics import ops

        return ops.sub(self, other)

    def __rsub__(self, other: TensorLike) -> Tensor:
        from anchor_scene.numerics import ops

        return ops.sub(other, self)

    def __mul__(self, other: TensorLike) -> Tensor:
        from anchor_scene.numerics import ops

        return ops.mul(self, other)

    def __rmul__(self, other: TensorLike) -> Tensor:
        from anchor_scene.numerics import ops

        return ops.mul(other, self)

    def __truediv__(self, other: TensorLike) -> Tensor:
        from anchor_scene.numerics import ops

        return ops.div(self, other)

    def __neg__(self) -> Tensor:
        from anchor_scene.numerics import ops

        return ops.neg(self)

    def __matmul__(self, other: TensorLike) -> Tensor:
        from anchor_scene.numerics import ops

        return ops.matmul(self, other)

    def __getitem__(self, index: Any) -> Tensor:
        from anchor_scene.numerics import ops

        return ops.index(self, index)


type TensorLike = Tensor | float | int | ArrayLike


@dataclass(frozen=True, slots=True)
class TapeEntry:
    """One recorded operation."""

    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    backward: BackwardFn


class Tape:
    """Ordered record of operations for one forward pass."""

    def __init__(self) -> None:
        self.entries: list[TapeEntry] = []
        self._token: contextvars.Token[Tape | None] | None = None

    def __enter__(self) -> Self:
        self._token = _active_tape.set(self)
        return self

    def __exit__(
        self,
        exc_type: type[BaseException] | None,
        exc: BaseException | None,
        tb: TracebackType | None,
    ) -> None:
        if self._token is not None:
            _active_tape.reset(self._token)
            self._token = None

    def __len__(self) -> int:
        return len(self.entries)

    def record(self, entry: TapeEntry) -> None:
        self.entries.append(entry)

    def backward(self, loss: Tensor) -> None:
        """Populate ``grad`` of every gradient-requiring tensor reachable from ``loss``."""
        if loss.size != 1:
            raise ContractViolation(f"loss must be a scalar, got shape {loss.shape}")
        if not any(entry.output is loss for entry in self.entries):
            raise ContractViolation("loss was not produced on this tape")

        pending: dict[int, tuple[Tensor, FloatArray]] = {
            id(loss): (loss, np.ones_like(loss.data))
        }
        for entry in reversed(self.entries):
            slot = pending.pop(id(entry.output), None)
            if slot is None:
                continue
            _, grad = slot
            _store_grad(entry.output, grad)
            input_grads = entry.backward(grad)
            for tensor, input_grad in zip(entry.inputs, input_grads, strict=True):
                if input_grad is None or not tensor.requires_grad:
                    continue
                if input_grad.shape != tensor.data.shape:
                    raise ContractViolation(
                        f"{entry.op}: gradient shape {input_grad.shape} "
                        f"does not match input shape {tensor.shape}"
                    )
                key = id(tensor)
                if key in pending:
                    pending[key] = (tensor, pending[key][1] + input_grad)
                else:
                    pending[key] = (tensor, input_grad)

        # Whatever remains are leaves (parameters and inputs).
        for tensor, grad in pending.values():
            _store_grad(tensor, grad)


def _store_grad(tensor: Tensor, grad: FloatArray) -> None:
    if not np.all(np.isfinite(grad)):
        raise NumericError("non-finite gradient during backward pass")
    tensor.grad = grad if tensor.grad is None else tensor.grad + grad


def active_tape() -> Tape | None:
    return _active_tape.get()


def record(op: str, output: FloatArray, inputs: tuple[Tensor, ...], backward: BackwardFn) -> Tensor:
    """Wrap an op result and put it on the active tape when it needs a gradient."""
    if not np.all(np.isfinite(output)):
        raise NumericError(f"{op} produced non-finite values")
    requires_grad = any(tensor.requires_grad for tensor in inputs)
    result = Tensor.wrap(np.asarray(output, dtype=np.float64), requires_grad=requires_grad)
    tape = _active_tape.get()
    if requires_grad and tape is not None:
        tape.record(TapeEntry(op=op, inputs=inputs, output=result, backward=backward))
    return result


def backward(tape: Tape, loss: Tensor) -> None:
    """Reverse-mode pass over ``tape`` seeded at the scalar ``loss``."""
    tape.backward(loss)


def parameter(data: ArrayLike, name: str = "") -> Tensor:
    """A trainable leaf tensor."""
    return Tensor(data, requires_grad=True, name=name)


def as_tensor(value: TensorLike) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor.wrap(np.asarray(value, dtype=np.float64))
