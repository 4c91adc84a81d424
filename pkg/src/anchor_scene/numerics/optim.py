"""Adam optimizer."""

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from anchor_scene.domain.errors import ContractViolation, NumericError
from anchor_scene.numerics.tensor import FloatArray, Tensor


@dataclass
class AdamState:
    """Moment buffers and hyperparameters; buffers are keyed by parameter position."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    first_moments: list[FloatArray] = field(default_factory=list)
    second_moments: list[FloatArray] = field(default_factory=list)

    def ensure_buffers(self, params: Sequence[Tensor]) -> None:
        if not self.first_moments:
            self.first_moments = [np.zeros_like(p.data) for p in params]
            self.second_moments = [np.zeros_like(p.data) for p in params]
        if len(self.first_moments) != len(params):
            raise ContractViolation(
                f"optimizer holds {len(self.first_moments)} buffers for {len(params)} parameters"
            )
        for p, m in zip(params, self.first_moments, strict=True):
            if m.shape != p.data.shape:
                raise ContractViolation(f"moment buffer {m.shape} does not match parameter {p.shape}")


def adam_step(params: Sequence[Tensor], state: AdamState, *, allow_missing: bool = False) -> None:
    """One bias-corrected Adam update; gradients are zeroed afterwards.

    With ``allow_missing`` a parameter that received no gradient this step is treated as
    having a zero gradient (its moments still decay).
    """
    if not allow_missing:
        missing = [p.name or f"#{i}" for i, p in enumerate(params) if p.grad is None]
        if missing:
            raise ContractViolation(f"parameters without gradient: {', '.join(missing[:5])}")
    state.ensure_buffers(params)
    state.step += 1
    correction1 = 1.0 - state.beta1**state.step
    correction2 = 1.0 - state.beta2**state.step
    for p, m, v in zip(params, state.first_moments, state.second_moments, strict=True):
        grad = p.grad if p.grad is not None else np.zeros_like(p.data)
        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * grad * grad
        update = state.lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)
        p.data -= update
        if not np.all(np.isfinite(p.data)):
            raise NumericError(f"parameter {p.name or '?'} became non-finite")
        p.grad = None


def zero_grad(params: Sequence[Tensor]) -> None:
    for p in params:
        p.grad = None
