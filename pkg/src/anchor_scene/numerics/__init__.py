"""Dense tensor engine with reverse-mode differentiation."""

from anchor_scene.numerics.optim import AdamState, adam_step, zero_grad
from anchor_scene.numerics.tensor import Tape, Tensor, backward, parameter

__all__ = [
    "AdamState",
    "Tape",
    "Tensor",
    "adam_step",
    "backward",
    "parameter",
    "zero_grad",
]
