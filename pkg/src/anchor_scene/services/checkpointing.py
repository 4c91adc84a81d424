"""Packing model, optimizer and RNG state into checkpoint tensors and manifests."""

import hashlib
import json
from collections.abc import Mapping
from typing import Any

import numpy as np

from anchor_scene.domain.errors import CheckpointMismatchError
from anchor_scene.numerics.layers import Module
from anchor_scene.numerics.optim import AdamState
from anchor_scene.numerics.tensor import FloatArray

_FIRST = "adam.m."
_SECOND = "adam.v."
# Manifest keys that vary between otherwise identical checkpoints.
_VOLATILE = ("created_at",)


def snapshot(model: Module, adam: AdamState | None = None) -> dict[str, FloatArray]:
    """Model parameters and buffers, plus Adam moments keyed by parameter position."""
    tensors = model.state_dict()
    if adam is not None:
        for i, (m, v) in enumerate(zip(adam.first_moments, adam.second_moments, strict=True)):
            tensors[f"{_FIRST}{i}"] = m.copy()
            tensors[f"{_SECOND}{i}"] = v.copy()
    return tensors


def restore(
    model: Module, tensors: Mapping[str, FloatArray], adam: AdamState | None = None, adam_step: int = 0
) -> None:
    model.load_state_dict(tensors)
    if adam is None:
        return
    count = len(model.parameters())
    if f"{_FIRST}0" not in tensors:
        adam.first_moments, adam.second_moments, adam.step = [], [], 0
        return
    try:
        adam.first_moments = [np.array(tensors[f"{_FIRST}{i}"]) for i in range(count)]
        adam.second_moments = [np.array(tensors[f"{_SECOND}{i}"]) for i in range(count)]
    except KeyError as e:
        raise CheckpointMismatchError(f"checkpoint lacks optimizer moment {e}") from e
    adam.step = adam_step


def rng_state(rng: np.random.Generator) -> dict[str, Any]:
    return dict(rng.bit_generator.state)


def restore_rng(state: Mapping[str, Any]) -> np.random.Generator:
    rng = np.random.default_rng()
    rng.bit_generator.state = dict(state)
    return rng


def manifest_hash(manifest: Mapping[str, Any]) -> str:
    """SHA-256 (first 16 hex chars) of the canonical manifest without timestamps."""
    stable = {k: v for k, v in manifest.items() if k not in _VOLATILE}
    text = json.dumps(stable, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]
