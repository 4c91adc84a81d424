"""RDCK tensor files and the directory-backed checkpoint store.

File layout: magic ``RDCK``, version (u32), then records of name length (u32), UTF-8
name, rank (u32), extents (u64 each) and the payload as little-endian f64. All integers
are little-endian.
"""

import json
import logging
import os
import struct
from collections.abc import Mapping
from pathlib import Path
from typing import Any

import numpy as np

from anchor_scene.domain.errors import ContractViolation, DataError
from anchor_scene.domain.shapes import FloatArray, OccupancyGrid
from anchor_scene.services.ports import CheckpointStorePort

logger = logging.getLogger(__name__)

MAGIC = b"RDCK"
VERSION = 1
_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")


def encode_rdck(tensors: Mapping[str, FloatArray]) -> bytes:
    parts = [MAGIC, _U32.pack(VERSION)]
    for name, value in tensors.items():
        array = np.asarray(value, dtype="<f8")
        encoded = name.encode("utf-8")
        parts.append(_U32.pack(len(encoded)))
        parts.append(encoded)
        parts.append(_U32.pack(array.ndim))
        parts.extend(_U64.pack(extent) for extent in array.shape)
        parts.append(np.ascontiguousarray(array).tobytes())
    return b"".join(parts)


def decode_rdck(data: bytes) -> dict[str, FloatArray]:
    if data[:4] != MAGIC:
        raise DataError("not an RDCK file (bad magic)")
    try:
        (version,) = _U32.unpack_from(data, 4)
        if version != VERSION:
            raise DataError(f"unsupported RDCK version {version}")
        offset = 8
        tensors: dict[str, FloatArray] = {}
        while offset < len(data):
            (length,) = _U32.unpack_from(data, offset)
            offset += 4
            name = data[offset : offset + length].decode("utf-8")
            offset += length
            (rank,) = _U32.unpack_from(data, offset)
            offset += 4
            shape = tuple(_U64.unpack_from(data, offset + 8 * i)[0] for i in range(rank))
            offset += 8 * rank
            count = int(np.prod(shape, dtype=np.int64))
            if offset + 8 * count > len(data):
                raise DataError(f"RDCK record {name!r} is truncated")
            payload = np.frombuffer(data, dtype="<f8", count=count, offset=offset)
            tensors[name] = payload.astype(np.float64).reshape(shape)
            offset += 8 * count
    except (struct.error, UnicodeDecodeError) as e:
        raise DataError(f"corrupt RDCK file: {e}") from e
    return tensors


def write_rdck(path: Path, tensors: Mapping[str, FloatArray]) -> None:
    _atomic_write(path, encode_rdck(tensors))


def read_rdck(path: Path) -> dict[str, FloatArray]:
    try:
        return decode_rdck(path.read_bytes())
    except FileNotFoundError as e:
        raise DataError(f"checkpoint not found: {path}") from e


def save_grid(path: Path, grid: OccupancyGrid) -> None:
    write_rdck(path, {"occupancy": grid.values})


def load_grid(path: Path) -> OccupancyGrid:
    tensors = read_rdck(path)
    if "occupancy" not in tensors:
        raise DataError(f"{path} holds no occupancy grid")
    return OccupancyGrid(tensors["occupancy"])


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


class CheckpointStore(CheckpointStorePort):
    """``<name>.rdck`` tensor files with ``<name>.json`` manifests in one directory."""

    def __init__(self, directory: Path) -> None:
        """
        Initialize store.

        Args:
            directory: Checkpoint directory (created on first save)
        """
        self._directory = directory

    @property
    def directory(self) -> Path:
        return self._directory

    def _paths(self, name: str) -> tuple[Path, Path]:
        if not name or "/" in name or name.startswith("."):
            raise ContractViolation(f"invalid checkpoint name {name!r}")
        return self._directory / f"{name}.rdck", self._directory / f"{name}.json"

    def save(self, name: str, tensors: Mapping[str, FloatArray], manifest: Mapping[str, Any]) -> Path:
        tensor_path, manifest_path = self._paths(name)
        write_rdck(tensor_path, tensors)
        text = json.dumps(dict(manifest), sort_keys=True, indent=2)
        _atomic_write(manifest_path, (text + "\n").encode("utf-8"))
        logger.info(f"checkpoint saved: {tensor_path}")
        return tensor_path

    def load(self, name: str) -> tuple[dict[str, FloatArray], dict[str, Any]]:
        tensor_path, manifest_path = self._paths(name)
        try:
            manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        except FileNotFoundError as e:
            raise DataError(f"checkpoint manifest not found: {manifest_path}") from e
        except json.JSONDecodeError as e:
            raise DataError(f"checkpoint manifest is not valid JSON: {e}") from e
        return read_rdck(tensor_path), manifest

    def exists(self, name: str) -> bool:
        tensor_path, manifest_path = self._paths(name)
        return tensor_path.exists() and manifest_path.exists()

    def remove(self, name: str) -> None:
        """Delete a checkpoint's tensors and manifest; missing files are ignored."""
        for path in self._paths(name):
            path.unlink(missing_ok=True)
