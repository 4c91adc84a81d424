"""Newline-delimited JSON scene corpus with a statistics sidecar."""

import json
import logging
from collections import Counter
from collections.abc import Iterator, Mapping, Sequence
from pathlib import Path
from typing import Any

from anchor_scene.domain.errors import DataError, SceneParseError
from anchor_scene.domain.models import AttributeStats, Scene
from anchor_scene.schemas import scene_from_json, scene_to_json
from anchor_scene.services.ports import SceneRepositoryPort

logger = logging.getLogger(__name__)


def sidecar_path(corpus: Path) -> Path:
    """``scenes.ndjson`` -> ``scenes.stats.json``."""
    return corpus.with_suffix(".stats.json")


class NdjsonSceneRepository(SceneRepositoryPort):
    """One scene per line; attribute ranges and counts in ``<corpus>.stats.json``."""

    def __init__(self, path: Path) -> None:
        """
        Initialize repository.

        Args:
            path: Corpus file (the sidecar sits next to it)
        """
        self._path = path

    @property
    def path(self) -> Path:
        return self._path

    def write(self, scenes: Sequence[Scene], extras: Mapping[str, Any] | None = None) -> None:
        if not scenes:
            raise DataError("refusing to write an empty corpus")
        self._path.parent.mkdir(parents=True, exist_ok=True)
        with self._path.open("w", encoding="utf-8", newline="\n") as f:
            for scene in scenes:
                f.write(scene_to_json(scene) + "\n")

        categories = Counter(item.category for scene in scenes for item in scene.furniture)
        sidecar: dict[str, Any] = {
            "count": len(scenes),
            "objects": sum(categories.values()),
            "categories": dict(sorted(categories.items())),
            **AttributeStats.from_scenes(scenes).to_dict(),
        }
        sidecar.update(extras or {})
        sidecar_path(self._path).write_text(json.dumps(sidecar, sort_keys=True, indent=2) + "\n", encoding="utf-8")
        logger.info(f"corpus written: {self._path} ({len(scenes)} scenes)")

    def __iter__(self) -> Iterator[Scene]:
        try:
            f = self._path.open(encoding="utf-8")
        except FileNotFoundError as e:
            raise DataError(f"corpus not found: {self._path}") from e
        with f:
            for number, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    yield scene_from_json(line)
                except SceneParseError as e:
                    raise SceneParseError(f"line {number}: {e.path}", str(e)) from e

    def load_all(self) -> list[Scene]:
        scenes = list(self)
        if not scenes:
            raise DataError(f"corpus {self._path} is empty")
        return scenes

    def sidecar(self) -> dict[str, Any]:
        path = sidecar_path(self._path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError as e:
            raise DataError(f"corpus statistics not found: {path}") from e
        except json.JSONDecodeError as e:
            raise DataError(f"corpus statistics are not valid JSON: {e}") from e
        if not isinstance(data, dict):
            raise DataError(f"{path} must hold a JSON object")
        return data

    def stats(self) -> AttributeStats:
        try:
            return AttributeStats.from_dict(self.sidecar())
        except (KeyError, ValueError) as e:
            raise DataError(f"corpus statistics are incomplete: {e}") from e
