"""Append-only loss curve CSV fed by training step events."""

import csv
import logging
from collections.abc import Sequence
from pathlib import Path

from anchor_scene.domain.events import DomainEvent, TrainingStepEvent

logger = logging.getLogger(__name__)


class LossCsvWriter:
    """Writes ``step,<columns>`` rows; steps at or below the last logged one are skipped.

    A resumed run therefore never rewrites or duplicates earlier rows.
    """

    def __init__(self, path: Path, columns: Sequence[str]) -> None:
        self._path = path
        self._columns = list(columns)
        self._last_step = self._read_last_step()

    @property
    def last_step(self) -> int:
        return self._last_step

    def _read_last_step(self) -> int:
        if not self._path.exists():
            return 0
        with self._path.open(newline="", encoding="utf-8") as f:
            rows = list(csv.reader(f))
        if rows and rows[0] != ["step", *self._columns]:
            logger.warning(f"{self._path} has unexpected columns {rows[0]}")
        steps = [int(row[0]) for row in rows[1:] if row]
        return max(steps, default=0)

    def __call__(self, event: DomainEvent) -> None:
        if not isinstance(event, TrainingStepEvent) or event.step <= self._last_step:
            return
        new_file = not self._path.exists()
        self._path.parent.mkdir(parents=True, exist_ok=True)
        with self._path.open("a", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            if new_file:
                writer.writerow(["step", *self._columns])
            writer.writerow([event.step, *(repr(event.losses.get(c, float("nan"))) for c in self._columns)])
        self._last_step = event.step
