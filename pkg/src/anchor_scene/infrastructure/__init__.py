"""Infrastructure adapters: checkpoint files, event bus, corpus files, loss logs."""

from anchor_scene.infrastructure.checkpoint import CheckpointStore, read_rdck, write_rdck
from anchor_scene.infrastructure.event_bus import InMemoryEventBus
from anchor_scene.infrastructure.loss_log import LossCsvWriter
from anchor_scene.infrastructure.scene_repository import NdjsonSceneRepository

__all__ = [
    "CheckpointStore",
    "InMemoryEventBus",
    "LossCsvWriter",
    "NdjsonSceneRepository",
    "read_rdck",
    "write_rdck",
]
