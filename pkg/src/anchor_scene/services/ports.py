"""Service layer interfaces (ports)."""

from abc import ABC, abstractmethod
from collections.abc import Callable, Iterator, Mapping, Sequence
from pathlib import Path
from typing import Any

from anchor_scene.domain.events import DomainEvent
from anchor_scene.domain.models import AnchorLatentSet, AttributeStats, Scene
from anchor_scene.domain.shapes import FloatArray, FurnitureSolid, OccupancyGrid


class EventBusPort(ABC):
    """Event bus interface (port)."""

    @abstractmethod
    def publish(self, event: DomainEvent) -> None:
        """Deliver an event to the handlers of its type and of its base types."""

    @abstractmethod
    def subscribe(
        self,
        event_type: type[DomainEvent],
        handler: Callable[[DomainEvent], None],
    ) -> None:
        """Register a handler for an event type."""


class CheckpointStorePort(ABC):
    """Named tensor bundles with a JSON manifest."""

    @abstractmethod
    def save(self, name: str, tensors: Mapping[str, FloatArray], manifest: Mapping[str, Any]) -> Path:
        """Persist tensors and manifest; returns the tensor file path."""

    @abstractmethod
    def load(self, name: str) -> tuple[dict[str, FloatArray], dict[str, Any]]:
        """Read back the tensors and manifest saved under ``name``."""

    @abstractmethod
    def exists(self, name: str) -> bool:
        """Is a checkpoint stored under ``name``?"""


class SceneRepositoryPort(ABC):
    """Scene corpus storage."""

    @abstractmethod
    def write(self, scenes: Sequence[Scene], extras: Mapping[str, Any] | None = None) -> None:
        """Write the corpus and its statistics sidecar."""

    @abstractmethod
    def __iter__(self) -> Iterator[Scene]:
        """Stream scenes in file order."""

    @abstractmethod
    def stats(self) -> AttributeStats:
        """Attribute ranges recorded with the corpus."""

    @abstractmethod
    def sidecar(self) -> dict[str, Any]:
        """The whole statistics sidecar document."""


class ShapeEncoderPort(ABC):
    """Turns a furniture solid into anchor-latents."""

    @abstractmethod
    def encode(self, solid: FurnitureSolid) -> AnchorLatentSet:
        """Sorted anchor-latents of the solid's canonical surface."""


class ShapeDecoderPort(ABC):
    """Turns anchor-latents back into an occupancy field."""

    @abstractmethod
    def decode_grid(self, latents: AnchorLatentSet, resolution: int) -> OccupancyGrid:
        """Occupancy probabilities at the voxel centers of a canonical grid."""

    @abstractmethod
    def boundary_cloud(self, latents: AnchorLatentSet) -> FloatArray:
        """Boundary points of the thresholded reconstruction (canonical frame)."""
