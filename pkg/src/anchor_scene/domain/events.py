"""Domain events published while training."""

from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from uuid import UUID, uuid4


@dataclass(frozen=True, kw_only=True)
class DomainEvent:
    """Base class for domain events."""

    event_id: UUID = field(default_factory=uuid4)
    occurred_at: datetime = field(default_factory=datetime.now)


@dataclass(frozen=True, kw_only=True)
class TrainingStepEvent(DomainEvent):
    """One optimizer step finished.

    ``stage`` is "codec" or "scene"; ``losses`` maps loss-part names to values.
    """

    stage: str
    step: int
    epoch: int
    losses: dict[str, float]


@dataclass(frozen=True, kw_only=True)
class EpochCompletedEvent(DomainEvent):
    """Mean losses over an epoch plus stage-specific extras (e.g. codebook usage)."""

    stage: str
    epoch: int
    mean_losses: dict[str, float]
    extras: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True, kw_only=True)
class CheckpointSavedEvent(DomainEvent):
    stage: str
    path: Path
    step: int
    epoch: int
