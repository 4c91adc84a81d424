"""Training event bus.

Trainers publish step, epoch and checkpoint events; subscribers such as the loss CSV
writer react to them in-process. A handler registered for a base class receives every
subclass event, so ``subscribe(DomainEvent, ...)`` sees the whole run.
"""

import logging
from collections import defaultdict
from collections.abc import Callable

from anchor_scene.domain.events import DomainEvent
from anchor_scene.services.ports import EventBusPort

logger = logging.getLogger(__name__)

type Handler = Callable[[DomainEvent], None]


class InMemoryEventBus(EventBusPort):
    """Synchronous dispatch in subscription order; a failing handler never stops training."""

    def __init__(self) -> None:
        self._handlers: defaultdict[type[DomainEvent], list[Handler]] = defaultdict(list)
        self.failures = 0

    def _handlers_for(self, event: DomainEvent) -> list[Handler]:
        return [
            handler
            for cls in type(event).__mro__
            if issubclass(cls, DomainEvent)
            for handler in self._handlers.get(cls, ())
        ]

    def publish(self, event: DomainEvent) -> None:
        handlers = self._handlers_for(event)
        stage = getattr(event, "stage", "-")
        logger.debug(f"{type(event).__name__} [{stage}] -> {len(handlers)} handler(s)")
        for handler in handlers:
            try:
                handler(event)
            except Exception as e:
                self.failures += 1
                logger.error(f"Handler {getattr(handler, '__qualname__', handler)!s} failed on {stage}: {e}")

    def subscribe(self, event_type: type[DomainEvent], handler: Handler) -> None:
        self._handlers[event_type].append(handler)

    def unsubscribe(self, event_type: type[DomainEvent], handler: Handler) -> None:
        """Remove one registration; unknown handlers are ignored."""
        registered = self._handlers.get(event_type, [])
        if handler in registered:
            registered.remove(handler)

    def clear_all(self) -> None:
        self._handlers.clear()
        self.failures = 0
