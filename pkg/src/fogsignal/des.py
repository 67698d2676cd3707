"""Discrete-event kernel: integer-millisecond clock, stable event queue, seeded streams."""

from __future__ import annotations

import hashlib
import heapq
import random
from dataclasses import dataclass, field
from typing import Any, Callable

MS_PER_S = 1000


def to_ticks(seconds: float) -> int:
    """Convert seconds to whole simulated milliseconds (nearest tick)."""
    return int(round(seconds * MS_PER_S))


def to_seconds(ticks: int) -> float:
    return ticks / MS_PER_S


class SchedulingError(ValueError):
    pass


class SimulationError(RuntimeError):
    """A handler failed; carries the offending event."""

    def __init__(self, event: "Event", cause: BaseException):
        super().__init__(f"handler for event #{event.id} ({event.kind}) at t={event.fire_at} ms failed: {cause!r}")
        self.event = event
        self.cause = cause


@dataclass(order=False)
class Event:
    id: int
    fire_at: int
    kind: str
    handler: Callable[..., Any] | None = None
    payload: dict[str, Any] = field(default_factory=dict)
    cancelled: bool = False


@dataclass(frozen=True)
class RunSummary:
    events_dispatched: int
    final_clock: int


class Kernel:
    """Single-threaded event loop.

    Events fire in ``(fire_at, id)`` order, so events scheduled for the same
    instant dispatch in the order they were scheduled.
    """

    def __init__(self) -> None:
        self._now = 0
        self._next_id = 0
        self._heap: list[tuple[int, int, Event]] = []
        self._pending: dict[int, Event] = {}
        self.dispatched = 0
        self.trace: list[tuple[int, int, str]] | None = None

    @property
    def now(self) -> int:
        return self._now

    def schedule(self, kind: str, delay: int, handler: Callable[..., Any] | None = None, **payload: Any) -> int:
        if delay < 0:
            raise SchedulingError(f"negative delay {delay} for {kind!r}")
        return self.schedule_at(kind, self._now + int(delay), handler, **payload)

    def schedule_at(self, kind: str, fire_at: int, handler: Callable[..., Any] | None = None, **payload: Any) -> int:
        if fire_at < self._now:
            raise SchedulingError(f"cannot schedule {kind!r} at {fire_at} before now={self._now}")
        ev = Event(self._next_id, int(fire_at), kind, handler, payload)
        self._next_id += 1
        heapq.heappush(self._heap, (ev.fire_at, ev.id, ev))
        self._pending[ev.id] = ev
        return ev.id

    def cancel(self, event_id: int) -> bool:
        ev = self._pending.pop(event_id, None)
        if ev is None:
            return False
        ev.cancelled = True
        return True

    def pending(self) -> int:
        return len(self._pending)

    def _dispatch(self, ev: Event) -> None:
        self._pending.pop(ev.id, None)
        self._now = ev.fire_at
        self.dispatched += 1
        if self.trace is not None:
            self.trace.append((ev.fire_at, ev.id, ev.kind))
        if ev.handler is None:
            return
        try:
            ev.handler(**ev.payload)
        except SimulationError:
            raise
        except Exception as exc:
            raise SimulationError(ev, exc) from exc

    def run_until(self, t_end: int) -> RunSummary:
        if t_end < self._now:
            raise SchedulingError(f"run_until({t_end}) is before now={self._now}")
        count = 0
        while self._heap and self._heap[0][0] <= t_end:
            _, _, ev = heapq.heappop(self._heap)
            if ev.cancelled:
                continue
            self._dispatch(ev)
            count += 1
        self._now = t_end
        return RunSummary(count, self._now)

    def run(self) -> RunSummary:
        """Dispatch until the queue is empty."""
        count = 0
        while self._heap:
            _, _, ev = heapq.heappop(self._heap)
            if ev.cancelled:
                continue
            self._dispatch(ev)
            count += 1
        return RunSummary(count, self._now)


class RngStreams:
    """Named, independent random streams derived from one seed.

    Each name hashes to its own ``random.Random`` so adding a consumer never
    shifts another consumer's draws.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._streams: dict[str, random.Random] = {}

    def stream(self, name: str) -> random.Random:
        rng = self._streams.get(name)
        if rng is None:
            digest = hashlib.sha256(f"{self.seed}/{name}".encode()).digest()
            rng = random.Random(int.from_bytes(digest[:8], "big"))
            self._streams[name] = rng
        return rng
