"""Roads, vehicle queues, and proportional green-time arithmetic."""

from __future__ import annotations

import math
import random
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Iterator, Sequence


class Signal(str, Enum):
    RED = "Red"
    YELLOW = "Yellow"
    GREEN = "Green"


class NoDemand(ArithmeticError):
    """Share requested while no vehicle is queued anywhere."""


def total_vehicles(counts: Sequence[int]) -> int:
    if not counts:
        raise ValueError("need at least one road")
    if any(c < 0 for c in counts):
        raise ValueError("counts must be non-negative")
    return sum(counts)


def cycle_time(n_total: int, mu: float = 2.5) -> float:
    if n_total < 0 or mu <= 0:
        raise ValueError("need n_total >= 0 and mu > 0")
    return mu * n_total


def road_share(n_road: int, n_total: int) -> Fraction:
    if n_total == 0:
        raise NoDemand("no vehicles queued on any road")
    if not 0 <= n_road <= n_total:
        raise ValueError("need 0 <= n_road <= n_total")
    return Fraction(n_road, n_total)


def green_time(share: float | Fraction, cycle: float) -> float:
    if not 0 <= share <= 1 or cycle < 0:
        raise ValueError("need 0 <= share <= 1 and cycle >= 0")
    return float(share * cycle)


def green_times_ms(counts: Sequence[int], mu_ms: int) -> list[int]:
    """Per-road green in whole ms, shares summing exactly to the cycle.

    Each road gets floor(share * cycle); the rounding residual goes to the
    last road with demand so the greens add up to the cycle time.
    """
    n_total = total_vehicles(counts)
    if n_total == 0:
        return [0] * len(counts)
    cycle = mu_ms * n_total
    greens = [c * cycle // n_total for c in counts]  # floor(share * cycle), exact in integers
    last = max(i for i, c in enumerate(counts) if c > 0)
    greens[last] += cycle - sum(greens)
    return greens


def capacity(length_m: float, car_len: float = 4.5, gap: float = 0.5) -> int:
    if length_m <= 0 or car_len <= 0 or gap < 0:
        raise ValueError("road and car lengths must be positive")
    # exact decimal arithmetic so 400 / 5.0 does not land on 79.999...
    return math.floor(Fraction(str(length_m)) / (Fraction(str(car_len)) + Fraction(str(gap))))


@dataclass
class Vehicle:
    id: int
    source_road: int
    destination_road: int | None
    arrival_time: int
    crossed_time: int | None = None

    @property
    def delay(self) -> int | None:
        if self.crossed_time is None:
            return None
        return self.crossed_time - self.arrival_time


@dataclass
class RoadState:
    road_id: int
    capacity: int
    length_m: float = 400.0
    signal: Signal = Signal.RED
    queue: deque[Vehicle] = field(default_factory=deque)
    arrivals: int = 0
    blocked: int = 0
    crossed: list[Vehicle] = field(default_factory=list)

    def arrive(self, vehicle: Vehicle) -> bool:
        """Append to the FIFO; a full road turns the arrival away (spillback)."""
        if vehicle.destination_road == vehicle.source_road:
            raise ValueError("destination must differ from source")
        self.arrivals += 1
        if len(self.queue) >= self.capacity:
            self.blocked += 1
            return False
        self.queue.append(vehicle)
        return True

    def discharge(self, green_start: int, window: int, mu: int) -> list[Vehicle]:
        """Batch discharge of a standing queue over one green window.

        floor(window / mu) vehicles leave, FIFO, the i-th at green_start + i*mu.
        """
        if self.signal is not Signal.GREEN:
            raise ValueError(f"road {self.road_id} is not green")
        n = min(window // mu, len(self.queue))
        out = []
        for i in range(1, n + 1):
            v = self.queue.popleft()
            v.crossed_time = green_start + i * mu
            self.crossed.append(v)
            out.append(v)
        return out

    def conserved(self) -> bool:
        return self.arrivals == len(self.crossed) + len(self.queue) + self.blocked


def arrival_times(process, duration_s: float, rng: random.Random) -> Iterator[float]:
    """Arrival instants in seconds in [0, duration] for one road."""
    kind = process.kind
    if kind == "deterministic":
        t = process.offset_s + process.interval_s
        while t <= duration_s:
            for _ in range(process.batch):
                yield t
            t += process.interval_s
    elif kind == "poisson":
        if process.rate_per_s == 0:
            return
        t = rng.expovariate(process.rate_per_s)
        while t <= duration_s:
            yield t
            t += rng.expovariate(process.rate_per_s)
    elif kind == "trace":
        for t in process.times_s:
            if t <= duration_s:
                yield t
    else:
        raise ValueError(f"unknown arrival process {kind!r}")


def stl_arithmetic(base_green_s: float = 30, roads: int = 4, arrival_interval_s: float = 15,
                   arrivals_per_interval: int = 2, departure_interval_s: float = 6,
                   departures_per_interval: int = 3) -> dict[str, float]:
    """The fixed-cycle back-of-envelope: cycle, arrivals per red period, exits per green."""
    cycle = base_green_s * roads
    red = cycle - base_green_s
    return {
        "cycle_s": cycle,
        "arrivals_per_cycle": red / arrival_interval_s * arrivals_per_interval,
        "exits_per_green": base_green_s / departure_interval_s * departures_per_interval,
    }
