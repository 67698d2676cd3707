"""Signal controllers.

Each controller is a pure function of a :class:`Snapshot` taken at cycle start
and returns a :class:`PhasePlan`. Roads are served in ascending index order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from fogsignal.des import to_ticks
from fogsignal.traffic import Signal, capacity, green_times_ms


class ControllerError(ValueError):
    pass


@dataclass(frozen=True)
class LedAssignment:
    """Lit LEDs per road; exactly one of red/yellow/green must be on."""

    lit: Mapping[int, frozenset[Signal]]

    def __post_init__(self) -> None:
        for road, colors in self.lit.items():
            if len(colors) != 1:
                names = sorted(c.value for c in colors) or ["none"]
                raise ControllerError(f"road {road}: exactly one LED must be lit, got {', '.join(names)}")
        greens = [r for r, c in self.lit.items() if Signal.GREEN in c]
        if len(greens) > 1:
            raise ControllerError(f"roads {greens} are green at once")

    @classmethod
    def of(cls, states: Mapping[int, Signal]) -> "LedAssignment":
        return cls({r: frozenset({s}) for r, s in states.items()})

    def state(self, road: int) -> Signal:
        return next(iter(self.lit[road]))

    def states(self) -> dict[int, Signal]:
        return {r: self.state(r) for r in self.lit}


def path(source: int, dest: int, roads: int = 4) -> LedAssignment:
    """LEDs for a car heading from ``source`` to ``dest``: source green, rest red."""
    if not (0 <= source < roads and 0 <= dest < roads):
        raise ControllerError(f"unknown road in path({source}, {dest}) with {roads} roads")
    if source == dest:
        raise ControllerError("source and destination roads must differ")
    return LedAssignment.of({r: Signal.GREEN if r == source else Signal.RED for r in range(roads)})


def phase_assignment(roads: int, active: int | None, state: Signal) -> LedAssignment:
    states = {r: Signal.RED for r in range(roads)}
    if active is not None:
        states[active] = state
    return LedAssignment.of(states)


@dataclass(frozen=True)
class Phase:
    road: int
    green_ms: int


@dataclass(frozen=True)
class PhasePlan:
    phases: tuple[Phase, ...]
    yellow_ms: int
    idle_ms: int = 0  # all-red hold when no road is served

    def __post_init__(self) -> None:
        if self.yellow_ms < 0 or self.idle_ms < 0 or any(p.green_ms < 0 for p in self.phases):
            raise ControllerError("durations must be non-negative")
        roads = [p.road for p in self.phases]
        if len(set(roads)) != len(roads):
            raise ControllerError("a road appears twice in one cycle")

    @property
    def served(self) -> tuple[Phase, ...]:
        return tuple(p for p in self.phases if p.green_ms > 0)

    @property
    def cycle_ms(self) -> int:
        """Sum of green times (the cycle time of the green-split arithmetic)."""
        return sum(p.green_ms for p in self.phases)

    @property
    def duration_ms(self) -> int:
        served = self.served
        if not served:
            return self.idle_ms
        return self.cycle_ms + self.yellow_ms * (len(served) - 1)

    def segments(self, start: int = 0) -> list[tuple[int | None, Signal, int, int]]:
        """(road, state, begin, end) intervals; a yellow sits between consecutive greens."""
        out: list[tuple[int | None, Signal, int, int]] = []
        t = start
        served = self.served
        if not served:
            return [(None, Signal.RED, t, t + self.idle_ms)]
        for i, p in enumerate(served):
            out.append((p.road, Signal.GREEN, t, t + p.green_ms))
            t += p.green_ms
            if i < len(served) - 1 and self.yellow_ms:
                out.append((p.road, Signal.YELLOW, t, t + self.yellow_ms))
                t += self.yellow_ms
        return out


@dataclass(frozen=True)
class Snapshot:
    """What a controller may look at when it plans a cycle."""

    now: int
    sensed_counts: tuple[int, ...]
    capacities: tuple[int, ...]
    last_green_end: tuple[int, ...]

    @property
    def roads(self) -> int:
        return len(self.sensed_counts)


def itcms_plan(counts: Sequence[int], mu: float = 2.5, yellow: float = 5.0, min_cycle: float = 10.0) -> PhasePlan:
    """Green per road proportional to its share of all queued vehicles."""
    if sum(counts) == 0:
        return PhasePlan((), to_ticks(yellow), idle_ms=to_ticks(min_cycle))
    greens = green_times_ms(list(counts), to_ticks(mu))
    return PhasePlan(tuple(Phase(r, g) for r, g in enumerate(greens)), to_ticks(yellow))


def stl_plan(roads: int = 4, base_green: float = 30.0, extension: float = 16.0,
             congested: Sequence[bool] | None = None, yellow: float = 5.0) -> PhasePlan:
    if roads < 1:
        raise ControllerError("need at least one road")
    congested = congested or [False] * roads
    phases = tuple(Phase(r, to_ticks(base_green + (extension if congested[r] else 0))) for r in range(roads))
    return PhasePlan(phases, to_ticks(yellow))


def iov_plan(occupancy: Sequence[int], headway: float = 2.5, car_len: float = 4.5, gap: float = 0.5,
             road_length: float = 400.0, yellow: float = 5.0, min_cycle: float = 10.0) -> PhasePlan:
    """Green = occupancy x headway per road, capped at a full road's worth."""
    cap = capacity(road_length, car_len, gap)
    h = to_ticks(headway)
    phases = tuple(Phase(r, min(max(n, 0), cap) * h) for r, n in enumerate(occupancy))
    if not any(p.green_ms for p in phases):
        return PhasePlan((), to_ticks(yellow), idle_ms=to_ticks(min_cycle))
    return PhasePlan(phases, to_ticks(yellow))


class Controller:
    name = "base"

    def __init__(self, yellow_s: float, min_cycle_s: float):
        self.yellow_s = yellow_s
        self.min_cycle_s = min_cycle_s

    def plan(self, snap: Snapshot) -> PhasePlan:
        raise NotImplementedError


class ItcmsController(Controller):
    name = "itcms"

    def __init__(self, yellow_s: float = 5.0, min_cycle_s: float = 10.0, mu_s: float = 2.5):
        super().__init__(yellow_s, min_cycle_s)
        self.mu_s = mu_s

    def plan(self, snap: Snapshot) -> PhasePlan:
        return itcms_plan(snap.sensed_counts, self.mu_s, self.yellow_s, self.min_cycle_s)


class StlController(Controller):
    """Fixed round-robin split; a road at or above the congestion threshold gets the extension."""

    name = "stl"

    def __init__(self, yellow_s: float = 5.0, min_cycle_s: float = 10.0, base_green_s: float = 30.0,
                 extension_s: float = 16.0, congestion_threshold: float = 0.5):
        super().__init__(yellow_s, min_cycle_s)
        self.base_green_s = base_green_s
        self.extension_s = extension_s
        self.congestion_threshold = congestion_threshold

    def plan(self, snap: Snapshot) -> PhasePlan:
        flags = [n >= self.congestion_threshold * cap for n, cap in zip(snap.sensed_counts, snap.capacities)]
        return stl_plan(snap.roads, self.base_green_s, self.extension_s, flags, self.yellow_s)


class IovController(Controller):
    """Connected-vehicle baseline.

    With ``occupancy_source="headway"`` the occupancy of a road is the number of
    cars presumed to have entered at the fixed headway since its last green
    ended, capped at the road's capacity. ``"sensed"`` uses the camera counts.
    """

    name = "iov"

    def __init__(self, yellow_s: float = 5.0, min_cycle_s: float = 10.0, headway_s: float = 2.5,
                 car_length_m: float = 4.5, gap_m: float = 0.5, road_length_m: float = 400.0,
                 occupancy_source: str = "headway"):
        super().__init__(yellow_s, min_cycle_s)
        self.headway_s = headway_s
        self.car_length_m = car_length_m
        self.gap_m = gap_m
        self.road_length_m = road_length_m
        self.occupancy_source = occupancy_source

    def occupancy(self, snap: Snapshot) -> list[int]:
        if self.occupancy_source == "sensed":
            return list(snap.sensed_counts)
        h = to_ticks(self.headway_s)
        return [min(cap, math.floor((snap.now - last) / h))
                for last, cap in zip(snap.last_green_end, snap.capacities)]

    def plan(self, snap: Snapshot) -> PhasePlan:
        return iov_plan(self.occupancy(snap), self.headway_s, self.car_length_m, self.gap_m,
                        self.road_length_m, self.yellow_s, self.min_cycle_s)


def make_controller(cfg) -> Controller:
    """Build the controller named by ``cfg.kind`` from a ControllerConfig."""
    common = dict(yellow_s=cfg.yellow_s, min_cycle_s=cfg.min_cycle_s)
    if cfg.kind == "itcms":
        return ItcmsController(mu_s=cfg.itcms.mu_s, **common)
    if cfg.kind == "stl":
        return StlController(**common, **cfg.stl.model_dump())
    if cfg.kind == "iov":
        return IovController(**common, **cfg.iov.model_dump())
    raise ControllerError(f"unknown controller {cfg.kind!r}; choose from itcms, stl, iov")
