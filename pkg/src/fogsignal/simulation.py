"""Wires kernel, topology, traffic, controller and application into one run."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Any

from fogsignal.app import TrafficApp
from fogsignal.config import ScenarioConfig
from fogsignal.controllers import Controller, PhasePlan, Snapshot, make_controller
from fogsignal.des import Kernel, RngStreams, RunSummary, to_ticks
from fogsignal.topology import Network, Processor, Topology, build_topology
from fogsignal.traffic import RoadState, Signal, Vehicle, arrival_times, capacity


class Intersection:
    """Executes phase plans and discharges queues while a road is green.

    A road that is green and has a queue releases one vehicle every crossing
    time, as long as the crossing completes before the green ends. Each green
    is followed by a yellow clearance.
    """

    def __init__(self, kernel: Kernel, roads: list[RoadState], crossing_ms: int,
                 controller: Controller, yellow_ms: int):
        self.kernel = kernel
        self.roads = roads
        self.crossing_ms = crossing_ms
        self.controller = controller
        self.yellow_ms = yellow_ms
        self.sensed = [0] * len(roads)
        self.last_green_end = [0] * len(roads)
        self.green_end = [0] * len(roads)
        self.serving: dict[int, int] = {}  # road -> pending cross event id
        self.timeline: list[tuple[int, int, Signal]] = []
        self.plans: list[tuple[int, PhasePlan]] = []
        self._segments: list[tuple[int | None, Signal, int]] = []
        self._pending_event: int | None = None
        self.halted = False

    def observe(self, road: int, count: int) -> None:
        self.sensed[road] = count

    def signal_of(self, road: int) -> Signal:
        return self.roads[road].signal

    def start(self) -> None:
        self._pending_event = self.kernel.schedule("phase-change", 0, self._cycle)

    def _cycle(self) -> None:
        now = self.kernel.now
        snap = Snapshot(now, tuple(self.sensed), tuple(r.capacity for r in self.roads),
                        tuple(self.last_green_end))
        plan = self.controller.plan(snap)
        self.plans.append((now, plan))
        segs: list[tuple[int | None, Signal, int]] = []
        for road, state, begin, end in plan.segments(now):
            segs.append((road, state, end - begin))
        if plan.served and self.yellow_ms:
            segs.append((plan.served[-1].road, Signal.YELLOW, self.yellow_ms))
        self._segments = segs
        self._next_segment()

    def _next_segment(self) -> None:
        if not self._segments:
            self._cycle()
            return
        road, state, length = self._segments.pop(0)
        for r in range(len(self.roads)):
            if r != road:
                self._set(r, Signal.RED)
        if road is not None:
            self._set(road, state)
        if state is Signal.GREEN:
            self.green_end[road] = self.kernel.now + length
            self._try_serve(road)
        self._pending_event = self.kernel.schedule("phase-change", length, self._next_segment)

    def _set(self, road: int, state: Signal) -> None:
        rs = self.roads[road]
        if rs.signal is state:
            return
        if rs.signal is Signal.GREEN:
            self.last_green_end[road] = self.kernel.now
        rs.signal = state
        self.timeline.append((self.kernel.now, road, state))

    def on_arrival(self, vehicle: Vehicle) -> None:
        if self.roads[vehicle.source_road].arrive(vehicle):
            self._try_serve(vehicle.source_road)

    def _try_serve(self, road: int) -> None:
        rs = self.roads[road]
        if self.halted or road in self.serving or not rs.queue or rs.signal is not Signal.GREEN:
            return
        if self.kernel.now + self.crossing_ms > self.green_end[road]:
            return
        self.serving[road] = self.kernel.schedule("vehicle-cross", self.crossing_ms, self._cross, road=road)

    def _cross(self, road: int) -> None:
        del self.serving[road]
        rs = self.roads[road]
        v = rs.queue.popleft()
        v.crossed_time = self.kernel.now
        rs.crossed.append(v)
        self._try_serve(road)

    def halt(self) -> None:
        """Stop signalling: cancel the phase chain and crossings in progress, all red."""
        self.halted = True
        if self._pending_event is not None:
            self.kernel.cancel(self._pending_event)
        for ev in self.serving.values():
            self.kernel.cancel(ev)
        self.serving.clear()
        for r in range(len(self.roads)):
            self._set(r, Signal.RED)


@dataclass
class RunRecord:
    """Everything a finished run leaves behind for metrics."""

    config: ScenarioConfig
    duration_ms: int
    end_ms: int
    summary: RunSummary
    roads: list[RoadState]
    vehicles: list[Vehicle]
    timeline: list[tuple[int, int, Signal]]
    plans: list[tuple[int, PhasePlan]]
    topology: Topology
    network: Network
    processors: dict[str, Processor]
    app: TrafficApp
    wall_s: float = 0.0
    extra: dict[str, Any] = field(default_factory=dict)


class Simulation:
    def __init__(self, config: ScenarioConfig):
        self.config = config
        self.kernel = Kernel()
        self.rng = RngStreams(config.seed)
        self.topology = build_topology(config)
        self.network = Network(self.kernel, self.topology)
        self.processors = {name: Processor(self.kernel, spec) for name, spec in self.topology.devices.items()}
        tc = config.traffic
        self.roads = [
            RoadState(r, capacity(config.road_length(r), tc.car_length_m, tc.gap_m), config.road_length(r))
            for r in range(config.fog_node_count)
        ]
        cc = config.controller
        self.controller = make_controller(cc)
        self.intersection = Intersection(self.kernel, self.roads, to_ticks(tc.crossing_time_s),
                                         self.controller, to_ticks(cc.yellow_s))
        self.app = TrafficApp(self.kernel, self.topology, self.network, self.processors, self.rng, config.app,
                              queue_length=lambda r: len(self.roads[r].queue),
                              signal_of=self.intersection.signal_of,
                              observe=self.intersection.observe)
        self.vehicles: list[Vehicle] = []
        self.duration_ms = to_ticks(config.duration_s)

    def _schedule_arrivals(self) -> None:
        n = self.config.fog_node_count
        vid = 0
        for road in range(n):
            times = arrival_times(self.config.road_arrivals(road), self.config.duration_s,
                                  self.rng.stream(f"arrivals-{road}"))
            dest_rng = self.rng.stream(f"destinations-{road}")
            for t in times:
                dest = None
                if n > 1:
                    dest = dest_rng.randrange(n - 1)
                    dest += dest >= road
                v = Vehicle(vid, road, dest, to_ticks(t))
                vid += 1
                self.vehicles.append(v)
                self.kernel.schedule_at("vehicle-arrival", v.arrival_time, self.intersection.on_arrival, vehicle=v)

    def run(self) -> RunRecord:
        started = time.perf_counter()
        self._schedule_arrivals()
        period = to_ticks(self.config.app.sensor_period_s)
        for road in range(self.config.fog_node_count):
            self.app.start_sensor(self.topology.camera_of(f"fog-{road}"), period, self.duration_ms)
        self.intersection.start()
        summary = self.kernel.run_until(self.duration_ms)
        self.intersection.halt()
        if self.config.drain:
            tail = self.kernel.run()
            summary = RunSummary(summary.events_dispatched + tail.events_dispatched, tail.final_clock)
        wall = time.perf_counter() - started
        self.vehicles.sort(key=lambda v: v.id)
        return RunRecord(
            config=self.config, duration_ms=self.duration_ms, end_ms=max(self.kernel.now, self.duration_ms),
            summary=summary, roads=self.roads, vehicles=self.vehicles, timeline=self.intersection.timeline,
            plans=self.intersection.plans, topology=self.topology, network=self.network,
            processors=self.processors, app=self.app, wall_s=wall,
        )


def run_scenario(config: ScenarioConfig) -> RunRecord:
    return Simulation(config).run()
