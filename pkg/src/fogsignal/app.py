"""Sensing and actuation application running on the fog hierarchy.

Per camera frame the chain is::

    camera --FRAME--> fog: picture-capture, slot-detector
        --SLOT_STATUS--> proxy: signal-controller (decision commits here)
        --LED_COMMAND--> fog --LED_COMMAND--> LEDs       (only if the display changes)
    fog --CLOUD_ARCHIVE--> cloud: cloud-archive

The signal controller sits on the proxy because the green split needs the
counts of every road, and the proxy is the one device all fog nodes share.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from typing import Callable, Sequence

from fogsignal.controllers import ControllerError, LedAssignment
from fogsignal.des import Kernel, RngStreams, to_ticks
from fogsignal.topology import LED_COLORS, Network, Processor, Topology, TopologyError, Tuple, fog_name
from fogsignal.traffic import Signal


@dataclass(frozen=True)
class AppModule:
    name: str
    host: str
    cpu_mi: float | None  # None: per-tuple cost carried by the tuple itself


@dataclass(frozen=True)
class AppEdge:
    source: str
    target: str
    tuple_type: str
    direction: str  # "up" | "down"


@dataclass
class AppLoop:
    modules: tuple[str, ...]
    samples: list[int] = field(default_factory=list)


LOOP_MODULES = ("camera", "picture-capture", "slot-detector", "signal-controller", "led")

APP_EDGES = (
    AppEdge("camera", "picture-capture", "FRAME", "up"),
    AppEdge("slot-detector", "signal-controller", "SLOT_STATUS", "up"),
    AppEdge("signal-controller", "led", "LED_COMMAND", "down"),
    AppEdge("slot-detector", "cloud-archive", "CLOUD_ARCHIVE", "up"),
)


def loop_delay(samples: Sequence[int]) -> float | None:
    """Mean loop latency in ms, or None when nothing was measured."""
    if not samples:
        return None
    return statistics.fmean(samples)


def place_modules(topology: Topology, app_cfg) -> list[AppModule]:
    modules = [AppModule("cloud-archive", "cloud", app_cfg.cloud_archive_mi),
               AppModule("signal-controller", "proxy", app_cfg.signal_controller_mi)]
    for fog in topology.fog_nodes():
        modules.append(AppModule("picture-capture", fog, None))
        modules.append(AppModule("slot-detector", fog, app_cfg.slot_detector_mi))
    resident: dict[str, float] = {}
    for m in modules:
        resident[m.host] = resident.get(m.host, 0.0) + app_cfg.module_ram_mb
    for host, mb in resident.items():
        if mb > topology.devices[host].ram:
            raise TopologyError(f"{host}: modules need {mb} MB RAM, device has {topology.devices[host].ram}")
    return modules


class TrafficApp:
    def __init__(self, kernel: Kernel, topology: Topology, network: Network,
                 processors: dict[str, Processor], rng: RngStreams, app_cfg,
                 queue_length: Callable[[int], int], signal_of: Callable[[int], Signal],
                 observe: Callable[[int, int], None]):
        self.kernel = kernel
        self.topology = topology
        self.network = network
        self.processors = processors
        self.rng = rng
        self.cfg = app_cfg
        self.queue_length = queue_length
        self.signal_of = signal_of
        self.observe = observe
        self.modules = place_modules(topology, app_cfg)
        self.loop = AppLoop(LOOP_MODULES)
        self.frames_emitted = 0
        self.archived = 0
        self.decisions = 0
        self.pushed: dict[int, Signal | None] = {}
        self.commanded: dict[str, bool] = {}
        self.led_on: dict[str, bool] = {}
        self.led_log: list[tuple[int, str, bool]] = []
        self.frame_log: list[tuple[int, int]] = []
        self.roads = len(topology.fog_nodes())
        for road in range(self.roads):
            self.pushed[road] = None
            for color in LED_COLORS:
                led = topology.led_of(fog_name(road), color)
                self.commanded[led] = False
                self.led_on[led] = False

    # sensing

    def start_sensor(self, camera: str, period: int, until: int) -> None:
        if period <= 0:
            raise ValueError("sensor period must be positive")
        road = int(camera.rsplit("-", 1)[1])

        def emit() -> None:
            self.emit_frame(camera, road)
            if self.kernel.now + period <= until:
                self.kernel.schedule("sensor-emit", period, emit)

        if period <= until:
            self.kernel.schedule("sensor-emit", period, emit)

    def emit_frame(self, camera: str, road: int) -> Tuple:
        stream = self.rng.stream(camera)
        cpu = stream.randint(self.cfg.frame_cpu.min, self.cfg.frame_cpu.max)
        nw = stream.randint(self.cfg.frame_nw.min, self.cfg.frame_nw.max)
        fog = fog_name(road)
        frame = self.network.new_tuple("FRAME", camera, fog, cpu, nw, road=road,
                                       count=self.queue_length(road))
        self.frames_emitted += 1
        self.frame_log.append((self.kernel.now, road))
        self.network.transmit(frame, camera, fog, self._frame_delivered)
        return frame

    def _frame_delivered(self, frame: Tuple) -> None:
        fog = frame.destination
        proc = self.processors[fog]
        # picture-capture at the frame's own cost, then slot-detector
        proc.execute(frame, lambda f: proc.execute(
            f, lambda g: self.on_frame(fog, g), cpu_length=self.cfg.slot_detector_mi))

    def on_frame(self, fog: str, frame: Tuple) -> tuple[Tuple, Tuple]:
        road = frame.data["road"]
        status = self.network.new_tuple("SLOT_STATUS", fog, "proxy", self.cfg.signal_controller_mi,
                                        self.cfg.slot_status_kb, road=road, count=frame.data["count"],
                                        origin=frame.created_at)
        archive = self.network.new_tuple("CLOUD_ARCHIVE", fog, "cloud", self.cfg.cloud_archive_mi,
                                         frame.nw_length, road=road)
        self.network.transmit(status, fog, "proxy", lambda t: self.processors["proxy"].execute(t, self._decide))
        self.network.transmit(archive, fog, "cloud", lambda t: self.processors["cloud"].execute(t, self._archived))
        return status, archive

    def _archived(self, tup: Tuple) -> None:
        self.archived += 1

    # decision and actuation

    def _decide(self, status: Tuple) -> None:
        road = status.data["road"]
        self.observe(road, status.data["count"])
        self.decisions += 1
        desired = self.signal_of(road)
        origin = status.data["origin"]
        if self.pushed[road] == desired:
            self.loop.samples.append(self.kernel.now - origin)
            return
        self.pushed[road] = desired
        fog = fog_name(road)
        cmd = self.network.new_tuple("LED_COMMAND", "proxy", fog, 0, self.cfg.led_command_kb,
                                     road=road, state=desired.value, origin=origin)
        self.network.transmit(cmd, "proxy", fog, self._command_at_fog)

    def _command_at_fog(self, cmd: Tuple) -> None:
        road = cmd.data["road"]
        assignment = LedAssignment.of({road: Signal(cmd.data["state"])})
        sent = self.update_leds(fog_name(road), assignment, origin=cmd.data["origin"])
        if not sent:
            self.loop.samples.append(self.kernel.now - cmd.data["origin"])

    def update_leds(self, fog: str, assignment: LedAssignment, origin: int | None = None) -> list[Tuple]:
        """Send LED_COMMANDs for the LEDs of ``fog`` whose commanded state changes."""
        road = int(fog.rsplit("-", 1)[1])
        if road not in assignment.lit:
            raise ControllerError(f"assignment has no entry for road {road}")
        active = assignment.state(road).value.lower()
        changes = []
        for color in LED_COLORS:
            led = self.topology.led_of(fog, color)
            want = color == active
            if self.commanded[led] != want:
                self.commanded[led] = want
                changes.append((led, want))
        sent = []
        pending = {"n": len(changes)}
        for led, want in changes:
            tup = self.network.new_tuple("LED_COMMAND", fog, led, 0, self.cfg.led_command_kb,
                                         road=road, on=want, origin=origin)

            def commit(t: Tuple) -> None:
                self.led_on[t.destination] = t.data["on"]
                self.led_log.append((self.kernel.now, t.destination, t.data["on"]))
                pending["n"] -= 1
                if pending["n"] == 0 and t.data["origin"] is not None:
                    self.loop.samples.append(self.kernel.now - t.data["origin"])

            self.network.transmit(tup, fog, led, commit)
            sent.append(tup)
        return sent

    def displayed(self, road: int) -> list[str]:
        fog = fog_name(road)
        return [c for c in LED_COLORS if self.led_on[self.topology.led_of(fog, c)]]
