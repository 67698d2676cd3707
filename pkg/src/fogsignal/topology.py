"""Device hierarchy, tuple transport and execution, energy accounting.

The deployment is a tree: cloud (level 0) -> proxy (level 1) -> fog nodes
(level 2) -> one camera and three LEDs per fog node. Sensors and actuators
have no compute spec; hops whose bandwidth endpoint is one of them carry
latency only.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable

from fogsignal.des import Kernel, to_ticks

LED_COLORS = ("red", "yellow", "green")


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class DeviceSpec:
    name: str
    level: int
    mips: float
    ram: float
    uplink_bw: float
    downlink_bw: float
    rate_per_mips: float
    busy_power: float
    idle_power: float

    def __post_init__(self) -> None:
        if self.level not in (0, 1, 2):
            raise TopologyError(f"{self.name}: level must be 0, 1 or 2")
        if self.mips <= 0 or self.uplink_bw <= 0 or self.downlink_bw <= 0:
            raise TopologyError(f"{self.name}: mips and bandwidths must be positive")
        if not self.busy_power >= self.idle_power >= 0:
            raise TopologyError(f"{self.name}: need busy_power >= idle_power >= 0")


@dataclass(frozen=True)
class Endpoint:
    """A sensor (camera) or actuator (LED) attached to a gateway fog node."""

    name: str
    kind: str  # "camera" | "led"
    color: str | None = None


@dataclass(frozen=True)
class Link:
    parent: str
    child: str
    latency: int  # ms

    def __post_init__(self) -> None:
        if self.latency < 0:
            raise TopologyError(f"link {self.parent}->{self.child}: negative latency")


@dataclass
class Tuple:
    id: int
    tuple_type: str  # FRAME | SLOT_STATUS | LED_COMMAND | CLOUD_ARCHIVE
    source: str
    destination: str
    cpu_length: float
    nw_length: float
    created_at: int
    delivered_at: int | None = None
    executed_at: int | None = None
    data: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.cpu_length < 0 or self.nw_length < 0:
            raise ValueError("tuple lengths must be non-negative")


@dataclass(frozen=True)
class Hop:
    sender: str
    receiver: str
    upward: bool


@dataclass(frozen=True)
class HopRecord:
    sent_at: int
    tuple_id: int
    tuple_type: str
    sender: str
    receiver: str
    nw_length: float


class Topology:
    def __init__(self, devices: list[DeviceSpec], endpoints: list[Endpoint], links: list[Link]):
        self.devices: dict[str, DeviceSpec] = {}
        self.endpoints: dict[str, Endpoint] = {}
        for node in [*devices, *endpoints]:
            if node.name in self.devices or node.name in self.endpoints:
                raise TopologyError(f"duplicate device name {node.name!r}")
            if isinstance(node, DeviceSpec):
                self.devices[node.name] = node
            else:
                self.endpoints[node.name] = node

        self.parent: dict[str, str] = {}
        self.latency: dict[str, int] = {}
        self.children: dict[str, list[str]] = {n: [] for n in self.names()}
        for link in links:
            for end in (link.parent, link.child):
                if end not in self.children:
                    raise TopologyError(f"link references unknown device {end!r}")
            if link.child in self.parent:
                raise TopologyError(f"{link.child!r} has more than one parent")
            self.parent[link.child] = link.parent
            self.latency[link.child] = link.latency
            self.children[link.parent].append(link.child)
        self._validate()

    def names(self) -> list[str]:
        return [*self.devices, *self.endpoints]

    def _validate(self) -> None:
        roots = [n for n in self.names() if n not in self.parent]
        if len(roots) != 1:
            raise TopologyError(f"links must form a single tree, found roots {roots}")
        self.root = roots[0]
        if self.root not in self.devices or self.devices[self.root].level != 0:
            raise TopologyError("tree must be rooted at a level-0 (cloud) device")
        # walk up from each node; a cycle never reaches the root
        for name in self.names():
            seen = {name}
            cur = name
            while cur in self.parent:
                cur = self.parent[cur]
                if cur in seen:
                    raise TopologyError(f"cycle in links through {cur!r}")
                seen.add(cur)
        for name, spec in self.devices.items():
            if name == self.root:
                continue
            parent = self.devices.get(self.parent[name])
            if parent is None or parent.level != spec.level - 1:
                raise TopologyError(f"{name}: level-{spec.level} device must hang off a level-{spec.level - 1} device")
        for name, ep in self.endpoints.items():
            gw = self.devices.get(self.parent[name])
            if gw is None or gw.level != 2:
                raise TopologyError(f"{name}: sensors and actuators attach to fog nodes")
            if self.children[name]:
                raise TopologyError(f"{name}: sensors and actuators are leaves")
        for fog in self.fog_nodes():
            kids = [self.endpoints[c] for c in self.children[fog] if c in self.endpoints]
            cams = [k for k in kids if k.kind == "camera"]
            leds = sorted(k.color or "" for k in kids if k.kind == "led")
            if len(cams) != 1:
                raise TopologyError(f"{fog}: needs exactly one camera, has {len(cams)}")
            if leds != sorted(LED_COLORS):
                raise TopologyError(f"{fog}: needs exactly three LEDs (red, yellow, green), has {leds}")

    def fog_nodes(self) -> list[str]:
        return [n for n, d in self.devices.items() if d.level == 2]

    def by_level(self, level: int) -> list[str]:
        return [n for n, d in self.devices.items() if d.level == level]

    def camera_of(self, fog: str) -> str:
        return next(c for c in self.children[fog] if self.endpoints.get(c, Endpoint("", "")).kind == "camera")

    def led_of(self, fog: str, color: str) -> str:
        return next(c for c in self.children[fog] if c in self.endpoints and self.endpoints[c].color == color)

    def _ancestors(self, name: str) -> list[str]:
        if name not in self.children:
            raise TopologyError(f"unknown device {name!r}")
        chain = [name]
        while chain[-1] in self.parent:
            chain.append(self.parent[chain[-1]])
        return chain

    def path(self, src: str, dst: str) -> list[Hop]:
        up = self._ancestors(src)
        down = self._ancestors(dst)
        common = set(up) & set(down)
        lca = next(n for n in up if n in common)
        hops = [Hop(a, b, True) for a, b in zip(up, up[1:up.index(lca) + 1])]
        descent = down[:down.index(lca) + 1][::-1]
        hops += [Hop(a, b, False) for a, b in zip(descent, descent[1:])]
        return hops

    def hop_latency(self, hop: Hop) -> int:
        child = hop.sender if hop.upward else hop.receiver
        return self.latency[child]

    def route_latency(self, src: str, dst: str) -> int:
        return sum(self.hop_latency(h) for h in self.path(src, dst))

    def serialization_ms(self, hop: Hop, nw_length: float) -> int:
        if nw_length == 0:
            return 0
        end = self.devices.get(hop.sender if hop.upward else hop.receiver)
        if end is None:
            return 0
        bw = end.uplink_bw if hop.upward else end.downlink_bw
        return to_ticks(nw_length / bw)


def build_topology(config) -> Topology:
    """Construct cloud -> proxy -> N fog nodes, each with a camera and three LEDs."""
    n = config.fog_node_count
    if n < 1:
        raise TopologyError("at least one fog node is required")

    def spec(name: str, level: int, dc) -> DeviceSpec:
        return DeviceSpec(name, level, dc.mips, dc.ram, dc.uplink_bw, dc.downlink_bw,
                          dc.rate_per_mips, dc.busy_power, dc.idle_power)

    devices = [spec("cloud", 0, config.devices.cloud), spec("proxy", 1, config.devices.proxy)]
    endpoints: list[Endpoint] = []
    links = [Link("cloud", "proxy", config.link_latency_ms("cloud_proxy"))]
    edge = config.link_latency_ms("fog_edge")
    for i in range(n):
        fog = fog_name(i)
        devices.append(spec(fog, 2, config.devices.fog))
        links.append(Link("proxy", fog, config.link_latency_ms("proxy_fog")))
        cam = Endpoint(f"camera-{i}", "camera")
        endpoints.append(cam)
        links.append(Link(fog, cam.name, edge))
        for color in LED_COLORS:
            led = Endpoint(f"led-{i}-{color}", "led", color)
            endpoints.append(led)
            links.append(Link(fog, led.name, edge))
    return Topology(devices, endpoints, links)


def fog_name(road: int) -> str:
    return f"fog-{road}"


class Network:
    """Moves tuples along tree paths and keeps the network-usage books.

    Delivery delay is the sum over hops of link latency plus payload
    serialization at the hop's bandwidth. Every hop's payload is added to
    ``usage`` and logged, so the total can be recounted independently.
    """

    def __init__(self, kernel: Kernel, topology: Topology):
        self.kernel = kernel
        self.topology = topology
        self.usage = 0.0
        self.hop_log: list[HopRecord] = []
        self.sent: dict[int, Tuple] = {}
        self.delivered: set[int] = set()
        self._ids = itertools.count()

    def new_tuple(self, tuple_type: str, source: str, destination: str, cpu_length: float,
                  nw_length: float, **data: Any) -> Tuple:
        return Tuple(next(self._ids), tuple_type, source, destination, cpu_length, nw_length,
                     created_at=self.kernel.now, data=data)

    def transfer_delay(self, tup: Tuple, src: str, dst: str) -> int:
        return sum(self.topology.hop_latency(h) + self.topology.serialization_ms(h, tup.nw_length)
                   for h in self.topology.path(src, dst))

    def transmit(self, tup: Tuple, src: str, dst: str, on_delivery: Callable[[Tuple], Any]) -> int:
        hops = self.topology.path(src, dst)
        delay = self.transfer_delay(tup, src, dst)
        now = self.kernel.now
        for h in hops:
            self.hop_log.append(HopRecord(now, tup.id, tup.tuple_type, h.sender, h.receiver, tup.nw_length))
            self.usage += tup.nw_length
        self.sent[tup.id] = tup

        def deliver() -> None:
            tup.delivered_at = self.kernel.now
            self.delivered.add(tup.id)
            on_delivery(tup)

        return self.kernel.schedule("tuple-arrival", delay, deliver)

    def in_flight(self) -> int:
        return len(self.sent) - len(self.delivered)


@dataclass
class EnergyLedger:
    busy_ms: int = 0
    busy_since: int | None = None

    def busy_time(self, now: int) -> int:
        if self.busy_since is None:
            return self.busy_ms
        return self.busy_ms + (now - self.busy_since)


class Processor:
    """Single-server FIFO executor for one compute device."""

    def __init__(self, kernel: Kernel, spec: DeviceSpec):
        self.kernel = kernel
        self.spec = spec
        self.queue: deque[tuple[Tuple, Callable[[Tuple], Any] | None, float]] = deque()
        self.ledger = EnergyLedger()
        self.executed = 0

    def service_ms(self, cpu_length: float) -> int:
        return to_ticks(cpu_length / self.spec.mips)

    def execute(self, tup: Tuple, on_complete: Callable[[Tuple], Any] | None = None,
                cpu_length: float | None = None) -> None:
        """Queue ``tup``; ``cpu_length`` overrides the tuple's own cost for this stage."""
        cost = tup.cpu_length if cpu_length is None else cpu_length
        if cost < 0:
            raise ValueError("cpu_length must be non-negative")
        self.queue.append((tup, on_complete, cost))
        if self.ledger.busy_since is None:
            self._start()

    def _start(self) -> None:
        _, _, cost = self.queue[0]
        self.ledger.busy_since = self.kernel.now
        self.kernel.schedule("tuple-execution-complete", self.service_ms(cost), self._finish)

    def _finish(self) -> None:
        tup, callback, _ = self.queue.popleft()
        self.ledger.busy_ms += self.kernel.now - self.ledger.busy_since
        self.ledger.busy_since = None
        tup.executed_at = self.kernel.now
        self.executed += 1
        if self.queue:
            self._start()
        if callback is not None:
            callback(tup)


@dataclass(frozen=True)
class EnergyRow:
    device: str
    level: int
    busy_s: float
    idle_s: float
    utilization: float
    energy: float
    cost: float


def energy_report(processors: dict[str, Processor], elapsed: int) -> list[EnergyRow]:
    """Busy/idle power integration per device; energy in power-units x seconds."""
    if elapsed <= 0:
        raise ValueError("elapsed must be positive")
    rows = []
    for name, proc in processors.items():
        busy = min(proc.ledger.busy_time(elapsed), elapsed)
        idle = elapsed - busy
        s = proc.spec
        energy = (s.busy_power * busy + s.idle_power * idle) / 1000
        # cost line only: rate per MIPS applied to the MIPS consumed while busy
        cost = s.rate_per_mips * s.mips * busy / 1000 / 3600
        rows.append(EnergyRow(name, s.level, busy / 1000, idle / 1000, busy / elapsed, energy, cost))
    return rows
