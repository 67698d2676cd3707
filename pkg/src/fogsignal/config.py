"""Scenario configuration.

Layering is built-in defaults < config file < command-line flags. The built-in
defaults form the ``paper-default`` scenario: the device and link tables of the
four-road deployment.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, Any, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator


class ConfigError(ValueError):
    """Invalid scenario; the message names the offending key."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class DeviceConfig(_Strict):
    mips: float = Field(gt=0)
    ram: int = Field(ge=0)
    uplink_bw: float = Field(gt=0)
    downlink_bw: float = Field(gt=0)
    rate_per_mips: float = Field(ge=0)
    busy_power: float = Field(ge=0)
    idle_power: float = Field(ge=0)

    @model_validator(mode="after")
    def _power_order(self) -> "DeviceConfig":
        if self.busy_power < self.idle_power:
            raise ValueError("busy_power must be >= idle_power")
        return self


# iFogSim's stock power figures; the device tables give no wattage.
_FOG_BUSY, _FOG_IDLE = 107.339, 83.4333


class DevicesConfig(_Strict):
    cloud: DeviceConfig = DeviceConfig(
        mips=500, ram=45000, uplink_bw=1000, downlink_bw=1200, rate_per_mips=1000,
        busy_power=16 * 103, idle_power=16 * 83.25,
    )
    proxy: DeviceConfig = DeviceConfig(
        mips=4000, ram=4500, uplink_bw=1000, downlink_bw=1100, rate_per_mips=500,
        busy_power=_FOG_BUSY, idle_power=_FOG_IDLE,
    )
    fog: DeviceConfig = DeviceConfig(
        mips=1000, ram=3000, uplink_bw=800, downlink_bw=1000, rate_per_mips=400,
        busy_power=_FOG_BUSY, idle_power=_FOG_IDLE,
    )


class LinksConfig(_Strict):
    """Per-tier link latencies, in ``units.time_unit``."""

    cloud_proxy: float = Field(200, ge=0)
    proxy_fog: float = Field(100, ge=0)
    fog_edge: float = Field(50, ge=0)


class UnitsConfig(_Strict):
    time_unit: Literal["ms", "s"] = "ms"
    bw_unit: Literal["KB/s"] = "KB/s"


class UniformRange(_Strict):
    min: int = Field(20, ge=0)
    max: int = Field(100, ge=0)

    @model_validator(mode="after")
    def _ordered(self) -> "UniformRange":
        if self.max < self.min:
            raise ValueError("max must be >= min")
        return self


class AppConfig(_Strict):
    """Application module costs (MI) and payload sizes (KB)."""

    sensor_period_s: float = Field(5.0, gt=0)
    frame_cpu: UniformRange = UniformRange()
    frame_nw: UniformRange = UniformRange()
    slot_detector_mi: float = Field(200, ge=0)
    signal_controller_mi: float = Field(400, ge=0)
    cloud_archive_mi: float = Field(100, ge=0)
    slot_status_kb: float = Field(2, ge=0)
    led_command_kb: float = Field(1, ge=0)
    module_ram_mb: float = Field(64, ge=0)


class DeterministicArrivals(_Strict):
    kind: Literal["deterministic"] = "deterministic"
    interval_s: float = Field(gt=0)
    batch: int = Field(1, ge=1)
    offset_s: float = Field(0.0, ge=0)


class PoissonArrivals(_Strict):
    kind: Literal["poisson"] = "poisson"
    rate_per_s: float = Field(ge=0)


class TraceArrivals(_Strict):
    kind: Literal["trace"] = "trace"
    times_s: list[float]

    @model_validator(mode="after")
    def _sorted(self) -> "TraceArrivals":
        if any(t < 0 for t in self.times_s):
            raise ValueError("trace times must be non-negative")
        if self.times_s != sorted(self.times_s):
            raise ValueError("trace times must be sorted")
        return self


ArrivalProcess = Annotated[
    Union[DeterministicArrivals, PoissonArrivals, TraceArrivals], Field(discriminator="kind")
]


class RoadConfig(_Strict):
    arrivals: ArrivalProcess | None = None
    length_m: float | None = Field(None, gt=0)


class TrafficConfig(_Strict):
    crossing_time_s: float = Field(2.5, gt=0)
    road_length_m: float = Field(400, gt=0)
    car_length_m: float = Field(4.5, gt=0)
    gap_m: float = Field(0.5, ge=0)
    # 12 arrivals per 120 s cycle per road in the fixed-cycle analysis
    arrivals: ArrivalProcess = PoissonArrivals(rate_per_s=0.1)
    roads: dict[int, RoadConfig] = Field(default_factory=dict)


class ItcmsParams(_Strict):
    mu_s: float = Field(2.5, gt=0)


class StlParams(_Strict):
    base_green_s: float = Field(30, gt=0)
    extension_s: float = Field(16, ge=0)
    congestion_threshold: float = Field(0.5, ge=0, le=1)


class IovParams(_Strict):
    headway_s: float = Field(2.5, gt=0)
    car_length_m: float = Field(4.5, gt=0)
    gap_m: float = Field(0.5, ge=0)
    road_length_m: float = Field(400, gt=0)
    occupancy_source: Literal["headway", "sensed"] = "headway"


ControllerKindName = Literal["itcms", "stl", "iov"]
CONTROLLER_NAMES: tuple[str, ...] = ("itcms", "stl", "iov")


class ControllerConfig(_Strict):
    kind: ControllerKindName = "itcms"
    yellow_s: float = Field(5.0, ge=0)
    min_cycle_s: float = Field(10.0, gt=0)
    itcms: ItcmsParams = ItcmsParams()
    stl: StlParams = StlParams()
    iov: IovParams = IovParams()


class MetricsConfig(_Strict):
    throughput_bucket_s: float = Field(10.0, gt=0)


class ScenarioConfig(_Strict):
    name: str = "paper-default"
    fog_node_count: int = Field(4, ge=1)
    duration_s: float = Field(3600.0, gt=0)
    seed: int = Field(1, ge=0, lt=2**64)
    drain: bool = True
    devices: DevicesConfig = DevicesConfig()
    links: LinksConfig = LinksConfig()
    units: UnitsConfig = UnitsConfig()
    app: AppConfig = AppConfig()
    traffic: TrafficConfig = TrafficConfig()
    controller: ControllerConfig = ControllerConfig()
    metrics: MetricsConfig = MetricsConfig()
    output_dir: str | None = None

    @model_validator(mode="after")
    def _roads_in_range(self) -> "ScenarioConfig":
        bad = [r for r in self.traffic.roads if not 0 <= r < self.fog_node_count]
        if bad:
            raise ValueError(f"traffic.roads: road index {bad[0]} outside 0..{self.fog_node_count - 1}")
        return self

    def link_latency_ms(self, which: str) -> int:
        value = getattr(self.links, which)
        scale = 1 if self.units.time_unit == "ms" else 1000
        return int(round(value * scale))

    def road_arrivals(self, road: int):
        override = self.traffic.roads.get(road)
        if override is not None and override.arrivals is not None:
            return override.arrivals
        return self.traffic.arrivals

    def road_length(self, road: int) -> float:
        override = self.traffic.roads.get(road)
        if override is not None and override.length_m is not None:
            return override.length_m
        return self.traffic.road_length_m

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"

    def scenario_key(self) -> str:
        """Canonical form with controller kind and output location removed."""
        data = self.model_dump(mode="json")
        data["controller"].pop("kind")
        data.pop("output_dir")
        return json.dumps(data, sort_keys=True)


def _format_error(err: ValidationError) -> str:
    first = err.errors()[0]
    loc = ".".join(str(p) for p in first["loc"] if not str(p).startswith("function-after"))
    msg = first["msg"]
    if first["type"] == "extra_forbidden":
        msg = "unknown key"
    return f"{loc or '<root>'}: {msg}"


def _deep_merge(base: dict[str, Any], override: dict[str, Any]) -> dict[str, Any]:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict) and key not in ("arrivals",):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def default_config() -> ScenarioConfig:
    return ScenarioConfig()


def build_config(*layers: dict[str, Any]) -> ScenarioConfig:
    """Merge override dicts over the built-in defaults and validate."""
    data = default_config().model_dump(mode="json")
    for layer in layers:
        if not isinstance(layer, dict):
            raise ConfigError("<root>: configuration must be a JSON object")
        data = _deep_merge(data, layer)
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_error(exc)) from None


def load_config(path: str | Path, *overrides: dict[str, Any]) -> ScenarioConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    return build_config(raw, *overrides)
