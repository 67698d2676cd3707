"""Evaluation quantities and CSV reports.

Units in every report: times in seconds except ALD (milliseconds of simulated
time), payloads (TTFU) in KB, energy in power-unit x seconds.
"""

from __future__ import annotations

import csv
import io
import math
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from fogsignal.app import loop_delay
from fogsignal.des import to_ticks
from fogsignal.simulation import RunRecord
from fogsignal.topology import EnergyRow, energy_report
from fogsignal.traffic import Vehicle

SUMMARY_COLUMNS = ["scenario", "controller", "roads", "seed", "duration_s", "ET", "ALD", "CTT", "TTFU",
                   "arrivals", "crossed", "still_queued", "blocked", "total_average_delay_s",
                   "throughput_cars_per_s", "loop_samples", "energy_total", "cost_total"]
THROUGHPUT_COLUMNS = ["bucket_start", "cars_per_sec"]
DELAY_COLUMNS = ["vehicle_id", "source_road", "destination_road", "arrival_s", "crossed_s", "delay_s"]
ENERGY_COLUMNS = ["device", "level", "busy_s", "idle_s", "utilization", "energy", "cost"]
COMPARE_COLUMNS = ["controller", "crossed", "throughput_cars_per_s", "total_average_delay_s",
                   "delay_diff_pct", "throughput_diff_pct"]
SWEEP_COLUMNS = ["NoFN", "ET", "ALD", "CTT", "TTFU", "crossed", "total_average_delay_s"]


class CompareError(ValueError):
    pass


def throughput(vehicles: Iterable[Vehicle], bucket_ms: int, duration_ms: int) -> list[tuple[float, float]]:
    """Cars crossed per second in consecutive buckets covering [0, duration].

    The last bucket may be shorter; its rate uses its true length so the
    series integrates back to the crossed count.
    """
    if bucket_ms <= 0:
        raise ValueError("bucket must be positive")
    n = max(1, math.ceil(duration_ms / bucket_ms))
    counts = [0] * n
    for v in vehicles:
        if v.crossed_time is None:
            continue
        counts[min(v.crossed_time // bucket_ms, n - 1)] += 1
    series = []
    for i, c in enumerate(counts):
        start = i * bucket_ms
        length = min(bucket_ms, duration_ms - start) if duration_ms > start else bucket_ms
        series.append((start / 1000, c / (length / 1000)))
    return series


def series_total(series: Sequence[tuple[float, float]], bucket_ms: int, duration_ms: int) -> float:
    total = 0.0
    for start_s, rate in series:
        start = to_ticks(start_s)
        length = min(bucket_ms, duration_ms - start) if duration_ms > start else bucket_ms
        total += rate * length / 1000
    return total


def total_average_delay(vehicles: Iterable[Vehicle]) -> float | None:
    """Mean crossing delay in seconds over crossed vehicles; None if none crossed."""
    delays = [v.delay for v in vehicles if v.crossed_time is not None]
    if not delays:
        return None
    return statistics.fmean(delays) / 1000


def recount_usage(record: RunRecord) -> float:
    """Network usage rebuilt from tuple paths, independent of the running total."""
    total = 0.0
    for tup_id, tup in record.network.sent.items():
        hops = record.topology.path(tup.source, tup.destination)
        total += tup.nw_length * len(hops)
    return total


@dataclass
class MetricsReport:
    scenario: str
    controller: str
    roads: int
    seed: int
    duration_s: float
    execution_time_wall: float
    application_loop_delay: float | None
    camera_transmission_time: float
    total_traffic_flow_usage: float
    throughput_series: list[tuple[float, float]]
    total_average_delay: float | None
    arrivals: int
    crossed: int
    still_queued: int
    blocked: int
    loop_samples: int
    energy: list[EnergyRow] = field(default_factory=list)
    scenario_key: str = ""

    @property
    def mean_throughput(self) -> float:
        return self.crossed / self.duration_s

    def summary_row(self, wallclock: bool = False) -> dict[str, object]:
        return {
            "scenario": self.scenario,
            "controller": self.controller,
            "roads": self.roads,
            "seed": self.seed,
            "duration_s": _num(self.duration_s),
            "ET": _num(self.execution_time_wall, 3) if wallclock else "",
            "ALD": _num(self.application_loop_delay, 3),
            "CTT": _num(self.camera_transmission_time),
            "TTFU": _num(self.total_traffic_flow_usage),
            "arrivals": self.arrivals,
            "crossed": self.crossed,
            "still_queued": self.still_queued,
            "blocked": self.blocked,
            "total_average_delay_s": _num(self.total_average_delay, 3),
            "throughput_cars_per_s": _num(self.mean_throughput, 6),
            "loop_samples": self.loop_samples,
            "energy_total": _num(sum(e.energy for e in self.energy), 3),
            "cost_total": _num(sum(e.cost for e in self.energy), 3),
        }


def _num(x: float | None, digits: int = 6) -> str:
    if x is None:
        return ""
    if float(x).is_integer():
        return str(int(x))
    return f"{x:.{digits}f}".rstrip("0").rstrip(".")


def report(record: RunRecord) -> MetricsReport:
    cfg = record.config
    bucket = to_ticks(cfg.metrics.throughput_bucket_s)
    crossed = [v for v in record.vehicles if v.crossed_time is not None]
    return MetricsReport(
        scenario=cfg.name,
        controller=cfg.controller.kind,
        roads=cfg.fog_node_count,
        seed=cfg.seed,
        duration_s=cfg.duration_s,
        execution_time_wall=record.wall_s,
        application_loop_delay=loop_delay(record.app.loop.samples),
        camera_transmission_time=cfg.app.sensor_period_s,
        total_traffic_flow_usage=record.network.usage,
        throughput_series=throughput(record.vehicles, bucket, record.duration_ms),
        total_average_delay=total_average_delay(record.vehicles),
        arrivals=sum(r.arrivals for r in record.roads),
        crossed=len(crossed),
        still_queued=sum(len(r.queue) for r in record.roads),
        blocked=sum(r.blocked for r in record.roads),
        loop_samples=len(record.app.loop.samples),
        energy=energy_report(record.processors, record.end_ms),
        scenario_key=cfg.scenario_key(),
    )


@dataclass(frozen=True)
class CompareRow:
    controller: str
    crossed: int
    throughput: float
    delay: float | None
    delay_diff_pct: float | None
    throughput_diff_pct: float | None


def _pct(other: float | None, ref: float | None) -> float | None:
    if other is None or ref is None or other == 0:
        return None
    return (other - ref) / other * 100


def compare(runs: Sequence[MetricsReport]) -> list[CompareRow]:
    """Side-by-side rows; percentages are (row - reference) / row with ITCMS as reference.

    A positive ``delay_diff_pct`` is how much lower the reference delay is than
    the row's. Falls back to the first run when no ITCMS run is present.
    """
    if not runs:
        raise CompareError("nothing to compare")
    for m in runs[1:]:
        if m.scenario_key != runs[0].scenario_key:
            raise CompareError("runs differ in more than the controller (scenario or seed mismatch)")
    ref = next((m for m in runs if m.controller == "itcms"), runs[0])
    return [CompareRow(m.controller, m.crossed, m.mean_throughput, m.total_average_delay,
                       _pct(m.total_average_delay, ref.total_average_delay),
                       _pct(m.mean_throughput, ref.mean_throughput))
            for m in runs]


def _csv(columns: Sequence[str], rows: Iterable[dict[str, object]]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def summary_csv(reports: Sequence[MetricsReport], wallclock: bool = False) -> str:
    return _csv(SUMMARY_COLUMNS, (m.summary_row(wallclock) for m in reports))


def throughput_csv(m: MetricsReport) -> str:
    return _csv(THROUGHPUT_COLUMNS, ({"bucket_start": _num(s), "cars_per_sec": _num(r)}
                                     for s, r in m.throughput_series))


def delay_csv(record: RunRecord) -> str:
    return _csv(DELAY_COLUMNS, ({
        "vehicle_id": v.id,
        "source_road": v.source_road,
        "destination_road": "" if v.destination_road is None else v.destination_road,
        "arrival_s": _num(v.arrival_time / 1000, 3),
        "crossed_s": "" if v.crossed_time is None else _num(v.crossed_time / 1000, 3),
        "delay_s": "" if v.delay is None else _num(v.delay / 1000, 3),
    } for v in record.vehicles))


def energy_csv(m: MetricsReport) -> str:
    return _csv(ENERGY_COLUMNS, ({
        "device": e.device, "level": e.level, "busy_s": _num(e.busy_s, 3), "idle_s": _num(e.idle_s, 3),
        "utilization": _num(e.utilization, 6), "energy": _num(e.energy, 3), "cost": _num(e.cost, 3),
    } for e in m.energy))


def compare_csv(rows: Sequence[CompareRow]) -> str:
    return _csv(COMPARE_COLUMNS, ({
        "controller": r.controller, "crossed": r.crossed, "throughput_cars_per_s": _num(r.throughput, 6),
        "total_average_delay_s": _num(r.delay, 3), "delay_diff_pct": _num(r.delay_diff_pct, 3),
        "throughput_diff_pct": _num(r.throughput_diff_pct, 3),
    } for r in rows))


def sweep_csv(reports: Sequence[MetricsReport], wallclock: bool = False) -> str:
    return _csv(SWEEP_COLUMNS, ({
        "NoFN": m.roads,
        "ET": _num(m.execution_time_wall, 3) if wallclock else "",
        "ALD": _num(m.application_loop_delay, 3),
        "CTT": _num(m.camera_transmission_time),
        "TTFU": _num(m.total_traffic_flow_usage),
        "crossed": m.crossed,
        "total_average_delay_s": _num(m.total_average_delay, 3),
    } for m in reports))


def write_run_outputs(out: Path, record: RunRecord, m: MetricsReport, wallclock: bool = False) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "summary.csv": summary_csv([m], wallclock),
        "throughput.csv": throughput_csv(m),
        "delay.csv": delay_csv(record),
        "energy.csv": energy_csv(m),
        "effective_config.json": record.config.to_json(),
    }
    written = []
    for name, text in files.items():
        path = out / name
        path.write_text(text, encoding="utf-8")
        written.append(path)
    return written
