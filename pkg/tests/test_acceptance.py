"""Acceptance gate: one test per criterion, each reported as PASS/FAIL in the summary."""

import random
import time
from fractions import Fraction

import pytest

from checks import safety_violations
from fogsignal.cli import SCENARIOS, main
from fogsignal.config import build_config
from fogsignal.controllers import path
from fogsignal.metrics import recount_usage, report
from fogsignal.simulation import run_scenario
from fogsignal.topology import build_topology
from fogsignal.traffic import (Signal, capacity, cycle_time, green_time, green_times_ms, road_share,
                               stl_arithmetic, total_vehicles)
from test_controllers import PATH_CASES, idx

SEEDS = (1, 2, 3, 4, 5)
CONTROLLERS = ("itcms", "stl", "iov")
SWEEP_NODES = (4, 8, 14)


@pytest.fixture
def detail(record_property):
    return lambda text: record_property("detail", text)


@pytest.fixture(scope="module")
def ordering_suite():
    """Matched 4-road hour, Poisson 0.1 cars/s per road (0.4 total), three controllers, five seeds."""
    started = time.perf_counter()
    runs = {}
    for seed in SEEDS:
        for kind in CONTROLLERS:
            cfg = build_config({"seed": seed, "controller": {"kind": kind}})
            runs[seed, kind] = run_scenario(cfg)
    return runs, time.perf_counter() - started


@pytest.fixture(scope="module")
def sweep_suite():
    """Fixed per-road demand (0.02 cars/s) at 4, 8 and 14 fog nodes."""
    started = time.perf_counter()
    runs = {n: run_scenario(build_config({"fog_node_count": n,
                                          "traffic": {"arrivals": {"kind": "poisson", "rate_per_s": 0.02}}}))
            for n in SWEEP_NODES}
    return runs, time.perf_counter() - started


@pytest.mark.criterion(1, "equations unit suite")
def test_equations(detail):
    counts = [10, 10, 10, 10]
    n_tc = total_vehicles(counts)
    t_t = cycle_time(n_tc, 2.5)
    shares = [road_share(c, n_tc) for c in counts]
    greens = [green_time(k, t_t) for k in shares]
    assert n_tc == 40 and t_t == 100
    assert shares == [Fraction(1, 4)] * 4
    assert greens == [25] * 4 and sum(greens) == t_t

    rng = random.Random(2024)
    started = time.perf_counter()
    worst = 0
    checked = 0
    while checked < 10_000:
        vec = [rng.randint(0, 80) for _ in range(rng.randint(1, 14))]
        total = sum(vec)
        if total == 0:
            continue
        ks = [road_share(c, total) for c in vec]
        assert sum(ks) == 1
        mu_ms = rng.randint(500, 5000)
        ms = green_times_ms(vec, mu_ms)
        assert sum(ms) == mu_ms * total
        # float seconds path: shares as floats, residual measured in ms
        t_t = cycle_time(total, mu_ms / 1000)
        float_sum = sum(green_time(float(k), t_t) for k in ks)
        worst = max(worst, abs(float_sum - t_t) * 1000)
        checked += 1
    elapsed = time.perf_counter() - started
    assert worst <= 1
    assert elapsed < 1.0
    detail(f"10000 vectors in {elapsed:.3f} s, worst residual {worst:.2e} ms")


@pytest.mark.criterion(2, "fixed-cycle arithmetic")
def test_stl_arithmetic(detail):
    assert stl_arithmetic() == {"cycle_s": 120, "arrivals_per_cycle": 12, "exits_per_green": 15}

    rec = run_scenario(build_config(SCENARIOS["stl-paper"]))
    tl = [(t, s) for t, road, s in rec.timeline if road == 0]
    green_start = [t for t, s in tl if s is Signal.GREEN]
    green_end = [t for t, s in tl if s is not Signal.GREEN and t > 0]
    cycles = {b - a for a, b in zip(green_start, green_start[1:])}
    assert cycles == {120_000}

    red_arrivals = {sum(1 for v in rec.vehicles if v.source_road == 0 and end < v.arrival_time <= start)
                    for end, start in zip(green_end, green_start[1:])}
    assert red_arrivals == {12}

    # once the queue is standing (16 arrive per cycle, 15 leave), every 30 s green moves 15 cars
    exits = []
    for start, end in zip(green_start, green_end):
        if end - start != 30_000:
            continue
        exits.append(sum(1 for v in rec.vehicles
                         if v.source_road == 0 and v.crossed_time is not None and start < v.crossed_time <= end))
    saturated = exits[1:]
    assert saturated and set(saturated) == {15}
    detail(f"cycle 120 s over {len(green_start)} greens, 12 arrivals per red, "
           f"15 exits in each of {len(saturated)} saturated greens")


@pytest.mark.criterion(3, "road capacity")
def test_capacity(detail):
    assert capacity(400, 4.5, 0.5) == 80
    assert 2 * capacity(400, 4.5, 0.5) == 160
    detail("80 per road, 160 for two roads")


@pytest.mark.criterion(4, "LED path oracle")
def test_path_oracle(detail):
    for (src, dst), expected in PATH_CASES.items():
        got = path(idx(src), idx(dst), roads=4)
        assert tuple(got.state(r) for r in range(4)) == expected
    assert len(PATH_CASES) == 12
    detail("12 of 12 cases")


@pytest.mark.criterion(5, "latency composition")
def test_latency(detail):
    topo = build_topology(build_config(SCENARIOS["paper-default"]))
    assert topo.route_latency("camera-0", "cloud") == 350
    detail("camera -> cloud 350 ms")


@pytest.mark.criterion(6, "camera transmission time")
def test_ctt(sweep_suite, detail):
    runs, _ = sweep_suite
    ctts = [report(runs[n]).camera_transmission_time for n in SWEEP_NODES]
    assert ctts == [5, 5, 5]
    detail("CTT = 5 s in all sweep rows")


@pytest.mark.criterion(7, "controller ordering")
def test_ordering(ordering_suite, detail):
    runs, elapsed = ordering_suite
    vs_stl, vs_iov = [], []
    for seed in SEEDS:
        m = {k: report(runs[seed, k]) for k in CONTROLLERS}
        d = {k: m[k].total_average_delay for k in CONTROLLERS}
        assert d["itcms"] < d["stl"] and d["itcms"] < d["iov"], (seed, d)
        assert m["itcms"].crossed >= m["stl"].crossed and m["itcms"].crossed >= m["iov"].crossed, seed
        vs_stl.append((d["stl"] - d["itcms"]) / d["stl"])
        vs_iov.append((d["iov"] - d["itcms"]) / d["iov"])
    assert min(vs_stl) >= 0.10 and min(vs_iov) >= 0.10
    assert elapsed < 30
    fmt = lambda xs: "/".join(f"{x * 100:.1f}" for x in xs)
    detail(f"delay reduction vs STL {fmt(vs_stl)} %, vs IoV {fmt(vs_iov)} % (seeds 1-5); {elapsed:.1f} s")


@pytest.mark.criterion(8, "scaling trends")
def test_scaling(sweep_suite, detail):
    runs, elapsed = sweep_suite
    ms = [report(runs[n]) for n in SWEEP_NODES]
    ttfu = [m.total_traffic_flow_usage for m in ms]
    crossed = [m.crossed for m in ms]
    ald = [m.application_loop_delay for m in ms]
    assert ttfu[0] < ttfu[1] < ttfu[2]
    assert crossed[0] < crossed[1] < crossed[2]
    assert ald[0] <= ald[1] <= ald[2]
    assert elapsed < 60
    detail(f"TTFU {[round(x) for x in ttfu]} KB, crossed {crossed}, ALD {[round(x, 1) for x in ald]} ms; "
           f"{elapsed:.1f} s")


@pytest.mark.criterion(9, "determinism")
def test_determinism(tmp_path, detail):
    names = ("summary.csv", "throughput.csv", "delay.csv", "energy.csv")
    for kind in CONTROLLERS:
        outs = [tmp_path / kind / run for run in ("a", "b")]
        for out in outs:
            assert main(["run", "--controller", kind, "--seed", "3", "--out", str(out)]) == 0
        for name in names:
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes(), (kind, name)
    detail("byte-identical CSVs for all three controllers")


@pytest.mark.criterion(10, "conservation")
def test_conservation(ordering_suite, sweep_suite, detail):
    records = list(ordering_suite[0].values()) + list(sweep_suite[0].values())
    for rec in records:
        arrivals = sum(r.arrivals for r in rec.roads)
        crossed = sum(1 for v in rec.vehicles if v.crossed_time is not None)
        queued = sum(len(r.queue) for r in rec.roads)
        blocked = sum(r.blocked for r in rec.roads)
        assert arrivals == len(rec.vehicles) == crossed + queued + blocked
        assert rec.network.in_flight() == 0 and rec.network.delivered == set(rec.network.sent)
        assert rec.network.usage == recount_usage(rec)
    detail(f"{len(records)} runs: vehicles, tuples and TTFU recount all exact")


@pytest.mark.criterion(11, "signal safety")
def test_safety(ordering_suite, sweep_suite, detail):
    records = list(ordering_suite[0].values()) + list(sweep_suite[0].values())
    changes = 0
    for rec in records:
        yellow = rec.config.controller.yellow_s * 1000
        assert safety_violations(rec.timeline, len(rec.roads), yellow, rec.duration_ms) == []
        changes += len(rec.timeline)
    detail(f"{changes} signal changes over {len(records)} timelines, never two greens")
