"""Command-line front end: run, compare, sweep, print-default-config."""

from __future__ import annotations

import argparse
import json
import logging
import resource
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Sequence

from fogsignal.config import CONTROLLER_NAMES, ConfigError, ScenarioConfig, build_config, load_config
from fogsignal.metrics import (MetricsReport, compare, compare_csv, report, summary_csv, sweep_csv,
                               write_run_outputs)
from fogsignal.simulation import RunRecord, run_scenario

log = logging.getLogger("fogsignal")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

# Fixed-cycle worked example: two cars every 15 s, three leave every 6 s of green.
SCENARIOS: dict[str, dict[str, Any]] = {
    "paper-default": {},
    "stl-paper": {
        "name": "stl-paper",
        "traffic": {"crossing_time_s": 2.0,
                    "arrivals": {"kind": "deterministic", "interval_s": 15, "batch": 2}},
        "controller": {"kind": "stl", "yellow_s": 0},
    },
}


def _csv_list(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in _csv_list(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def flag_overrides(args: argparse.Namespace) -> dict[str, Any]:
    out: dict[str, Any] = {}
    if getattr(args, "roads", None) is not None:
        out["fog_node_count"] = args.roads
    if getattr(args, "controller", None) is not None:
        out.setdefault("controller", {})["kind"] = args.controller
    if getattr(args, "duration", None) is not None:
        out["duration_s"] = args.duration
    if getattr(args, "seed", None) is not None:
        out["seed"] = args.seed
    if getattr(args, "out", None) is not None:
        out["output_dir"] = args.out
    return out


def resolve_config(args: argparse.Namespace) -> ScenarioConfig:
    if args.scenario not in SCENARIOS:
        raise ConfigError(f"scenario: unknown {args.scenario!r}; choose from {', '.join(SCENARIOS)}")
    base = SCENARIOS[args.scenario]
    flags = flag_overrides(args)
    if args.config:
        return load_config(args.config, flags) if not base else build_config(
            base, json.loads(Path(args.config).read_text(encoding="utf-8")), flags)
    return build_config(base, flags)


def _write(out: Path, record: RunRecord, m: MetricsReport, wallclock: bool) -> None:
    record.config = record.config.model_copy(update={"output_dir": None})
    write_run_outputs(out, record, m, wallclock)
    info = {"execution_time_wall_s": round(m.execution_time_wall, 6),
            "peak_rss_kb": resource.getrusage(resource.RUSAGE_SELF).ru_maxrss,
            "events_dispatched": record.summary.events_dispatched,
            "final_clock_ms": record.summary.final_clock}
    (out / "run_info.json").write_text(json.dumps(info, indent=2) + "\n", encoding="utf-8")


def _run_and_write(config: ScenarioConfig, out: Path, wallclock: bool) -> MetricsReport:
    # output files land only after the run completes
    record = run_scenario(config)
    m = report(record)
    _write(out, record, m, wallclock)
    return m


def _run_many(jobs: list[tuple[ScenarioConfig, Path]], workers: int, wallclock: bool) -> list[MetricsReport]:
    if workers <= 1 or len(jobs) <= 1:
        return [_run_and_write(c, o, wallclock) for c, o in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_run_and_write, c, o, wallclock) for c, o in jobs]
        return [f.result() for f in futures]


def _print_summary(m: MetricsReport) -> None:
    delay = "no data" if m.total_average_delay is None else f"{m.total_average_delay:.2f} s"
    ald = "no data" if m.application_loop_delay is None else f"{m.application_loop_delay:.1f} ms"
    print(f"[{m.controller}] roads={m.roads} seed={m.seed} ET={m.execution_time_wall:.2f}s ALD={ald} "
          f"CTT={m.camera_transmission_time:g}s TTFU={m.total_traffic_flow_usage:g}KB "
          f"crossed={m.crossed} queued={m.still_queued} blocked={m.blocked} delay={delay}")


def cmd_run(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    m = _run_and_write(config, Path(config.output_dir or "out"), args.wallclock)
    _print_summary(m)
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    names = _csv_list(args.controllers)
    unknown = [n for n in names if n not in CONTROLLER_NAMES]
    if unknown:
        raise ConfigError(f"controllers: unknown {unknown[0]!r}; valid options are {', '.join(CONTROLLER_NAMES)}")
    if len(names) < 2:
        raise ConfigError("controllers: compare needs at least two controllers")
    if len(set(names)) != len(names):
        raise ConfigError("controllers: duplicate controller name")
    base = resolve_config(args)
    configs = [build_config(base.model_dump(mode="json"), {"controller": {"kind": n}}) for n in names]
    out = Path(base.output_dir or "out")
    reports = _run_many([(c, out / c.controller.kind) for c in configs], args.jobs, args.wallclock)
    for m in reports:
        _print_summary(m)
    rows = compare(reports)
    out.mkdir(parents=True, exist_ok=True)
    (out / "compare.csv").write_text(compare_csv(rows), encoding="utf-8")
    (out / "summary.csv").write_text(summary_csv(reports, args.wallclock), encoding="utf-8")
    for r in rows:
        if r.delay_diff_pct is not None:
            print(f"  {r.controller}: reference delay is {r.delay_diff_pct:.1f}% lower")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    counts = args.nodes
    if not counts:
        raise ConfigError("nodes: need at least one fog-node count")
    bad = [n for n in counts if n < 1]
    if bad:
        raise ConfigError(f"nodes: fog-node count must be >= 1, got {bad[0]}")
    base = resolve_config(args)
    configs = [build_config(base.model_dump(mode="json"), {"fog_node_count": n}) for n in counts]
    out = Path(base.output_dir or "out")
    reports = _run_many([(c, out / f"nofn-{c.fog_node_count}") for c in configs], args.jobs, args.wallclock)
    for m in reports:
        _print_summary(m)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.csv").write_text(sweep_csv(reports, args.wallclock), encoding="utf-8")
    return EXIT_OK


def cmd_print_default(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    sys.stdout.write(config.to_json())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fogsignal", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, controller: bool = True) -> None:
        p.add_argument("--config", metavar="PATH", help="JSON scenario file layered over the defaults")
        p.add_argument("--scenario", default="paper-default", help=f"built-in base ({', '.join(SCENARIOS)})")
        p.add_argument("--roads", type=int, help="fog nodes (one road each)")
        if controller:
            p.add_argument("--controller", help="itcms | stl | iov")
        p.add_argument("--duration", type=float, metavar="S", help="simulated seconds")
        p.add_argument("--seed", type=int, metavar="U64")
        p.add_argument("--out", metavar="DIR")
        p.add_argument("--wallclock", action="store_true", help="write host execution time into the CSVs")

    p = sub.add_parser("run", help="run one simulation")
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="same scenario and seed under several controllers")
    common(p, controller=False)
    p.add_argument("--controllers", default="itcms,stl,iov", metavar="A,B")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="one run per fog-node count")
    common(p)
    p.add_argument("--nodes", type=_int_list, default=[4, 8, 14], metavar="L")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("print-default-config", help="print the effective configuration as JSON")
    p.add_argument("--config", metavar="PATH")
    p.add_argument("--scenario", default="paper-default")
    p.set_defaults(func=cmd_print_default)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # runtime failure inside a simulation
        log.debug("run failed", exc_info=True)
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
