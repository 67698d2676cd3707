import csv
import json

import pytest

from fogsignal import cli
from fogsignal.cli import main
from fogsignal.config import load_config


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_run_writes_outputs(tmp_path, capsys):
    assert main(["run", "--duration", "120", "--out", str(tmp_path)]) == 0
    for name in ("summary.csv", "throughput.csv", "delay.csv", "energy.csv", "effective_config.json", "run_info.json"):
        assert (tmp_path / name).exists(), name
    (row,) = rows(tmp_path / "summary.csv")
    assert row["controller"] == "itcms" and row["CTT"] == "5" and row["ET"] == ""
    assert "ALD=" in capsys.readouterr().out


def test_same_seed_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["run", "--duration", "300", "--seed", "7", "--out", str(out)]) == 0
    for name in ("summary.csv", "throughput.csv", "delay.csv", "energy.csv", "effective_config.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_wallclock_flag_fills_et(tmp_path):
    assert main(["run", "--duration", "60", "--wallclock", "--out", str(tmp_path)]) == 0
    (row,) = rows(tmp_path / "summary.csv")
    assert float(row["ET"]) >= 0
    assert json.loads((tmp_path / "run_info.json").read_text())["execution_time_wall_s"] >= 0


def test_effective_config_round_trips(tmp_path):
    first, second = tmp_path / "first", tmp_path / "second"
    assert main(["run", "--duration", "90", "--roads", "3", "--controller", "iov", "--out", str(first)]) == 0
    cfg = load_config(first / "effective_config.json")
    assert cfg.fog_node_count == 3 and cfg.controller.kind == "iov"
    assert main(["run", "--config", str(first / "effective_config.json"), "--out", str(second)]) == 0
    assert (first / "delay.csv").read_bytes() == (second / "delay.csv").read_bytes()


def test_flags_override_config_file(tmp_path):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"seed": 3, "duration_s": 60}))
    assert main(["run", "--config", str(conf), "--seed", "4", "--out", str(tmp_path / "o")]) == 0
    assert load_config(tmp_path / "o" / "effective_config.json").seed == 4


@pytest.mark.parametrize("argv", [
    ["run", "--roads", "0"],
    ["run", "--controller", "nope"],
    ["run", "--scenario", "nope"],
    ["compare", "--controllers", "itcms"],
    ["compare", "--controllers", "itcms,bogus"],
    ["sweep", "--nodes", "4,0"],
])
def test_config_errors_exit_2(argv, tmp_path, capsys):
    assert main(argv + ["--out", str(tmp_path)]) == 2
    assert "config error" in capsys.readouterr().err


def test_unknown_controller_names_options(tmp_path, capsys):
    main(["compare", "--controllers", "itcms,bogus", "--out", str(tmp_path)])
    err = capsys.readouterr().err
    assert "bogus" in err and "itcms" in err and "stl" in err and "iov" in err


def test_bad_config_file_exit_2(tmp_path, capsys):
    conf = tmp_path / "bad.json"
    conf.write_text(json.dumps({"traffic": {"crossing_time_s": -1}}))
    assert main(["run", "--config", str(conf), "--out", str(tmp_path)]) == 2
    assert "traffic.crossing_time_s" in capsys.readouterr().err


def test_runtime_failure_exit_3(tmp_path, monkeypatch):
    def boom(config):
        raise RuntimeError("scheduler exploded")
    monkeypatch.setattr(cli, "run_scenario", boom)
    assert main(["run", "--duration", "10", "--out", str(tmp_path / "x")]) == 3
    assert not (tmp_path / "x" / "summary.csv").exists()


def test_compare_three_controllers(tmp_path):
    assert main(["compare", "--duration", "300", "--out", str(tmp_path)]) == 0
    got = rows(tmp_path / "compare.csv")
    assert [r["controller"] for r in got] == ["itcms", "stl", "iov"]
    assert got[0]["delay_diff_pct"] == "0"
    for name in ("itcms", "stl", "iov"):
        assert (tmp_path / name / "summary.csv").exists()


def test_compare_parallel_matches_serial(tmp_path):
    serial, par = tmp_path / "s", tmp_path / "p"
    assert main(["compare", "--duration", "120", "--controllers", "itcms,stl", "--out", str(serial)]) == 0
    assert main(["compare", "--duration", "120", "--controllers", "itcms,stl", "--jobs", "2", "--out", str(par)]) == 0
    assert (serial / "compare.csv").read_bytes() == (par / "compare.csv").read_bytes()


def test_sweep_rows(tmp_path):
    assert main(["sweep", "--duration", "120", "--out", str(tmp_path)]) == 0
    got = rows(tmp_path / "sweep.csv")
    assert [int(r["NoFN"]) for r in got] == [4, 8, 14]
    assert all(r["CTT"] == "5" for r in got)
    ttfu = [float(r["TTFU"]) for r in got]
    assert ttfu[0] < ttfu[1] < ttfu[2]


def test_sweep_single_node(tmp_path):
    assert main(["sweep", "--nodes", "1", "--duration", "60", "--out", str(tmp_path)]) == 0
    assert len(rows(tmp_path / "sweep.csv")) == 1


def test_print_default_config(capsys):
    assert main(["print-default-config"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["fog_node_count"] == 4 and data["controller"]["kind"] == "itcms"
    assert data["links"] == {"cloud_proxy": 200, "proxy_fog": 100, "fog_edge": 50}
