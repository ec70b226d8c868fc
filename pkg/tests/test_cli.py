import csv
import json
import os
from contextlib import nullcontext

import pytest

from agentsim import cli


def run_cli(*argv):
    return cli.main([str(a) for a in argv])


def test_run_sir_is_deterministic(tmp_path):
    for name in ("a", "b"):
        assert run_cli("run", "sir", "--config", "measles.toml", "--seed", 42, "--set", "days=10", "--out", tmp_path / name) == 0
    for f in ("sir_timeseries.csv", "sir_counts.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_manifest_lists_every_artifact(tmp_path):
    assert run_cli("run", "sir", "--steps", 8, "--out", tmp_path) == 0
    m = json.loads((tmp_path / "manifest.json").read_text())
    assert m["seed"] == 0 and m["steps"] == 8 and "wall_time_seconds" in m
    assert m["population_trajectory"][0] == [0, 2010]
    listed = {p.split("/")[-1] for p in m["artifacts"]}
    on_disk = {p.name for p in tmp_path.iterdir()}
    assert listed == on_disk
    header = (tmp_path / "sir_timeseries.csv").read_text().splitlines()[0]
    assert header == "step,S,I,R"


def test_rerun_from_manifest_reproduces(tmp_path):
    assert run_cli("run", "cell_growth_division", "--seed", 3, "--steps", 5, "--out", tmp_path / "a") == 0
    m = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert run_cli("run", m["scenario"], "--seed", m["seed"], "--steps", m["steps"], "--out", tmp_path / "b") == 0
    name = "cell_growth_division_timeseries.csv"
    assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_unknown_scenario(capsys, tmp_path):
    assert run_cli("run", "bogus", "--out", tmp_path) == 2
    err = capsys.readouterr().err
    assert "sir" in err and "pyramidal" in err


def test_config_parse_error(capsys, tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[simulation]\nseed = 1\nthreads = \n")
    assert run_cli("run", "sir", "--config", bad, "--out", tmp_path) == 2
    assert "line 3" in capsys.readouterr().err


def test_bad_override(tmp_path):
    assert run_cli("run", "sir", "--set", "nonsense=1", "--out", tmp_path) == 2


def test_run_pyramidal_writes_swc(tmp_path):
    assert run_cli("run", "pyramidal", "--steps", 40, "--out", tmp_path) == 0
    assert (tmp_path / "neuron.swc").exists()
    rows = list(csv.DictReader(open(tmp_path / "morphometrics.csv")))
    assert [r["lineage"] for r in rows] == ["apical", "basal", "basal", "basal"]
    assert (tmp_path / "plot_morphometrics.py").exists()


def test_bench_single_thread(tmp_path):
    out = tmp_path / "b.csv"
    assert run_cli("bench", "cell_growth_division", "--threads", "1", "--reps", 3, "--steps", 2, "--out", out) == 0
    rows = list(csv.DictReader(open(out)))
    assert len(rows) == 1 and float(rows[0]["speedup"]) == 1.0 and rows[0]["repetitions"] == "3"


def test_bench_rows_per_thread_count(tmp_path):
    out = tmp_path / "b.csv"
    expect = pytest.warns(UserWarning) if (os.cpu_count() or 1) < 2 else nullcontext()
    with expect:
        assert run_cli("bench", "soma_clustering", "--threads", "1,2", "--reps", 1, "--steps", 2, "--out", out) == 0
    assert [r["threads"] for r in csv.DictReader(open(out))] == ["1", "2"]


def test_bench_bad_input():
    assert run_cli("bench", "nope") == 2
    assert run_cli("bench", "cell_growth_division", "--threads", "0") == 2


def _targets(tmp_path, bounds='[bounds]\ninfection_radius = [3.0, 6.0]\ninfection_probability = [0.4, 0.9]\nmax_move = [20.0, 40.0]\n'):
    t = tmp_path / "targets.toml"
    t.write_text('[targets]\ndisease = "measles"\ndays = 20.0\n' + bounds +
                 "[pso]\nswarm_size = 2\niterations = 1\nrepetitions = 1\nloss_ceiling = 1.0\n")
    return t


def test_calibrate_empty_bounds(tmp_path):
    assert run_cli("calibrate", "sir", "--targets", _targets(tmp_path, "[bounds]\n"), "--out", tmp_path / "f.toml") == 2


def test_calibrate_only_sir(tmp_path):
    assert run_cli("calibrate", "spheroid", "--out", tmp_path / "f.toml") == 2


def test_calibrate_deterministic_and_loadable(tmp_path):
    t = _targets(tmp_path)
    for name in ("f1.toml", "f2.toml"):
        assert run_cli("calibrate", "sir", "--targets", t, "--out", tmp_path / name) == 0
    assert (tmp_path / "f1.toml").read_text() == (tmp_path / "f2.toml").read_text()
    assert (tmp_path / "f1_report.csv").exists()
    assert run_cli("run", "sir", "--config", tmp_path / "f1.toml", "--out", tmp_path / "run") == 0
    m = json.loads((tmp_path / "run" / "manifest.json").read_text())
    assert m["parameters"]["days"] == 20.0


def test_calibrate_loss_ceiling_exit_1(tmp_path):
    t = _targets(tmp_path)
    t.write_text(t.read_text().replace("loss_ceiling = 1.0", "loss_ceiling = 0.0"))
    assert run_cli("calibrate", "sir", "--targets", t, "--out", tmp_path / "f.toml") == 1
    assert (tmp_path / "f.toml").exists()
