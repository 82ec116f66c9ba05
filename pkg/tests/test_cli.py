import json
import os

import numpy as np
import pytest
from click.testing import CliRunner

from robinlab import binary_cascade_sample
from robinlab.cli import main

CASCADE_SCALES = ",".join(str(2.0 ** (-j)) for j in range(5, 12))


@pytest.fixture()
def runner():
    return CliRunner()


def run(runner, args, **kw):
    return runner.invoke(main, args, catch_exceptions=False, **kw)


def make_geometry(runner, out_dir, *extra):
    res = run(runner, ["geometry", "--family", "quadratic-koch-island",
                       "--generation", "1", "--with-source",
                       "--name", "quad1.json", "--out", out_dir, *extra])
    assert res.exit_code == 0, res.output
    return os.path.join(out_dir, "quad1.json")


# ---------------------------------------------------------------------------
# geometry


def test_geometry_summaries(runner, tmp_path):
    res = run(runner, ["geometry", "--family", "quadratic-koch-island",
                       "--generation", "1", "--out", str(tmp_path)])
    assert res.exit_code == 0
    assert "32 edges, perimeter 8" in res.output
    res = run(runner, ["geometry", "--family", "triadic-koch-snowflake",
                       "--generation", "2", "--out", str(tmp_path)])
    assert res.exit_code == 0
    assert "48 edges, perimeter 5.3333" in res.output


def test_geometry_resource_guard_exit_2(runner, tmp_path):
    res = run(runner, ["geometry", "--generation", "9", "--out", str(tmp_path)])
    assert res.exit_code == 2


def test_geometry_writes_valid_file(runner, tmp_path):
    path = make_geometry(runner, str(tmp_path))
    doc = json.loads(open(path).read())
    assert doc["family"] == "quadratic-koch-island"
    assert "source" in doc


# ---------------------------------------------------------------------------
# solve


def test_solve_outputs_and_sidecar(runner, tmp_path):
    geom = make_geometry(runner, str(tmp_path))
    res = run(runner, ["solve", "--geometry", geom, "--a", "2", "--h",
                       "0.03125", "--out", str(tmp_path)])
    assert res.exit_code == 0, res.output
    side = json.loads(open(tmp_path / "solve.json").read())
    for key in ("h", "a", "tol", "iterations", "residual", "F",
                "source_flux", "robinlab_version", "config_hash"):
        assert key in side
    assert side["F"] > 0
    assert (tmp_path / "solve-field.csv").exists()
    assert (tmp_path / "solve-flux.csv").exists()


def test_solve_a_zero_flux_zero(runner, tmp_path):
    geom = make_geometry(runner, str(tmp_path))
    res = run(runner, ["solve", "--geometry", geom, "--a", "0", "--h",
                       "0.03125", "--out", str(tmp_path)])
    assert res.exit_code == 0
    assert json.loads(open(tmp_path / "solve.json").read())["F"] == 0.0


def test_solve_missing_geometry_exit_2(runner, tmp_path):
    res = run(runner, ["solve", "--geometry", str(tmp_path / "nope.json"),
                       "--a", "1", "--h", "0.05", "--out", str(tmp_path)])
    assert res.exit_code == 2


def test_solve_rerun_byte_identical(runner, tmp_path):
    geom = make_geometry(runner, str(tmp_path))
    for prefix in ("r1", "r2"):
        run(runner, ["solve", "--geometry", geom, "--a", "2", "--h",
                     "0.03125", "--prefix", prefix, "--out", str(tmp_path)])
    b1 = (tmp_path / "r1-field.csv").read_bytes()
    b2 = (tmp_path / "r2-field.csv").read_bytes()
    assert b1 == b2


# ---------------------------------------------------------------------------
# walk


def test_walk_outputs_and_determinism(runner, tmp_path):
    geom = make_geometry(runner, str(tmp_path))
    for prefix in ("w1", "w2"):
        res = run(runner, ["walk", "--geometry", geom, "--a", "3",
                           "--n-walks", "500", "--seed", "7",
                           "--prefix", prefix, "--out", str(tmp_path)])
        assert res.exit_code == 0, res.output
    assert ((tmp_path / "w1-hits.csv").read_bytes()
            == (tmp_path / "w2-hits.csv").read_bytes())
    side = json.loads(open(tmp_path / "w1.json").read())
    for key in ("seed", "eps", "a", "n_walks", "timeout_count"):
        assert key in side
    assert side["n_walks"] == 500


def test_walk_measure_mode_a_zero_exit_2(runner, tmp_path):
    geom = make_geometry(runner, str(tmp_path))
    res = run(runner, ["walk", "--geometry", geom, "--a", "0", "--mode",
                       "absent", "--out", str(tmp_path)])
    assert res.exit_code == 2


# ---------------------------------------------------------------------------
# measure


def cascade_hits_csv(path, n=120_000):
    arcs = binary_cascade_sample(n, seed=13)
    with open(path, "w") as f:
        f.write("walk_id,outcome,arc,edge_id,reflections,steps\n")
        for i, s in enumerate(arcs):
            f.write(f"{i},absorbed,{s:.17g},0,0,1\n")


def test_measure_cascade_fixture(runner, tmp_path):
    hits = tmp_path / "cascade-hits.csv"
    cascade_hits_csv(hits)
    res = run(runner, ["measure", "--hits", str(hits), "--perimeter", "1.0",
                       "--estimator", "arc", "--scales", CASCADE_SCALES,
                       "--qs", "1,2", "--out", str(tmp_path)])
    assert res.exit_code == 0, res.output
    doc = json.loads(open(tmp_path / "measure.json").read())
    d1, d2 = doc["exponents"]
    assert abs(d1 - 0.91830) < 0.03
    assert abs(d2 - 0.84799) < 0.03
    for key in ("estimator", "qs", "scales", "stderrs", "r2", "window"):
        assert key in doc
    assert (tmp_path / "measure-pairs.csv").exists()


def test_measure_requires_inputs(runner, tmp_path):
    res = run(runner, ["measure", "--out", str(tmp_path)])
    assert res.exit_code == 2


# ---------------------------------------------------------------------------
# sweep


def test_sweep_a_star_and_naming(runner, tmp_path):
    geom = make_geometry(runner, str(tmp_path))
    res = run(runner, ["sweep", "--kind", "a", "--method", "fd",
                       "--geometry", geom, "--h", "0.03125",
                       "--a-list", "0.05,0.2,0.8,3,12,50",
                       "--out", str(tmp_path)])
    assert res.exit_code == 0, res.output
    csvs = [p for p in os.listdir(tmp_path)
            if p.startswith("a-sweep-quadratic-koch-island-g1-")
            and p.endswith(".csv")]
    assert len(csvs) == 1
    side = json.loads(open(tmp_path / csvs[0].replace(".csv", ".json")).read())
    assert side["a_star"] > 0


# ---------------------------------------------------------------------------
# config file, env override


def test_config_file_and_flag_override(runner, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"family": "quadratic-koch-island",
                               "generation": 2, "out_dir": str(tmp_path)}))
    res = run(runner, ["geometry", "--config", str(cfg)])
    assert res.exit_code == 0
    assert "256 edges" in res.output
    # flags win over the config file
    res = run(runner, ["geometry", "--config", str(cfg), "--generation", "1"])
    assert "32 edges" in res.output


def test_config_unknown_key_exit_2(runner, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"famly": "square"}))
    res = run(runner, ["geometry", "--config", str(cfg),
                       "--out", str(tmp_path)])
    assert res.exit_code == 2
    assert "famly" in res.output


def test_env_out_override(runner, tmp_path, monkeypatch):
    env_dir = tmp_path / "env-out"
    monkeypatch.setenv("ROBINLAB_OUT", str(env_dir))
    res = run(runner, ["geometry", "--family", "square",
                       "--out", str(tmp_path / "flag-out")])
    assert res.exit_code == 0
    assert (env_dir / "geometry.json").exists()
    assert not (tmp_path / "flag-out" / "geometry.json").exists()
