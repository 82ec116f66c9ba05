import json
import os
import shutil

import pytest

from membrane_plots import flux_profile, histogram, scaling, sweep
from membrane_plots.io import (SchemaError, read_flux_csv, read_hits_csv,
                               read_measure_json, read_pairs_csv,
                               read_sweep_csv)

FX = os.path.join(os.path.dirname(__file__), "fixtures")


def fx(name):
    return os.path.join(FX, name)


# ---------------------------------------------------------------------------
# readers


def test_read_sweep_fixture():
    sw = read_sweep_csv(fx("annulus-sweep.csv"))
    assert sw["swept"] == "a"
    assert len(sw["var"]) == 16
    assert all(s == "ok" for s in sw["status"])


def test_read_measure_fixture():
    doc = read_measure_json(fx("cascade-measure.json"))
    assert doc["estimator"] == "arc"
    assert abs(doc["exponents"][0] - 0.9183) < 0.03
    lns, ent = read_pairs_csv(fx("cascade-measure-pairs.csv"))
    assert len(lns) == len(doc["scales"])


def test_read_flux_and_hits_fixtures():
    prof = read_flux_csv(fx("square-solve-flux.csv"))
    assert (prof["arc_end"] - prof["arc_start"]).min() > 0
    arcs, n_total = read_hits_csv(fx("dirichlet-hits.csv"))
    assert n_total == 20_000
    assert len(arcs) == 20_000


# ---------------------------------------------------------------------------
# renders


def test_plot_sweep(tmp_path, capsys):
    out = tmp_path / "sweep.png"
    rc = sweep.main([fx("annulus-sweep.csv"),
                     "--crossover", fx("annulus-crossover.json"),
                     "--out", str(out)])
    assert rc == 0
    assert out.stat().st_size > 5000


def test_plot_sweep_deterministic(tmp_path):
    outs = []
    for name in ("a.png", "b.png"):
        out = tmp_path / name
        assert sweep.main([fx("annulus-sweep.csv"), "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_plot_scaling_prints_slope(tmp_path, capsys):
    out = tmp_path / "scaling.png"
    rc = scaling.main([fx("cascade-measure.json"),
                       fx("cascade-measure-pairs.csv"), "--out", str(out)])
    assert rc == 0
    printed = capsys.readouterr().out
    doc = json.load(open(fx("cascade-measure.json")))
    assert f"slope {doc['d1']['exponent']:.4f}" in printed
    assert abs(doc["d1"]["exponent"] - 0.9183) < 0.03
    assert out.exists()


def test_plot_flux_profile(tmp_path):
    out = tmp_path / "flux.png"
    rc = flux_profile.main([fx("square-solve-flux.csv"),
                            "--geometry", fx("square.json"),
                            "--out", str(out)])
    assert rc == 0
    assert out.exists()


def test_plot_histogram(tmp_path):
    out = tmp_path / "hist.png"
    rc = histogram.main([fx("dirichlet-hits.csv"), fx("robin-hits.csv"),
                         "--labels", "dirichlet,robin", "--out", str(out)])
    assert rc == 0
    assert out.exists()


# ---------------------------------------------------------------------------
# schema failures exit nonzero


def perturb_header(src, dst, old, new):
    text = open(src).read()
    assert text.startswith(old)
    with open(dst, "w") as f:
        f.write(new + text[len(old):])


def test_sweep_schema_mismatch(tmp_path):
    bad = tmp_path / "bad.csv"
    perturb_header(fx("annulus-sweep.csv"), bad, "a,F,", "a,total_flux,")
    rc = sweep.main([str(bad), "--out", str(tmp_path / "x.png")])
    assert rc != 0


def test_sweep_empty_csv(tmp_path):
    bad = tmp_path / "empty.csv"
    bad.write_text("")
    assert sweep.main([str(bad), "--out", str(tmp_path / "x.png")]) != 0


def test_flux_schema_mismatch(tmp_path):
    bad = tmp_path / "bad.csv"
    perturb_header(fx("square-solve-flux.csv"), bad,
                   "arc_start,", "arc_begin,")
    rc = flux_profile.main([str(bad), "--out", str(tmp_path / "x.png")])
    assert rc != 0


def test_hits_schema_mismatch(tmp_path):
    bad = tmp_path / "bad.csv"
    perturb_header(fx("dirichlet-hits.csv"), bad, "walk_id,", "id,")
    rc = histogram.main([str(bad), "--out", str(tmp_path / "x.png")])
    assert rc != 0


def test_measure_missing_field(tmp_path):
    doc = json.load(open(fx("cascade-measure.json")))
    del doc["exponents"]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    rc = scaling.main([str(bad), fx("cascade-measure-pairs.csv"),
                       "--out", str(tmp_path / "x.png")])
    assert rc != 0
