import math

import numpy as np
import pytest

from robinlab import (QUADRATIC, SQUARE, TRIADIC, ExperimentError,
                      PrefractalSpec, SourceSpec, SweepResult, SweepRow,
                      detect_crossover, dimension_experiment, emphysema_sweep,
                      make_domain, sweep_a)
from robinlab.experiments import (dimension_report_json, dimension_scales,
                                  read_sweep_csv, write_sweep_csv)

R, R0 = 0.5, 0.05


def annulus_flux(a):
    """Closed-form total flux on the R0-R annulus."""
    return 2.0 * math.pi / (math.log(R / R0) + 1.0 / (a * R))


def synthetic_annulus_sweep(a_list):
    f_inf = 2.0 * math.pi / math.log(R / R0)
    rows = [SweepRow(var=a, F=annulus_flux(a), F_dirichlet_ref=f_inf)
            for a in a_list]
    return SweepResult(swept="a", rows=rows, metadata={"F_dirichlet": f_inf})


# ---------------------------------------------------------------------------
# crossover


def test_crossover_on_closed_form():
    a_list = [0.01 * 2.0 ** k for k in range(18)]
    rep = detect_crossover(synthetic_annulus_sweep(a_list))
    a_star_exact = 1.0 / (R * math.log(R / R0))
    assert a_star_exact == pytest.approx(0.86859, abs=1e-4)
    assert rep.a_star == pytest.approx(a_star_exact, rel=0.02)
    assert rep.bracket[0] <= rep.a_star <= rep.bracket[1]


def test_crossover_needs_bracketing():
    rows = [SweepRow(var=a, F=annulus_flux(a), F_dirichlet_ref=None)
            for a in (100.0, 200.0, 400.0)]  # all already above F_inf/2
    sweep = SweepResult(swept="a", rows=rows,
                        metadata={"F_dirichlet": 2 * math.pi / math.log(R / R0)})
    with pytest.raises(ExperimentError):
        detect_crossover(sweep)


# ---------------------------------------------------------------------------
# a sweeps


@pytest.fixture(scope="module")
def quad1_sweep(quad1_src):
    return sweep_a(quad1_src, [0.1, 0.5, 2.0, 10.0, 50.0], method="fd",
                   h=1.0 / 32.0)


def test_fd_sweep_rows_ok_and_monotone(quad1_sweep):
    rows = quad1_sweep.ok_rows()
    assert len(rows) == 5
    Fs = [r.F for r in rows]
    assert all(b > a for a, b in zip(Fs, Fs[1:]))
    f_inf = quad1_sweep.metadata["F_dirichlet"]
    for r in rows:
        assert 0.0 <= r.F <= min(r.var * r.perimeter, f_inf) * (1 + 1e-9)
        assert r.min_boundary_u > 0.0


def test_sweep_requires_sorted_a(quad1_src):
    with pytest.raises(ExperimentError):
        sweep_a(quad1_src, [1.0, 0.1], method="fd", h=1.0 / 32.0)
    with pytest.raises(ExperimentError):
        sweep_a(quad1_src, [-1.0, 0.1], method="fd", h=1.0 / 32.0)


def test_sweep_csv_round_trip(quad1_sweep, tmp_path):
    path = tmp_path / "sweep.csv"
    write_sweep_csv(quad1_sweep, path)
    back = read_sweep_csv(path)
    assert back.swept == "a"
    for r0, r1 in zip(quad1_sweep.rows, back.rows):
        assert r1.var == pytest.approx(r0.var)
        assert r1.F == pytest.approx(r0.F, rel=1e-12)
        assert r1.status == r0.status


def test_mc_sweep_reports_probe_u(annulus512):
    sweep = sweep_a(annulus512, [1.0, 20.0], method="mc", n_walks=4000,
                    probe=(0.15, 0.0), seed=5)
    rows = sweep.ok_rows()
    assert len(rows) == 2
    assert rows[0].probe_u > rows[1].probe_u  # u decreases with a
    assert rows[0].mean_reflections > rows[1].mean_reflections


# ---------------------------------------------------------------------------
# generation sweep (surface reduction)


def test_emphysema_flux_grows_with_generation():
    sweep = emphysema_sweep(QUADRATIC, [0, 1, 2], a=1.0)
    rows = sweep.ok_rows()
    assert len(rows) == 3
    Fs = [r.F for r in rows]
    perims = [r.perimeter for r in rows]
    assert all(b > a for a, b in zip(Fs, Fs[1:]))
    assert all(b > a for a, b in zip(perims, perims[1:]))


def test_emphysema_requires_grid_aligned_family():
    with pytest.raises(ExperimentError):
        emphysema_sweep(TRIADIC, [0, 1], a=1.0)


def test_positivity_min_u_decreases_with_a():
    mins = []
    for a in (0.1, 1.0, 10.0):
        sweep = emphysema_sweep(QUADRATIC, [2], a=a)
        (row,) = sweep.ok_rows()
        assert row.min_boundary_u > 0.0
        mins.append(row.min_boundary_u)
    assert mins[0] > mins[1] > mins[2]


# ---------------------------------------------------------------------------
# dimension experiment


def test_dimension_scales_window():
    spec = PrefractalSpec(family=TRIADIC, generation=5)
    scales = dimension_scales(spec)
    assert scales == [3.0 ** (-j) for j in range(1, 5)]


def test_dimension_experiment_smooth_disk_no_dichotomy():
    from robinlab import DISK
    dom = make_domain(PrefractalSpec(family=DISK, generation=0, n_sides=256))
    scales = [2.0 ** (-j) for j in range(4, 8)]
    rep = dimension_experiment(dom, n_walks=40_000, scales=scales, seed=3)
    for label in ("dirichlet", "robin"):
        assert rep.mode(label).fit.exponent == pytest.approx(1.0, abs=0.05)


def test_dimension_experiment_report_json(tri3):
    rep = dimension_experiment(tri3, n_walks=20_000, seed=4)
    doc = dimension_report_json(rep)
    assert doc["similarity_dimension"] == pytest.approx(math.log(4) / math.log(3))
    labels = {m["label"] for m in doc["modes"]}
    assert labels == {"dirichlet", "robin"}
    assert doc["separation_sigma"] is not None
