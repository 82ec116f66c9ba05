"""Scripted studies over the solvers: flux sweeps, crossover detection,
generation (surface-reduction) sweeps, and the Dirichlet/Robin dimension
comparison.

Every sweep row is an independent job with its own derived seed; failed
rows are kept with a status message, never dropped.  Results serialize to
a CSV plus a JSON metadata sidecar so a run is reproducible from its own
output.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import fd, measure, walk
from .geometry import (DomainSpec, PrefractalSpec, TRIADIC, QUADRATIC,
                       make_domain, similarity_dimension)


class ExperimentError(RuntimeError):
    pass


@dataclass
class SweepRow:
    var: float                      # swept value (a, or generation)
    F: Optional[float] = None
    F_dirichlet_ref: Optional[float] = None
    min_boundary_u: Optional[float] = None
    perimeter: Optional[float] = None
    probe_u: Optional[float] = None
    probe_stderr: Optional[float] = None
    mean_reflections: Optional[float] = None
    iterations: Optional[int] = None
    residual: Optional[float] = None
    status: str = "ok"


@dataclass
class SweepResult:
    swept: str                      # "a" or "generation"
    rows: list
    metadata: dict = field(default_factory=dict)

    def ok_rows(self):
        return [r for r in self.rows if r.status == "ok"]


@dataclass(frozen=True)
class CrossoverReport:
    a_star: float
    bracket: tuple
    f_inf: float


_COLUMNS = ("var", "F", "F_dirichlet_ref", "min_boundary_u", "perimeter",
            "probe_u", "probe_stderr", "mean_reflections", "iterations",
            "residual", "status")


def write_sweep_csv(result: SweepResult, path) -> None:
    with open(path, "w") as f:
        cols = (result.swept,) + _COLUMNS[1:]
        f.write(",".join(cols) + "\n")
        for r in result.rows:
            vals = []
            for c in _COLUMNS:
                v = getattr(r, c)
                if v is None:
                    vals.append("")
                elif isinstance(v, float):
                    vals.append(f"{v:.17g}")
                else:
                    vals.append(str(v))
            f.write(",".join(vals) + "\n")


def read_sweep_csv(path) -> SweepResult:
    with open(path) as f:
        header = f.readline().strip().split(",")
        swept = header[0]
        rows = []
        for line in f:
            parts = line.rstrip("\n").split(",")
            kw = {}
            for name, raw in zip(_COLUMNS, parts):
                if raw == "":
                    kw[name] = None
                elif name == "status":
                    kw[name] = raw
                elif name == "iterations":
                    kw[name] = int(raw)
                else:
                    kw[name] = float(raw)
            rows.append(SweepRow(**kw))
    return SweepResult(swept=swept, rows=rows)


# ---------------------------------------------------------------------------
# flux sweeps


def _fd_row(grid, a, cfg, f_inf, perimeter):
    row = SweepRow(var=a, F_dirichlet_ref=f_inf, perimeter=perimeter)
    try:
        fld = fd.solve_robin(grid, a, cfg)
        prof = fd.flux_profile(fld, a)
        row.F = fd.flux_total(fld, a)
        row.min_boundary_u = float(np.min(prof.u_face))
        row.iterations = fld.diagnostics["iterations"]
        row.residual = fld.diagnostics["residual"]
        # sanity bounds: F <= a*perimeter (u <= 1) and F <= Dirichlet flux
        if a not in (0.0, math.inf) and row.F > a * perimeter * (1 + 1e-8):
            row.status = "failed: F exceeds a*perimeter bound"
        if f_inf is not None and row.F > f_inf * (1 + 1e-6):
            row.status = "failed: F exceeds Dirichlet reference"
    except Exception as e:  # keep the sweep going, mark the row
        row.status = f"failed: {e}"
    return row


def sweep_a(domain: DomainSpec, a_list: Sequence[float], method: str = "fd",
            h: Optional[float] = None, solver_cfg: Optional[fd.SolverConfig] = None,
            walk_cfg: Optional[walk.WalkConfig] = None, n_walks: int = 10_000,
            probe=None, seed: int = 0) -> SweepResult:
    """One row per absorption parameter a, plus a Dirichlet reference.

    The fd path reports the total flux F(a); the mc path reports the probe
    concentration u_a(probe) and mean reflections instead (a walk estimator
    for F would need a reciprocity scheme, which is out of scope).
    """
    a_list = list(a_list)
    if any(a < 0 for a in a_list):
        raise ExperimentError("a values must be nonnegative")
    if sorted(a_list) != a_list:
        raise ExperimentError("a_list must be increasing")
    perimeter = domain.perimeter
    rows = []
    meta = {"method": method, "swept": "a", "a_list": a_list, "seed": seed,
            "perimeter": perimeter}
    if method == "fd":
        if h is None:
            raise ExperimentError("fd sweep needs a grid spacing h")
        cfg = solver_cfg or fd.SolverConfig()
        grid = fd.rasterize(domain, h)
        ref = fd.solve_robin(grid, math.inf, cfg)
        f_inf = fd.flux_total(ref, math.inf)
        meta.update(h=h, F_dirichlet=f_inf, tol=cfg.tol)
        for a in a_list:
            rows.append(_fd_row(grid, a, cfg, f_inf, perimeter))
    elif method == "mc":
        cfg = walk_cfg or walk.WalkConfig(eps=walk.default_eps(domain),
                                          source_mode="target")
        if probe is None:
            raise ExperimentError("mc sweep needs a probe point")
        meta.update(eps=cfg.eps, n_walks=n_walks, probe=list(probe))
        for i, a in enumerate(a_list):
            row = SweepRow(var=a, perimeter=perimeter)
            try:
                est = walk.estimate_u(domain, probe, a, n_walks, cfg,
                                      walk.RngSpec(seed, stream=i * n_walks))
                res = walk.run_batch(domain, probe, a, min(n_walks, 1000), cfg,
                                     walk.RngSpec(seed, stream=(i + 1) * 10 ** 7))
                row.probe_u = est.mean
                row.probe_stderr = est.stderr
                row.mean_reflections = float(np.mean(res.reflections))
            except Exception as e:
                row.status = f"failed: {e}"
            rows.append(row)
    else:
        raise ExperimentError(f"unknown method {method!r}")
    return SweepResult(swept="a", rows=rows, metadata=meta)


def detect_crossover(sweep: SweepResult, f_inf: Optional[float] = None) -> CrossoverReport:
    """Locate a_star with F(a_star) = F(inf)/2 by log-linear interpolation.

    Operationalizes the permeability-limited/diffusion-limited regime
    change; a_star is descriptive output, not an asserted law.
    """
    rows = [r for r in sweep.ok_rows()
            if r.F is not None and 0 < r.var < math.inf]
    if f_inf is None:
        refs = [r.F_dirichlet_ref for r in sweep.rows if r.F_dirichlet_ref]
        if not refs:
            raise ExperimentError("sweep carries no Dirichlet reference F(inf)")
        f_inf = refs[0]
    rows.sort(key=lambda r: r.var)
    fvals = [r.F for r in rows]
    if any(f2 < f1 for f1, f2 in zip(fvals, fvals[1:])):
        raise ExperimentError("F(a) is not monotone increasing; bad sweep input")
    target = f_inf / 2.0
    for lo, hi in zip(rows, rows[1:]):
        if lo.F <= target <= hi.F:
            ln_lo, ln_hi = math.log(lo.var), math.log(hi.var)
            t = (target - lo.F) / (hi.F - lo.F)
            a_star = math.exp(ln_lo + t * (ln_hi - ln_lo))
            return CrossoverReport(a_star=a_star, bracket=(lo.var, hi.var),
                                   f_inf=f_inf)
    raise ExperimentError("sweep range too narrow: no bracket around F(inf)/2")


def emphysema_sweep(family: str, generations: Sequence[int], a: float,
                    method: str = "fd", base_scale: float = 1.0,
                    m: int = 2, source_radius: float = 0.05,
                    solver_cfg: Optional[fd.SolverConfig] = None) -> SweepResult:
    """Flux versus boundary generation at fixed a (surface reduction study)."""
    if method != "fd":
        raise ExperimentError("generation sweeps are fd-only")
    if family != QUADRATIC:
        raise ExperimentError("fd generation sweeps need the grid-aligned family")
    cfg = solver_cfg or fd.SolverConfig()
    rows = []
    for g in generations:
        spec = PrefractalSpec(family, generation=g, base_scale=base_scale)
        row = SweepRow(var=float(g))
        try:
            dom = make_domain(spec, with_default_source=True)
            # h must divide the sub-edge base/4^g and still resolve the
            # source disk; refine the per-edge cell count when needed
            mg = max(m, math.ceil(2.0 * base_scale /
                                  (dom.source.r * 4 ** g)))
            h = base_scale / (4 ** g * mg)
            grid = fd.rasterize(dom, h)
            fld = fd.solve_robin(grid, a, cfg)
            row.F = fd.flux_total(fld, a)
            row.perimeter = dom.perimeter
            row.min_boundary_u = float(np.min(fd.flux_profile(fld, a).u_face))
            row.iterations = fld.diagnostics["iterations"]
            row.residual = fld.diagnostics["residual"]
        except Exception as e:
            row.status = f"failed: {e}"
        rows.append(row)
    return SweepResult(swept="generation", rows=rows,
                       metadata={"family": family, "a": a, "m": m,
                                 "base_scale": base_scale, "method": method})


# ---------------------------------------------------------------------------
# dimension comparison


def dimension_scales(spec: PrefractalSpec, n_min: int = 3) -> list:
    """Default window s_j = base_scale * r^-j, j = 1..g-1 (above the cutoff)."""
    r = 3.0 if spec.family == TRIADIC else 4.0 if spec.family == QUADRATIC else 2.0
    jmax = max(spec.generation - 1, n_min)
    return [spec.base_scale * r ** (-j) for j in range(1, jmax + 1)]


@dataclass
class DimensionMode:
    label: str
    a: float
    fit: measure.ScalingFit
    arc_fit: Optional[measure.ScalingFit]
    n_hits: int
    timeout_fraction: float
    mean_reflections: float


@dataclass
class DimensionReport:
    modes: list
    similarity_dim: float
    scales: list
    separation_sigma: Optional[float] = None

    def mode(self, label: str) -> DimensionMode:
        for m in self.modes:
            if m.label == label:
                return m
        raise KeyError(label)


def dimension_experiment(domain: DomainSpec, n_walks: int,
                         robin_a: Optional[float] = None,
                         scales: Optional[Sequence[float]] = None,
                         eps: Optional[float] = None, seed: int = 0,
                         max_steps: int = 2_000_000,
                         timeout_budget: float = 0.01) -> DimensionReport:
    """Ambient D1 of the Dirichlet vs Robin hitting measure from the centroid.

    Default Robin strength 1/a = perimeter/10, so the reflection length
    sits well inside the self-similar window.
    """
    spec = domain.prefractal
    if spec is None:
        raise ExperimentError("dimension experiment needs a prefractal domain")
    if robin_a is None:
        robin_a = 10.0 / domain.perimeter
    if scales is None:
        scales = dimension_scales(spec)
    cfg = walk.WalkConfig(eps=eps if eps is not None else walk.default_eps(domain),
                          max_steps=max_steps, source_mode="absent")
    x0 = domain.centroid()
    modes = []
    for k, (label, a) in enumerate((("dirichlet", math.inf), ("robin", robin_a))):
        res = walk.sample_measure(domain, x0, a, n_walks, cfg,
                                  walk.RngSpec(seed, stream=k * n_walks))
        to_frac = res.n_timeout / res.n_walks
        if to_frac > timeout_budget:
            raise ExperimentError(
                f"{label} mode timed out on {100 * to_frac:.2f}% of walks; "
                "raise max_steps")
        mask = res.absorbed_mask()
        arcs = res.arc[mask]
        pts = domain.points_at_arcs(arcs)
        fit = measure.ambient_information_dimension(pts, scales)
        try:
            arc_fit = measure.information_dimension(arcs, domain.perimeter, scales)
        except measure.MeasureError:
            arc_fit = None
        modes.append(DimensionMode(label=label, a=a, fit=fit, arc_fit=arc_fit,
                                   n_hits=int(mask.sum()),
                                   timeout_fraction=to_frac,
                                   mean_reflections=float(np.mean(res.reflections))))
    rep = DimensionReport(modes=modes, similarity_dim=similarity_dimension(spec),
                          scales=list(scales))
    d = rep.mode("dirichlet").fit
    r = rep.mode("robin").fit
    comb = math.hypot(d.stderr, r.stderr)
    rep.separation_sigma = abs(r.exponent - d.exponent) / comb if comb > 0 else math.inf
    return rep


def dimension_report_json(rep: DimensionReport) -> dict:
    return {
        "similarity_dimension": rep.similarity_dim,
        "scales": rep.scales,
        "separation_sigma": rep.separation_sigma,
        "modes": [
            {
                "label": m.label,
                "a": "inf" if m.a == math.inf else m.a,
                "ambient": measure.fit_to_json(m.fit),
                "arc": measure.fit_to_json(m.arc_fit) if m.arc_fit else None,
                "n_hits": m.n_hits,
                "timeout_fraction": m.timeout_fraction,
                "mean_reflections": m.mean_reflections,
            }
            for m in rep.modes
        ],
    }
