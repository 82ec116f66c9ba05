"""Command-line entry point.

One binary, six subcommands (geometry | solve | walk | measure | sweep |
green) over the library.  Owns config parsing, seeding, output files, and
exit-code discipline: 0 ok, 2 config error, 3 numerics, 4 timeout budget.

Config comes from an optional JSON file (--config) with flag overrides;
flags win.  Primary outputs (CSV) are byte-identical across reruns with the
same config; timestamps live only in the JSON sidecars.  Every sidecar
embeds the library version and a hash of the effective config.
"""

from __future__ import annotations

import datetime
import hashlib
import json
import math
import os
import sys

import click
import numpy as np

from . import __version__, experiments, fd, geometry, measure, walk

EXIT_CONFIG = 2
EXIT_NUMERICS = 3
EXIT_BUDGET = 4


class TimeoutBudgetError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# shared plumbing


def common_options(f):
    f = click.option("--config", "config_path", type=click.Path(), default=None,
                     help="JSON config file; flags override its values.")(f)
    f = click.option("--seed", type=int, default=0, show_default=True)(f)
    f = click.option("--out", "out_dir", type=click.Path(), default=".",
                     help="Output directory (env ROBINLAB_OUT overrides).")(f)
    f = click.option("--threads", type=int, default=None,
                     help="Worker threads; affects speed only, never values.")(f)
    f = click.option("--quiet", is_flag=True, default=False)(f)
    return f


def _merge_config(ctx, params: dict) -> dict:
    """Layer JSON config under explicit flags; reject unknown keys."""
    path = params.get("config_path")
    cfg = {}
    if path:
        try:
            with open(path) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise click.ClickException(f"cannot read config {path}: {e}")
        if not isinstance(cfg, dict):
            raise click.ClickException("config file must hold a JSON object")
        unknown = set(cfg) - set(params)
        if unknown:
            raise click.ClickException(
                f"unknown config keys: {', '.join(sorted(unknown))}")
    merged = {}
    for k, v in params.items():
        src = ctx.get_parameter_source(k)
        if src is not None and src.name == "COMMANDLINE":
            merged[k] = v
        elif k in cfg:
            merged[k] = cfg[k]
        else:
            merged[k] = v
    return merged


def _setup(merged: dict) -> str:
    out_dir = os.environ.get("ROBINLAB_OUT") or merged["out_dir"]
    os.makedirs(out_dir, exist_ok=True)
    if merged.get("threads"):
        import numba
        numba.set_num_threads(int(merged["threads"]))
    return out_dir


def _config_hash(merged: dict) -> str:
    # drop run-local keys so the hash names the scientific configuration
    sig = {k: v for k, v in sorted(merged.items())
           if k not in ("config_path", "out_dir", "threads", "quiet")}
    blob = json.dumps(sig, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def _write_sidecar(path: str, merged: dict, payload: dict) -> None:
    doc = {"robinlab_version": __version__,
           "config_hash": _config_hash(merged),
           "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat()}
    doc.update(payload)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _say(merged: dict, msg: str) -> None:
    if not merged.get("quiet"):
        click.echo(msg)


def _fail(code: int, msg: str):
    click.echo(f"error: {msg}", err=True)
    sys.exit(code)


def _guard(fn):
    """Map library exceptions onto the partitioned exit codes."""
    try:
        fn()
    except click.ClickException as e:
        _fail(EXIT_CONFIG, e.format_message())
    except TimeoutBudgetError as e:
        _fail(EXIT_BUDGET, str(e))
    except (geometry.GeometryError, walk.WalkError, measure.MeasureError,
            fd.FDError, ValueError, OSError) as e:
        _fail(EXIT_CONFIG, str(e))
    except (fd.ConvergenceError, fd.ConservationError) as e:
        _fail(EXIT_NUMERICS, str(e))
    except experiments.ExperimentError as e:
        if "timed out" in str(e):
            _fail(EXIT_BUDGET, str(e))
        _fail(EXIT_NUMERICS, str(e))


def _parse_a(text) -> float:
    a = math.inf if str(text).lower() in ("inf", "infinity") else float(text)
    if a < 0:
        raise click.ClickException("a must be nonnegative (or 'inf')")
    return a


def _parse_floats(text) -> list:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v.strip()]


def _parse_point(text):
    vals = _parse_floats(text)
    if len(vals) != 2:
        raise click.ClickException(f"expected 'x,y', got {text!r}")
    return vals[0], vals[1]


def _load_geometry(path) -> geometry.DomainSpec:
    if path is None:
        raise click.ClickException("a geometry file is required (--geometry)")
    if not os.path.exists(path):
        raise click.ClickException(f"geometry file not found: {path}")
    return geometry.load_domain(path)


def _default_start(dom: geometry.DomainSpec):
    """Centroid, nudged outside the source disk when one is present."""
    cx, cy = dom.centroid()
    if dom.contains(cx, cy):
        return cx, cy
    if dom.source is not None:
        r = dom.source.r
        for k in (3.0, 5.0, 8.0, 12.0):
            for dx, dy in ((k * r, 0.0), (-k * r, 0.0),
                           (0.0, k * r), (0.0, -k * r)):
                if dom.contains(cx + dx, cy + dy):
                    return cx + dx, cy + dy
    raise click.ClickException(
        "no usable default start point; pass --start 'x,y'")


def _domain_name(dom: geometry.DomainSpec) -> str:
    if dom.prefractal is not None:
        return f"{dom.prefractal.family}-g{dom.prefractal.generation}"
    return "custom"


# ---------------------------------------------------------------------------
# subcommands


@click.group()
@click.version_option(__version__)
def main():
    """Diffusion across irregular membranes: solvers, walks, measures."""


@main.command("geometry")
@click.option("--family", type=click.Choice([geometry.TRIADIC, geometry.QUADRATIC,
                                             geometry.SQUARE, geometry.DISK]),
              default=geometry.TRIADIC, show_default=True)
@click.option("--generation", type=int, default=0, show_default=True)
@click.option("--base-scale", type=float, default=1.0, show_default=True)
@click.option("--n-sides", type=int, default=64, show_default=True,
              help="Polygon sides for the disk family.")
@click.option("--with-source/--no-source", default=False, show_default=True,
              help="Attach the default centered source disk.")
@click.option("--source", "source_text", default=None,
              help="Explicit source as 'cx,cy,r'.")
@click.option("--name", default="geometry.json", show_default=True)
@common_options
@click.pass_context
def cmd_geometry(ctx, **params):
    """Build a prefractal boundary and write the geometry file."""
    def body():
        p = _merge_config(ctx, params)
        out_dir = _setup(p)
        spec = geometry.PrefractalSpec(family=p["family"],
                                       generation=int(p["generation"]),
                                       base_scale=float(p["base_scale"]),
                                       n_sides=int(p["n_sides"]))
        source = None
        if p["source_text"]:
            cx, cy, r = _parse_floats(p["source_text"])
            source = geometry.SourceSpec(cx=cx, cy=cy, r=r)
        dom = geometry.make_domain(spec, source=source,
                                   with_default_source=bool(p["with_source"]))
        path = os.path.join(out_dir, p["name"])
        geometry.save_domain(dom, path)
        perim = round(dom.perimeter, 4)
        _say(p, f"{dom.outer.n_edges} edges, perimeter {perim:g}, "
                f"similarity dimension {geometry.similarity_dimension(spec):.4f}")
        _say(p, f"wrote {path}")
    _guard(body)


@main.command("solve")
@click.option("--geometry", "geometry_path", type=click.Path(), default=None)
@click.option("--a", "a_text", default="1.0", show_default=True,
              help="Absorption parameter; 'inf' for Dirichlet.")
@click.option("--h", type=float, required=False, default=None,
              help="Grid spacing (must divide every boundary offset).")
@click.option("--tol", type=float, default=1e-10, show_default=True)
@click.option("--method", type=click.Choice(["conjugate-gradient",
                                             "successive-over-relaxation"]),
              default="conjugate-gradient", show_default=True)
@click.option("--prefix", default="solve", show_default=True)
@common_options
@click.pass_context
def cmd_solve(ctx, **params):
    """Finite-difference Robin solve: field CSV, flux CSV, JSON sidecar."""
    def body():
        p = _merge_config(ctx, params)
        out_dir = _setup(p)
        if p["h"] is None:
            raise click.ClickException("grid spacing --h is required")
        dom = _load_geometry(p["geometry_path"])
        a = _parse_a(p["a_text"])
        cfg = fd.SolverConfig(tol=float(p["tol"]), method=p["method"])
        grid = fd.rasterize(dom, float(p["h"]))
        field = fd.solve_robin(grid, a, cfg)
        prof = fd.flux_profile(field, a)
        F = fd.flux_total(field, a)
        Fs = fd.source_flux(field)
        field_path = os.path.join(out_dir, f"{p['prefix']}-field.csv")
        flux_path = os.path.join(out_dir, f"{p['prefix']}-flux.csv")
        fd.write_field_csv(field, field_path)
        fd.write_flux_csv(prof, flux_path)
        mismatch = abs(F - Fs) / max(abs(F), abs(Fs), 1e-300)
        _write_sidecar(os.path.join(out_dir, f"{p['prefix']}.json"), p, {
            "h": float(p["h"]), "a": a if math.isfinite(a) else "inf",
            "tol": float(p["tol"]),
            "iterations": field.diagnostics["iterations"],
            "residual": field.diagnostics["residual"],
            "F": F, "source_flux": Fs,
            "conservation_mismatch": mismatch,
        })
        _say(p, f"F = {F:.6g} (source flux {Fs:.6g}, "
                f"mismatch {100 * mismatch:.3f}%)")
    _guard(body)


@main.command("walk")
@click.option("--geometry", "geometry_path", type=click.Path(), default=None)
@click.option("--a", "a_text", default="1.0", show_default=True)
@click.option("--eps", type=float, default=None,
              help="Boundary-layer width; default shortest edge / 8.")
@click.option("--n-walks", type=int, default=10_000, show_default=True)
@click.option("--start", "start_text", default=None,
              help="Start point 'x,y'; default domain centroid.")
@click.option("--mode", type=click.Choice(["target", "absent"]),
              default="target", show_default=True,
              help="'target': stop at the source; 'absent': sample the measure.")
@click.option("--max-steps", type=int, default=2_000_000, show_default=True)
@click.option("--timeout-budget", type=float, default=0.01, show_default=True)
@click.option("--prefix", default="walk", show_default=True)
@common_options
@click.pass_context
def cmd_walk(ctx, **params):
    """Run a walk batch: hits CSV plus JSON sidecar."""
    def body():
        p = _merge_config(ctx, params)
        out_dir = _setup(p)
        dom = _load_geometry(p["geometry_path"])
        a = _parse_a(p["a_text"])
        if a == 0 and p["mode"] == "absent":
            raise click.ClickException(
                "a=0 never absorbs: the hitting measure is undefined")
        eps = float(p["eps"]) if p["eps"] is not None else walk.default_eps(dom)
        cfg = walk.WalkConfig(eps=eps, max_steps=int(p["max_steps"]),
                              source_mode=p["mode"])
        if p["start_text"]:
            start = _parse_point(p["start_text"])
        else:
            start = _default_start(dom)
        rng = walk.RngSpec(seed=int(p["seed"]))
        if p["mode"] == "absent":
            res = walk.sample_measure(dom, start, a, int(p["n_walks"]), cfg, rng)
        else:
            res = walk.run_batch(dom, start, a, int(p["n_walks"]), cfg, rng)
        hits_path = os.path.join(out_dir, f"{p['prefix']}-hits.csv")
        walk.write_hits_csv(res, hits_path)
        frac = res.n_timeout / res.n_walks
        _write_sidecar(os.path.join(out_dir, f"{p['prefix']}.json"), p, {
            "seed": int(p["seed"]), "eps": eps,
            "a": a if math.isfinite(a) else "inf",
            "n_walks": res.n_walks, "timeout_count": res.n_timeout,
            "start": list(start), "mode": p["mode"],
        })
        _say(p, f"wrote {hits_path} ({res.n_walks} walks, "
                f"{res.n_timeout} timeouts)")
        if frac > float(p["timeout_budget"]):
            raise TimeoutBudgetError(
                f"{100 * frac:.2f}% of walks timed out "
                f"(budget {100 * float(p['timeout_budget']):.2f}%)")
    _guard(body)


@main.command("measure")
@click.option("--hits", "hits_path", type=click.Path(), default=None,
              help="Hits CSV from the walk subcommand.")
@click.option("--geometry", "geometry_path", type=click.Path(), default=None)
@click.option("--perimeter", type=float, default=None,
              help="Arc-length period when no geometry file is given.")
@click.option("--scales", "scales_text", default=None,
              help="Comma list of bin sizes, decreasing; default from geometry.")
@click.option("--qs", "qs_text", default=None,
              help="Comma list of moment orders for the D_q spectrum.")
@click.option("--estimator", type=click.Choice(["ambient", "arc"]),
              default="ambient", show_default=True)
@click.option("--prefix", default="measure", show_default=True)
@common_options
@click.pass_context
def cmd_measure(ctx, **params):
    """Fit finite-scale dimensions of a hit measure: JSON + pairs CSV."""
    def body():
        p = _merge_config(ctx, params)
        out_dir = _setup(p)
        if p["hits_path"] is None:
            raise click.ClickException("a hits CSV is required (--hits)")
        arcs, _, _, _ = walk.read_hits_csv(p["hits_path"])
        dom = None
        if p["geometry_path"]:
            dom = _load_geometry(p["geometry_path"])
        if dom is None and p["perimeter"] is None:
            raise click.ClickException("need --geometry or --perimeter")
        perim = dom.perimeter if dom is not None else float(p["perimeter"])
        if p["scales_text"]:
            scales = _parse_floats(p["scales_text"])
        elif dom is not None and dom.prefractal is not None:
            scales = experiments.dimension_scales(dom.prefractal)
        else:
            raise click.ClickException("--scales is required for this input")
        if p["estimator"] == "ambient":
            if dom is None:
                raise click.ClickException(
                    "the ambient estimator needs --geometry")
            data = dom.points_at_arcs(arcs)
            fit = measure.ambient_information_dimension(data, scales)
        else:
            data = arcs
            fit = measure.information_dimension(arcs, perim, scales)
        qs = _parse_floats(p["qs_text"]) if p["qs_text"] else [1.0]
        spec = measure.lq_spectrum(arcs, perim, qs, scales)
        doc = {"estimator": p["estimator"], "qs": qs,
               "scales": list(scales),
               "exponents": [f.exponent for f in spec.fits],
               "stderrs": [f.stderr for f in spec.fits],
               "r2": [f.r_squared for f in spec.fits],
               "window": [scales[-1], scales[0]],
               "d1": measure.fit_to_json(fit)}
        json_path = os.path.join(out_dir, f"{p['prefix']}.json")
        _write_sidecar(json_path, p, doc)
        pairs_path = os.path.join(out_dir, f"{p['prefix']}-pairs.csv")
        measure.write_pairs_csv(data, perim, fit, pairs_path)
        _say(p, f"D1 ({fit.metric}) = {fit.exponent:.4f} "
                f"+/- {fit.stderr:.4f} (r2 {fit.r_squared:.4f})")
    _guard(body)


@main.command("sweep")
@click.option("--kind", type=click.Choice(["a", "generation"]),
              default="a", show_default=True)
@click.option("--method", type=click.Choice(["fd", "mc"]),
              default="fd", show_default=True)
@click.option("--geometry", "geometry_path", type=click.Path(), default=None)
@click.option("--a-list", "a_list_text", default=None,
              help="Comma list of a values, increasing.")
@click.option("--a", "a_text", default="1.0", show_default=True,
              help="Fixed a for generation sweeps.")
@click.option("--generations", "generations_text", default=None,
              help="Comma list of generations for --kind generation.")
@click.option("--family", default=geometry.QUADRATIC, show_default=True)
@click.option("--h", type=float, default=None)
@click.option("--cells-per-edge", type=int, default=2, show_default=True)
@click.option("--n-walks", type=int, default=10_000, show_default=True)
@click.option("--probe", "probe_text", default=None,
              help="Probe point 'x,y' for mc sweeps; default centroid.")
@click.option("--eps", type=float, default=None)
@common_options
@click.pass_context
def cmd_sweep(ctx, **params):
    """Flux/concentration sweeps over a or generation, with crossover."""
    def body():
        p = _merge_config(ctx, params)
        out_dir = _setup(p)
        if p["kind"] == "a":
            if not p["a_list_text"]:
                raise click.ClickException("--a-list is required for --kind a")
            dom = _load_geometry(p["geometry_path"])
            a_list = _parse_floats(p["a_list_text"])
            kwargs = {}
            if p["method"] == "mc":
                probe = (_parse_point(p["probe_text"]) if p["probe_text"]
                         else dom.centroid())
                eps = (float(p["eps"]) if p["eps"] is not None
                       else walk.default_eps(dom))
                kwargs = dict(walk_cfg=walk.WalkConfig(eps=eps),
                              n_walks=int(p["n_walks"]), probe=probe)
            result = experiments.sweep_a(dom, a_list, method=p["method"],
                                         h=p["h"], seed=int(p["seed"]),
                                         **kwargs)
            name = f"a-sweep-{_domain_name(dom)}-{_config_hash(p)}"
        else:
            if not p["generations_text"]:
                raise click.ClickException(
                    "--generations is required for --kind generation")
            gens = [int(g) for g in _parse_floats(p["generations_text"])]
            result = experiments.emphysema_sweep(
                p["family"], gens, _parse_a(p["a_text"]),
                m=int(p["cells_per_edge"]))
            name = (f"generation-sweep-{p['family']}-{_config_hash(p)}")
        csv_path = os.path.join(out_dir, f"{name}.csv")
        experiments.write_sweep_csv(result, csv_path)
        payload = {"metadata": result.metadata,
                   "rows_ok": len(result.ok_rows()),
                   "rows_total": len(result.rows)}
        if p["kind"] == "a" and p["method"] == "fd" and len(result.ok_rows()) >= 2:
            try:
                cross = experiments.detect_crossover(result)
                payload["a_star"] = cross.a_star
                payload["f_inf"] = cross.f_inf
            except experiments.ExperimentError:
                payload["a_star"] = None
        _write_sidecar(os.path.join(out_dir, f"{name}.json"), p, payload)
        _say(p, f"wrote {csv_path} ({payload['rows_ok']}/"
                f"{payload['rows_total']} rows ok)")
        if "a_star" in payload and payload["a_star"] is not None:
            _say(p, f"a_star = {payload['a_star']:.6g}")
        bad = [r for r in result.rows if r.status != "ok"]
        if bad:
            raise experiments.ExperimentError(
                f"{len(bad)} sweep rows failed; see status column")
    _guard(body)


@main.command("green")
@click.option("--geometry", "geometry_path", type=click.Path(), default=None)
@click.option("--a", "a_text", default="1.0", show_default=True)
@click.option("--h", type=float, default=None)
@click.option("--y", "y_text", default=None,
              help="Pole location 'x,y'; default domain centroid.")
@click.option("--tol", type=float, default=1e-10, show_default=True)
@click.option("--prefix", default="green", show_default=True)
@common_options
@click.pass_context
def cmd_green(ctx, **params):
    """Discrete Robin Green function with a unit pole: field CSV."""
    def body():
        p = _merge_config(ctx, params)
        out_dir = _setup(p)
        if p["h"] is None:
            raise click.ClickException("grid spacing --h is required")
        dom = _load_geometry(p["geometry_path"])
        if dom.source is not None:
            dom = geometry.DomainSpec(dom.outer, source=None,
                                      prefractal=dom.prefractal)
        a = _parse_a(p["a_text"])
        h = float(p["h"])
        grid = fd.rasterize(dom, h)
        yx, yy = (_parse_point(p["y_text"]) if p["y_text"] else dom.centroid())
        gi = int(np.clip((yx - grid.x0) / h, 0, grid.nx - 1))
        gj = int(np.clip((yy - grid.y0) / h, 0, grid.ny - 1))
        if grid.kinds[gj, gi] != fd.KIND_INTERIOR:
            raise click.ClickException(f"pole ({yx}, {yy}) is not interior")
        field = fd.solve_green(grid, (gj, gi), a,
                               fd.SolverConfig(tol=float(p["tol"])))
        field_path = os.path.join(out_dir, f"{p['prefix']}-field.csv")
        fd.write_field_csv(field, field_path)
        _write_sidecar(os.path.join(out_dir, f"{p['prefix']}.json"), p, {
            "h": h, "a": a if math.isfinite(a) else "inf",
            "tol": float(p["tol"]), "pole_cell": [gj, gi],
            "iterations": field.diagnostics["iterations"],
            "residual": field.diagnostics["residual"],
        })
        _say(p, f"wrote {field_path}")
    _guard(body)


if __name__ == "__main__":
    main()
