"""Boundary flux along arc length, with prefractal vertex landmarks."""

from __future__ import annotations

import argparse
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .io import SAVEFIG_KW, SchemaError, read_flux_csv, read_geometry_json


def _vertex_arcs(geom):
    """Cumulative arc positions of polygon vertices, when recoverable."""
    if "vertices" in geom:
        v = np.asarray(geom["vertices"], dtype=float)
        d = np.roll(v, -1, axis=0) - v
        return np.concatenate(([0.0], np.cumsum(np.hypot(d[:, 0], d[:, 1]))))
    return None


def render(flux_csv, geometry_json, out_path):
    prof = read_flux_csv(flux_csv)
    geom = read_geometry_json(geometry_json) if geometry_json else None
    mid = 0.5 * (prof["arc_start"] + prof["arc_end"])
    order = np.argsort(mid)
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.step(mid[order], prof["phi"][order], where="mid", color="tab:blue", lw=1)
    if geom is not None:
        arcs = _vertex_arcs(geom)
        if arcs is not None and len(arcs) <= 70:
            for s in arcs[:-1]:
                ax.axvline(s, color="tab:gray", lw=0.4, alpha=0.5)
    total = float(np.sum(prof["phi"] * (prof["arc_end"] - prof["arc_start"])))
    ax.annotate(f"total F = {total:.4f}", xy=(0.02, 0.92),
                xycoords="axes fraction", fontsize=9)
    ax.set_xlabel("arc length $\\sigma$")
    ax.set_ylabel("flux density $\\phi(\\sigma)$")
    fig.tight_layout()
    fig.savefig(out_path, **SAVEFIG_KW)
    plt.close(fig)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("flux_csv")
    ap.add_argument("--geometry", default=None)
    ap.add_argument("--out", required=True)
    args = ap.parse_args(argv)
    try:
        render(args.flux_csv, args.geometry, args.out)
    except (SchemaError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
