"""F(a) sweep curve with Dirichlet asymptote and crossover marker."""

from __future__ import annotations

import argparse
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .io import SAVEFIG_KW, SchemaError, read_crossover_json, read_sweep_csv


def render(sweep_csv, crossover_json, out_path):
    sweep = read_sweep_csv(sweep_csv)
    if sweep["swept"] != "a":
        raise SchemaError(f"{sweep_csv}: expected an a-sweep")
    ok = np.array([s == "ok" for s in sweep["status"]])
    a = sweep["var"][ok]
    F = sweep["F"][ok]
    use_probe = np.all(np.isnan(F))
    y = sweep["probe_u"][ok] if use_probe else F
    fig, ax = plt.subplots(figsize=(6, 4))
    pos = a > 0
    ax.plot(a[pos], y[pos], "o-", color="tab:blue",
            label="u(probe)" if use_probe else "F(a)")
    if np.any(a == 0.0):
        ax.plot([], [])  # a=0 point kept off the log axis; note it instead
        ax.annotate(f"F(0) = {y[a == 0.0][0]:g}", xy=(0.02, 0.94),
                    xycoords="axes fraction", fontsize=8)
    ax.set_xscale("log")
    f_inf = sweep["F_dirichlet_ref"][ok]
    if not np.all(np.isnan(f_inf)):
        ax.axhline(np.nanmax(f_inf), color="tab:gray", ls="--", lw=1,
                   label="Dirichlet limit")
    if crossover_json is not None:
        doc = read_crossover_json(crossover_json)
        a_star = doc["a_star"]
        if a_star is not None:
            ax.axvline(a_star, color="tab:red", ls=":", lw=1.5)
            ax.annotate(f"a* = {a_star:.4f}", xy=(a_star, ax.get_ylim()[0]),
                        xytext=(5, 10), textcoords="offset points",
                        color="tab:red", fontsize=9)
    ax.set_xlabel("absorption parameter a")
    ax.set_ylabel("probe concentration" if use_probe else "total flux F")
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, **SAVEFIG_KW)
    plt.close(fig)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("sweep_csv")
    ap.add_argument("--crossover", default=None,
                    help="JSON sidecar holding a_star")
    ap.add_argument("--out", required=True)
    args = ap.parse_args(argv)
    try:
        render(args.sweep_csv, args.crossover, args.out)
    except (SchemaError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
