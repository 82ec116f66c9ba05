"""Overlayed boundary-hit histograms (e.g. Dirichlet vs Robin), shared bins."""

from __future__ import annotations

import argparse
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .io import SAVEFIG_KW, SchemaError, read_hits_csv

_COLORS = ("tab:blue", "tab:red", "tab:green", "tab:orange")


def render(hits_csvs, labels, n_bins, out_path):
    datasets = []
    for path in hits_csvs:
        arcs, n_total = read_hits_csv(path)
        if len(arcs) == 0:
            raise SchemaError(f"{path}: no absorbed hits to histogram")
        datasets.append((arcs, n_total))
    hi = max(a.max() for a, _ in datasets)
    bins = np.linspace(0.0, hi * (1 + 1e-12), n_bins + 1)
    fig, ax = plt.subplots(figsize=(7, 3.5))
    for (arcs, _), label, color in zip(datasets, labels, _COLORS):
        ax.hist(arcs, bins=bins, density=True, histtype="step",
                color=color, label=f"{label} (n={len(arcs)})")
    ax.set_xlabel("arc length $\\sigma$")
    ax.set_ylabel("hit density")
    ax.legend(fontsize=9)
    fig.tight_layout()
    fig.savefig(out_path, **SAVEFIG_KW)
    plt.close(fig)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("hits_csvs", nargs="+")
    ap.add_argument("--labels", default=None,
                    help="Comma list of legend labels, one per input.")
    ap.add_argument("--bins", type=int, default=120)
    ap.add_argument("--out", required=True)
    args = ap.parse_args(argv)
    labels = (args.labels.split(",") if args.labels
              else [os.path.splitext(os.path.basename(p))[0]
                    for p in args.hits_csvs])
    if len(labels) != len(args.hits_csvs):
        print("error: need one label per input", file=sys.stderr)
        return 1
    try:
        render(args.hits_csvs, labels, args.bins, args.out)
    except (SchemaError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
