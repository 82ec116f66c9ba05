"""Entropy-vs-ln s regression figure with the fitted slope annotated."""

from __future__ import annotations

import argparse
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .io import SAVEFIG_KW, SchemaError, read_measure_json, read_pairs_csv


def render(measure_json, pairs_csv, out_path):
    doc = read_measure_json(measure_json)
    lns, ent = read_pairs_csv(pairs_csv)
    # slope comes from the input fit, never recomputed here
    fit = doc.get("d1")
    if fit is None:
        try:
            i = [abs(q - 1.0) < 1e-9 for q in doc["qs"]].index(True)
        except ValueError:
            raise SchemaError(f"{measure_json}: no D1 fit present")
        slope = doc["exponents"][i]
        stderr = doc["stderrs"][i]
        icpt = None
    else:
        slope, stderr, icpt = fit["exponent"], fit["stderr"], fit.get("intercept")
    print(f"slope {slope:.4f}")
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(lns, ent, "o", color="tab:blue", label="measured entropy")
    if icpt is None:  # reconstruct the intercept from the rendered points
        icpt = float(np.mean(ent) - slope * np.mean(lns))
    xs = np.linspace(lns.min(), lns.max(), 50)
    ax.plot(xs, slope * xs + icpt, "-", color="tab:red",
            label=f"slope {slope:.4f} $\\pm$ {stderr:.4f}")
    lo, hi = doc["window"]
    ax.set_title(f"{doc['estimator']} estimator, window [{lo:g}, {hi:g}]",
                 fontsize=10)
    ax.set_xlabel("ln s")
    ax.set_ylabel(r"$\sum \mu \ln \mu$")
    ax.legend(loc="upper left", fontsize=9)
    fig.tight_layout()
    fig.savefig(out_path, **SAVEFIG_KW)
    plt.close(fig)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("measure_json")
    ap.add_argument("pairs_csv")
    ap.add_argument("--out", required=True)
    args = ap.parse_args(argv)
    try:
        render(args.measure_json, args.pairs_csv, args.out)
    except (SchemaError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
