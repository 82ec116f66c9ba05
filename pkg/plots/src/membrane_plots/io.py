"""Readers and validators for the robinlab file formats.

Every reader checks the documented schema first and raises SchemaError with
a column diff on mismatch; the figure scripts translate that into a nonzero
exit.  No physics is recomputed here: slopes, crossover locations, and flux
values are rendered exactly as found in the inputs.
"""

from __future__ import annotations

import csv
import json
import math

import numpy as np

SWEEP_COLUMNS = ["F", "F_dirichlet_ref", "min_boundary_u", "perimeter",
                 "probe_u", "probe_stderr", "mean_reflections", "iterations",
                 "residual", "status"]
FLUX_COLUMNS = ["arc_start", "arc_end", "phi", "edge_id"]
HITS_COLUMNS = ["walk_id", "outcome", "arc", "edge_id", "reflections", "steps"]
PAIRS_COLUMNS = ["ln_s", "entropy"]


class SchemaError(ValueError):
    pass


def _check_columns(found, expected, path):
    if list(found) != list(expected):
        missing = [c for c in expected if c not in found]
        extra = [c for c in found if c not in expected]
        raise SchemaError(
            f"{path}: column mismatch\n  expected: {','.join(expected)}\n"
            f"  found:    {','.join(found)}\n"
            f"  missing:  {','.join(missing) or '-'}\n"
            f"  extra:    {','.join(extra) or '-'}")


def _float(text):
    return math.nan if text == "" else float(text)


def read_sweep_csv(path):
    """Sweep table; first column is the swept variable ('a' or 'generation')."""
    with open(path) as f:
        rows = list(csv.reader(f))
    if not rows or len(rows) < 2:
        raise SchemaError(f"{path}: empty sweep CSV")
    header = rows[0]
    if header[0] not in ("a", "generation"):
        raise SchemaError(f"{path}: first column must be 'a' or 'generation', "
                          f"got {header[0]!r}")
    _check_columns(header[1:], SWEEP_COLUMNS, path)
    out = {"swept": header[0], "var": [], "F": [], "F_dirichlet_ref": [],
           "probe_u": [], "probe_stderr": [], "status": []}
    for r in rows[1:]:
        if len(r) != len(header):
            raise SchemaError(f"{path}: row width {len(r)} != header width")
        out["var"].append(float(r[0]))
        out["F"].append(_float(r[1]))
        out["F_dirichlet_ref"].append(_float(r[2]))
        out["probe_u"].append(_float(r[5]))
        out["probe_stderr"].append(_float(r[6]))
        out["status"].append(r[10])
    for k in ("var", "F", "F_dirichlet_ref", "probe_u", "probe_stderr"):
        out[k] = np.array(out[k])
    return out


def read_crossover_json(path):
    with open(path) as f:
        doc = json.load(f)
    if "a_star" not in doc:
        raise SchemaError(f"{path}: missing field 'a_star'")
    return doc


def read_measure_json(path):
    with open(path) as f:
        doc = json.load(f)
    missing = [k for k in ("estimator", "qs", "scales", "exponents",
                           "stderrs", "window") if k not in doc]
    if missing:
        raise SchemaError(f"{path}: missing fields {', '.join(missing)}")
    return doc


def read_pairs_csv(path):
    with open(path) as f:
        rows = list(csv.reader(f))
    if not rows:
        raise SchemaError(f"{path}: empty pairs CSV")
    _check_columns(rows[0], PAIRS_COLUMNS, path)
    data = np.array([[float(a), float(b)] for a, b in rows[1:]])
    if len(data) < 3:
        raise SchemaError(f"{path}: need at least 3 (ln_s, entropy) pairs")
    return data[:, 0], data[:, 1]


def read_flux_csv(path):
    with open(path) as f:
        rows = list(csv.reader(f))
    if not rows:
        raise SchemaError(f"{path}: empty flux CSV")
    _check_columns(rows[0], FLUX_COLUMNS, path)
    data = np.array([[float(a), float(b), float(c), float(d)]
                     for a, b, c, d in rows[1:]])
    return {"arc_start": data[:, 0], "arc_end": data[:, 1],
            "phi": data[:, 2], "edge_id": data[:, 3].astype(int)}


def read_geometry_json(path):
    with open(path) as f:
        doc = json.load(f)
    if "vertices" not in doc and "family" not in doc:
        raise SchemaError(f"{path}: geometry needs 'family' or 'vertices'")
    return doc


def read_hits_csv(path):
    """Absorbed-hit arcs plus total walk count."""
    with open(path) as f:
        rows = list(csv.reader(f))
    if not rows:
        raise SchemaError(f"{path}: empty hits CSV")
    _check_columns(rows[0], HITS_COLUMNS, path)
    arcs = [float(r[2]) for r in rows[1:] if r[1] == "absorbed"]
    return np.array(arcs), len(rows) - 1


SAVEFIG_KW = dict(dpi=150, metadata={"Software": "membrane-plots"})
