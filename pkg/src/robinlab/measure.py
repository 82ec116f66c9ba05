"""Empirical boundary measures and finite-scale dimension estimates.

Hits are reduced to binned measures (in arc length along the boundary, or
in ambient boxes) and scaling exponents are fit by ordinary least squares
on (ln s, entropy) or (ln s, ln moment) pairs.  The ambient-metric
information dimension is the primary surrogate for the measure dimension;
the arc-length fit is a diagnostic.  Window bounds travel with every fit:
exponents are only meaningful over the stated scale range of a prefractal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


class MeasureError(ValueError):
    pass


@dataclass
class EmpiricalMeasure:
    bins: np.ndarray      # normalized masses
    total_count: int
    scale: float
    perimeter: float

    def __post_init__(self):
        if abs(float(np.sum(self.bins)) - 1.0) > 1e-12:
            raise MeasureError("measure masses must sum to 1")


@dataclass(frozen=True)
class ScalingFit:
    exponent: float
    stderr: float
    scales_used: tuple
    r_squared: float
    intercept: float = 0.0
    metric: str = "arc"  # "arc" or "ambient"

    def __post_init__(self):
        s = self.scales_used
        if len(s) < 3 or any(s[i] <= s[i + 1] for i in range(len(s) - 1)):
            raise MeasureError("need >= 3 strictly decreasing scales")


@dataclass(frozen=True)
class MomentSpectrum:
    qs: tuple
    fits: tuple  # ScalingFit per q


def bin_hits(arcs: np.ndarray, perimeter: float, s: float) -> EmpiricalMeasure:
    """Equal arc-length bins of width s; the last bin absorbs the remainder."""
    arcs = np.asarray(arcs, dtype=np.float64)
    if len(arcs) == 0:
        raise MeasureError("no hits to bin")
    if not (0.0 < s < perimeter):
        raise MeasureError("bin width must lie in (0, perimeter)")
    n_bins = int(perimeter / s)
    idx = np.minimum((arcs / s).astype(np.int64), n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins).astype(np.float64)
    return EmpiricalMeasure(bins=counts / len(arcs), total_count=len(arcs),
                            scale=s, perimeter=perimeter)


def _entropy(masses: np.ndarray) -> float:
    """Sum mu ln mu with the x ln x -> 0 convention, fixed-order pairwise sum."""
    m = masses[masses > 0.0]
    terms = m * np.log(m)
    return float(_pairwise_sum(np.sort(terms)))


def _pairwise_sum(x: np.ndarray) -> float:
    while len(x) > 1:
        n = len(x) // 2
        head = x[: 2 * n].reshape(n, 2).sum(axis=1)
        x = np.concatenate([head, x[2 * n:]])
    return float(x[0]) if len(x) else 0.0


def _ols(lns: np.ndarray, ys: np.ndarray):
    n = len(lns)
    xm = lns.mean()
    ym = ys.mean()
    sxx = float(np.sum((lns - xm) ** 2))
    slope = float(np.sum((lns - xm) * (ys - ym)) / sxx)
    intercept = ym - slope * xm
    resid = ys - (intercept + slope * lns)
    ssr = float(np.sum(resid ** 2))
    sst = float(np.sum((ys - ym) ** 2))
    if n > 2:
        stderr = math.sqrt(ssr / (n - 2) / sxx)
    else:
        stderr = 0.0
    r2 = 1.0 - ssr / sst if sst > 0 else 1.0
    return slope, stderr, r2, intercept


def _check_scales(scales, perimeter, min_feature):
    scales = sorted(set(float(s) for s in scales), reverse=True)
    if len(scales) < 3:
        raise MeasureError("need at least 3 distinct scales")
    if perimeter is not None and scales[0] > perimeter / 16.0 + 1e-12:
        raise MeasureError(f"largest scale {scales[0]} exceeds perimeter/16")
    if min_feature is not None and scales[-1] < min_feature - 1e-12:
        raise MeasureError(
            f"smallest scale {scales[-1]} is below the finest boundary "
            f"feature {min_feature}")
    return scales


def _occupancy_check(n_occ: int, s: float, n_hits: int):
    # a single occupied bin is the degenerate atomic case (entropy exactly
    # zero at every scale); only sparse-but-spread data makes fits unreliable
    if 1 < n_occ < 10:
        raise MeasureError(
            f"only {n_occ} occupied bins at scale {s}; need >= 10 "
            f"(have {n_hits} samples; increase n_walks or the scale)")


def information_dimension(arcs: np.ndarray, perimeter: float,
                          scales: Sequence[float],
                          min_feature: Optional[float] = None) -> ScalingFit:
    """Arc-length information dimension D1: slope of entropy vs ln s."""
    arcs = np.asarray(arcs, dtype=np.float64)
    if len(arcs) == 0:
        raise MeasureError("no hits")
    scales = _check_scales(scales, perimeter, min_feature)
    ent = []
    for s in scales:
        m = bin_hits(arcs, perimeter, s)
        _occupancy_check(int(np.sum(m.bins > 0)), s, len(arcs))
        ent.append(_entropy(m.bins))
    slope, stderr, r2, icpt = _ols(np.log(scales), np.array(ent))
    return ScalingFit(exponent=slope, stderr=stderr, scales_used=tuple(scales),
                      r_squared=r2, intercept=icpt, metric="arc")


def ambient_information_dimension(points: np.ndarray,
                                  scales: Sequence[float],
                                  origin=(0.0, 0.0),
                                  min_feature: Optional[float] = None) -> ScalingFit:
    """Ambient-metric D1 from box counts over squares of side s.

    This is the primary estimator: for boundary measures it sees the
    boundary's own scaling, unlike the arc-length parameterization.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) == 0:
        raise MeasureError("need a nonempty (N,2) point array")
    scales = _check_scales(scales, None, min_feature)
    ox, oy = origin
    ent = []
    for s in scales:
        ix = np.floor((pts[:, 0] - ox) / s).astype(np.int64)
        iy = np.floor((pts[:, 1] - oy) / s).astype(np.int64)
        key = (ix - ix.min()) * np.int64(iy.max() - iy.min() + 2) + (iy - iy.min())
        _, counts = np.unique(key, return_counts=True)
        _occupancy_check(len(counts), s, len(pts))
        mu = counts / len(pts)
        ent.append(_entropy(mu))
    slope, stderr, r2, icpt = _ols(np.log(scales), np.array(ent))
    return ScalingFit(exponent=slope, stderr=stderr, scales_used=tuple(scales),
                      r_squared=r2, intercept=icpt, metric="ambient")


def arc_to_ambient(arc_fit: ScalingFit, points: np.ndarray,
                   scales: Sequence[float],
                   min_feature: Optional[float] = None) -> ScalingFit:
    """Replace a diagnostic arc-length fit by the ambient-metric fit.

    Rebins the same hits by ambient boxes over the stated scale window;
    assumes the window lies in the boundary's self-similar range.
    """
    if arc_fit.metric != "arc":
        raise MeasureError("input fit must be arc-metric")
    return ambient_information_dimension(points, scales, min_feature=min_feature)


def lq_spectrum(arcs: np.ndarray, perimeter: float, qs: Sequence[float],
                scales: Sequence[float],
                min_feature: Optional[float] = None) -> MomentSpectrum:
    """Generalized dimensions D_q from ln sum mu^q / ((q-1) ln s) slopes."""
    arcs = np.asarray(arcs, dtype=np.float64)
    scales = _check_scales(scales, perimeter, min_feature)
    lns = np.log(scales)
    measures = []
    for s in scales:
        m = bin_hits(arcs, perimeter, s)
        _occupancy_check(int(np.sum(m.bins > 0)), s, len(arcs))
        measures.append(m.bins[m.bins > 0.0])
    fits = []
    for q in qs:
        if not np.isfinite(q):
            raise MeasureError("q must be finite")
        if abs(q - 1.0) < 1e-12:
            fits.append(information_dimension(arcs, perimeter, scales,
                                              min_feature=min_feature))
            continue
        ys = np.array([math.log(float(np.sum(mu ** q))) / (q - 1.0)
                       for mu in measures])
        slope, stderr, r2, icpt = _ols(lns, ys)
        fits.append(ScalingFit(exponent=slope, stderr=stderr,
                               scales_used=tuple(scales), r_squared=r2,
                               intercept=icpt, metric="arc"))
    return MomentSpectrum(qs=tuple(qs), fits=tuple(fits))


# ---------------------------------------------------------------------------
# synthetic benchmark measures


def binary_cascade_sample(n: int, w_right: float = 2.0 / 3.0, depth: int = 16,
                          seed: int = 0) -> np.ndarray:
    """Samples from the binary multiplicative cascade on [0,1).

    At each of `depth` levels the right half is chosen with probability
    w_right.  Exact exponents: D1 = (w ln w + (1-w) ln(1-w)) / ln(1/2),
    D_q = ln(w^q + (1-w)^q) / ((q-1) ln(1/2)).
    """
    rng = np.random.default_rng(seed)
    pos = np.zeros(n)
    width = 1.0
    for _ in range(depth):
        width *= 0.5
        right = rng.random(n) < w_right
        pos += np.where(right, width, 0.0)
    pos += rng.random(n) * width
    return pos


def cascade_d1(w_right: float = 2.0 / 3.0) -> float:
    w = w_right
    return (w * math.log(w) + (1 - w) * math.log(1 - w)) / math.log(0.5)


def cascade_dq(q: float, w_right: float = 2.0 / 3.0) -> float:
    if abs(q - 1.0) < 1e-12:  # D_q -> D_1 in the q->1 limit
        return cascade_d1(w_right)
    w = w_right
    return math.log(w ** q + (1 - w) ** q) / ((q - 1) * math.log(0.5))


# ---------------------------------------------------------------------------
# JSON/CSV output schemas


def fit_to_json(fit: ScalingFit) -> dict:
    return {
        "exponent": fit.exponent,
        "stderr": fit.stderr,
        "r2": fit.r_squared,
        "intercept": fit.intercept,
        "metric": fit.metric,
        "scales": list(fit.scales_used),
        "window": [fit.scales_used[-1], fit.scales_used[0]],
    }


def write_pairs_csv(arcs_or_points, perimeter, fit: ScalingFit, path) -> None:
    """(ln s, entropy) pairs backing a fit, for external plotting."""
    with open(path, "w") as f:
        f.write("ln_s,entropy\n")
        for s in fit.scales_used:
            if fit.metric == "arc":
                m = bin_hits(np.asarray(arcs_or_points), perimeter, s)
                h = _entropy(m.bins)
            else:
                pts = np.asarray(arcs_or_points)
                ix = np.floor(pts[:, 0] / s).astype(np.int64)
                iy = np.floor(pts[:, 1] / s).astype(np.int64)
                key = (ix - ix.min()) * np.int64(iy.max() - iy.min() + 2) + (iy - iy.min())
                _, counts = np.unique(key, return_counts=True)
                h = _entropy(counts / len(pts))
            f.write(f"{math.log(s):.17g},{h:.17g}\n")
