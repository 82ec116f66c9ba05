"""Partially reflected Brownian motion via walk-on-spheres.

In the interior the walker jumps to a uniform point on the largest
boundary-avoiding circle (shrunk by a safety factor).  Within an
eps-layer of the membrane it is absorbed with probability
p = a*eps/(1 + a*eps) and otherwise reflected to depth eps along the
inward normal, which realizes the Robin parameter a = p/((1-p)*eps)
with the mean free path identified with the layer width eps.  That
identification (and the O(eps) bias it carries) is a modeling choice;
halving eps is the standard check.

Walks are deterministic functions of (seed, walk index): each walk runs
its own counter-based splitmix64 stream, so results never depend on the
degree of parallelism.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit, prange

from .bvh import grid_nearest
from .geometry import DomainSpec, GeometryError

KIND_ABSORBED = 0
KIND_HIT_SOURCE = 1
KIND_TIMEOUT = 2

KIND_NAMES = {KIND_ABSORBED: "absorbed", KIND_HIT_SOURCE: "hit_source",
              KIND_TIMEOUT: "timeout"}


class WalkError(ValueError):
    pass


@dataclass(frozen=True)
class WalkConfig:
    eps: float
    shrink: float = 0.99
    max_steps: int = 100_000
    source_mode: str = "absent"  # "target" or "absent"

    def __post_init__(self):
        if not (self.eps > 0 and np.isfinite(self.eps)):
            raise WalkError("eps must be finite and positive")
        if not (0.0 < self.shrink < 1.0):
            raise WalkError("shrink must lie in (0,1)")
        if self.max_steps < 1000:
            raise WalkError("max_steps must be >= 1000")
        if self.source_mode not in ("target", "absent"):
            raise WalkError("source_mode must be 'target' or 'absent'")


@dataclass(frozen=True)
class RngSpec:
    seed: int
    stream: int = 0


@dataclass(frozen=True)
class HitRecord:
    point: tuple
    edge_id: int
    arc: float
    reflections: int
    steps: int


@dataclass(frozen=True)
class WalkOutcome:
    kind: str  # absorbed | hit_source | timeout
    hit: Optional[HitRecord] = None


@dataclass
class BatchResult:
    """Raw per-walk arrays from one batch of walks."""

    kind: np.ndarray
    x: np.ndarray
    y: np.ndarray
    edge_id: np.ndarray
    arc: np.ndarray
    reflections: np.ndarray
    steps: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n_walks(self) -> int:
        return len(self.kind)

    @property
    def n_timeout(self) -> int:
        return int(np.sum(self.kind == KIND_TIMEOUT))

    def absorbed_mask(self) -> np.ndarray:
        return self.kind == KIND_ABSORBED


def default_eps(domain: DomainSpec) -> float:
    """Shortest boundary edge over 8; the documented default layer width."""
    return domain.shortest_edge / 8.0


def absorption_probability(a: float, eps: float) -> float:
    """p = a*eps/(1 + a*eps); inverts a = p/((1-p)*eps)."""
    if eps <= 0:
        raise WalkError("eps must be positive")
    if a == math.inf:
        return 1.0
    if a < 0:
        raise WalkError("a must be nonnegative")
    return a * eps / (1.0 + a * eps)


def _validate(domain: DomainSpec, cfg: WalkConfig):
    if cfg.source_mode == "target":
        if domain.source is None:
            raise WalkError("source_mode='target' requires a domain with a source")
        if cfg.eps >= domain.source.r:
            raise WalkError("eps must be smaller than the source radius")
    if cfg.eps >= domain.shortest_edge:
        raise WalkError("eps must be smaller than the shortest boundary edge")


# ---------------------------------------------------------------------------
# numba kernel

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


@njit(cache=True, inline="always")
def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True, inline="always")
def _next_uniform(state):
    state = state + _GOLDEN
    z = _mix64(state)
    return (z >> np.uint64(11)) * 1.1102230246251565e-16, state  # 2^-53


@njit(cache=True)
def _inside_local(qx, qy, ax, ay, bx, by, vconv,
                  gx0, gy0, gcell, gnx, gny, cell_start, cell_items,
                  node_bbox, node_left, node_right, node_start, node_count, perm):
    """Interior test for points near the boundary.

    Classifies q against its nearest boundary feature: mid-edge points use
    the edge side test (interior is left); points nearest to a vertex use
    the convex/reflex rule over the two incident edges.  Exact whenever the
    nearest feature is unique, which holds at the distances (~eps) this is
    called with.
    """
    d, nx_, ny_, eid = grid_nearest(qx, qy, ax, ay, bx, by,
                                    gx0, gy0, gcell, gnx, gny,
                                    cell_start, cell_items,
                                    node_bbox, node_left, node_right,
                                    node_start, node_count, perm, -1)
    n = ax.shape[0]
    t_from_a = math.hypot(nx_ - ax[eid], ny_ - ay[eid])
    t_to_b = math.hypot(nx_ - bx[eid], ny_ - by[eid])
    left_e = ((bx[eid] - ax[eid]) * (qy - ay[eid])
              - (by[eid] - ay[eid]) * (qx - ax[eid])) > 0.0
    if t_from_a > 1e-12 and t_to_b > 1e-12:
        return left_e
    if t_from_a <= 1e-12:
        vid = eid
        other = (eid - 1) % n
    else:
        vid = (eid + 1) % n
        other = (eid + 1) % n
    left_o = ((bx[other] - ax[other]) * (qy - ay[other])
              - (by[other] - ay[other]) * (qx - ax[other])) > 0.0
    if vconv[vid]:
        return left_e and left_o
    return left_e or left_o


@njit(cache=True, parallel=True, fastmath=True)
def _walk_batch(x0, y0, n_walks, seed, stream0,
                ax, ay, bx, by, elen, cumarc, nix, niy, vconv,
                gx0, gy0, gcell, gnx, gny, cell_start, cell_items,
                node_bbox, node_left, node_right, node_start, node_count, perm,
                has_source, scx, scy, sr,
                p_abs, a_coef, eps, shrink, max_steps,
                out_kind, out_x, out_y, out_eid, out_arc, out_refl, out_steps):
    perimeter = cumarc[cumarc.shape[0] - 1]
    # encounter threshold sits a hair below the reinsertion depth eps, so a
    # reflected walker always makes a sphere jump before its next layer check
    # (rounding in the reinserted point must not re-trigger an encounter)
    eps_enc = eps * (1.0 - 1e-9)
    for w in prange(n_walks):
        state = _mix64(np.uint64(seed) ^ ((np.uint64(stream0 + w) + np.uint64(1)) * _GOLDEN))
        x = x0
        y = y0
        hint = -1
        refl = 0
        jumps = 0
        kind = KIND_TIMEOUT
        hx = 0.0
        hy = 0.0
        heid = -1
        harc = -1.0
        for _ in range(max_steps):
            d, qx, qy, eid = grid_nearest(x, y, ax, ay, bx, by,
                                          gx0, gy0, gcell, gnx, gny,
                                          cell_start, cell_items,
                                          node_bbox, node_left, node_right,
                                          node_start, node_count, perm, hint)
            hint = eid
            ds = np.inf
            if has_source:
                ds = math.hypot(x - scx, y - scy) - sr
                if ds < eps:
                    kind = KIND_HIT_SOURCE
                    break
            if d < eps_enc:
                # Absorption weighted by the layer deficit eps - d: the local
                # time advanced by a reflection is the reinsertion displacement,
                # so a fixed per-encounter probability would overcount shallow
                # entries by an eps-independent factor.
                if p_abs >= 1.0:
                    p_here = 1.0
                else:
                    adelta = a_coef * (eps - d)
                    p_here = adelta / (1.0 + adelta)
                u, state = _next_uniform(state)
                if u < p_here:
                    kind = KIND_ABSORBED
                    hx = qx
                    hy = qy
                    heid = eid
                    harc = cumarc[eid] + math.hypot(qx - ax[eid], qy - ay[eid])
                    if harc >= perimeter:
                        harc -= perimeter
                    break
                refl += 1
                rx = qx + eps * nix[eid]
                ry = qy + eps * niy[eid]
                t_from_a = math.hypot(qx - ax[eid], qy - ay[eid])
                ok = True
                if t_from_a < eps or elen[eid] - t_from_a < eps:
                    # near a vertex the normal offset can exit through the
                    # adjacent edge; the reflected point is on the interior
                    # side of its own edge by construction, so the local
                    # wedge rule reduces to a side test against the neighbor
                    ne = ax.shape[0]
                    if t_from_a < eps:
                        other = (eid - 1) % ne
                        vid = eid
                    else:
                        other = (eid + 1) % ne
                        vid = (eid + 1) % ne
                    if vconv[vid]:
                        ok = ((bx[other] - ax[other]) * (ry - ay[other])
                              - (by[other] - ay[other]) * (rx - ax[other])) > 0.0
                if ok:
                    x = rx
                    y = ry
                else:
                    placed = False
                    for _k in range(16):
                        u, state = _next_uniform(state)
                        ang = 2.0 * math.pi * u
                        cx = x + 0.5 * eps * math.cos(ang)
                        cy = y + 0.5 * eps * math.sin(ang)
                        if _inside_local(cx, cy, ax, ay, bx, by, vconv,
                                         gx0, gy0, gcell, gnx, gny,
                                         cell_start, cell_items, node_bbox,
                                         node_left, node_right, node_start,
                                         node_count, perm):
                            x = cx
                            y = cy
                            placed = True
                            break
                    if not placed:
                        break  # timeout outcome
                continue
            r = d if d < ds else ds
            r *= shrink
            u, state = _next_uniform(state)
            ang = 2.0 * math.pi * u
            x += r * math.cos(ang)
            y += r * math.sin(ang)
            jumps += 1
        out_kind[w] = kind
        out_x[w] = hx
        out_y[w] = hy
        out_eid[w] = heid
        out_arc[w] = harc
        out_refl[w] = refl
        out_steps[w] = jumps


# ---------------------------------------------------------------------------
# public API


def run_batch(domain: DomainSpec, start, a: float, n_walks: int,
              cfg: WalkConfig, rng: RngSpec) -> BatchResult:
    """Run n_walks independent walks from `start`; the workhorse entry point."""
    _validate(domain, cfg)
    x0, y0 = float(start[0]), float(start[1])
    if not domain.contains(x0, y0):
        raise WalkError(f"start point {start} is not strictly inside the domain")
    p_abs = absorption_probability(a, cfg.eps)
    idx = domain.index
    use_source = domain.source is not None and cfg.source_mode == "target"
    scx = scy = sr = 0.0
    if use_source:
        scx, scy, sr = domain.source.cx, domain.source.cy, domain.source.r
    n = int(n_walks)
    out = BatchResult(
        kind=np.empty(n, dtype=np.int8),
        x=np.empty(n, dtype=np.float64),
        y=np.empty(n, dtype=np.float64),
        edge_id=np.empty(n, dtype=np.int64),
        arc=np.empty(n, dtype=np.float64),
        reflections=np.empty(n, dtype=np.int64),
        steps=np.empty(n, dtype=np.int64),
    )
    _walk_batch(x0, y0, n, rng.seed, rng.stream,
                idx.ax, idx.ay, idx.bx, idx.by, idx.elen, idx.cumarc,
                idx.nix, idx.niy, idx.vertex_convex,
                idx.grid_x0, idx.grid_y0, idx.grid_cell,
                idx.grid_nx, idx.grid_ny, idx.cell_start, idx.cell_items,
                idx.node_bbox, idx.node_left, idx.node_right,
                idx.node_start, idx.node_count, idx.perm,
                use_source, scx, scy, sr,
                p_abs, 0.0 if a == math.inf else float(a),
                cfg.eps, cfg.shrink, cfg.max_steps,
                out.kind, out.x, out.y, out.edge_id, out.arc,
                out.reflections, out.steps)
    out.meta = {
        "seed": rng.seed, "stream0": rng.stream, "n_walks": n, "a": a,
        "eps": cfg.eps, "shrink": cfg.shrink, "max_steps": cfg.max_steps,
        "p_abs": p_abs, "start": [x0, y0],
        "timeout_count": out.n_timeout,
    }
    return out


def run_walk(domain: DomainSpec, start, a: float, cfg: WalkConfig,
             rng: RngSpec) -> WalkOutcome:
    """Single walk; deterministic in (seed, stream)."""
    res = run_batch(domain, start, a, 1, cfg, RngSpec(rng.seed, rng.stream))
    k = int(res.kind[0])
    if k == KIND_ABSORBED:
        hit = HitRecord(point=(float(res.x[0]), float(res.y[0])),
                        edge_id=int(res.edge_id[0]), arc=float(res.arc[0]),
                        reflections=int(res.reflections[0]),
                        steps=int(res.steps[0]))
        return WalkOutcome(kind="absorbed", hit=hit)
    return WalkOutcome(kind=KIND_NAMES[k], hit=None)


@dataclass(frozen=True)
class UEstimate:
    mean: float
    stderr: float
    n_walks: int
    n_hit_source: int
    n_timeout: int
    timeout_warning: bool


def estimate_u(domain: DomainSpec, x, a: float, n_walks: int,
               cfg: WalkConfig, rng: RngSpec) -> UEstimate:
    """Monte Carlo u_a(x): probability of reaching the source before
    membrane absorption.  Estimator carries an O(eps) discretization bias.
    """
    if domain.source is None:
        raise WalkError("estimate_u requires a domain with a source")
    if cfg.source_mode != "target":
        cfg = WalkConfig(cfg.eps, cfg.shrink, cfg.max_steps, "target")
    res = run_batch(domain, x, a, n_walks, cfg, rng)
    n_hit = int(np.sum(res.kind == KIND_HIT_SOURCE))
    n_to = res.n_timeout
    mean = n_hit / res.n_walks
    stderr = math.sqrt(max(mean * (1.0 - mean), 1e-300) / res.n_walks)
    return UEstimate(mean=mean, stderr=stderr, n_walks=res.n_walks,
                     n_hit_source=n_hit, n_timeout=n_to,
                     timeout_warning=n_to > 0.01 * res.n_walks)


def sample_measure(domain: DomainSpec, x0, a: float, n_walks: int,
                   cfg: WalkConfig, rng: RngSpec) -> BatchResult:
    """Sample the (Robin) harmonic measure: absorption sites of n_walks
    walks from x0.  Timeouts are excluded from the measure but counted.
    """
    if a == 0:
        raise WalkError("a=0 has no absorption measure (walk is never absorbed)")
    if domain.source is not None and cfg.source_mode == "target":
        raise WalkError("sample_measure runs with the source absent")
    cfg = WalkConfig(cfg.eps, cfg.shrink, cfg.max_steps, "absent")
    return run_batch(domain, x0, a, n_walks, cfg, rng)


# ---------------------------------------------------------------------------
# CSV / sidecar IO (schema shared with the CLI and the plotting scripts)

HITS_COLUMNS = "walk_id,outcome,arc,edge_id,reflections,steps"


def write_hits_csv(res: BatchResult, path) -> None:
    with open(path, "w") as f:
        f.write(HITS_COLUMNS + "\n")
        for i in range(res.n_walks):
            f.write(f"{i},{KIND_NAMES[int(res.kind[i])]},"
                    f"{res.arc[i]:.17g},{res.edge_id[i]},"
                    f"{res.reflections[i]},{res.steps[i]}\n")


def read_hits_csv(path):
    """Returns (arcs, edge_ids, outcomes) for absorbed walks plus counts."""
    outcomes = []
    arcs = []
    eids = []
    n_total = 0
    with open(path) as f:
        header = f.readline().strip()
        if header != HITS_COLUMNS:
            raise WalkError(f"unexpected hits CSV header: {header!r}")
        for line in f:
            parts = line.strip().split(",")
            n_total += 1
            outcomes.append(parts[1])
            if parts[1] == "absorbed":
                arcs.append(float(parts[2]))
                eids.append(int(parts[3]))
    return np.array(arcs), np.array(eids, dtype=np.int64), outcomes, n_total
