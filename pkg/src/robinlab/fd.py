"""Finite-difference Robin solver on grid-aligned domains.

Cell-centered 5-point Laplacian with a ghost-value Robin closure on
boundary faces:

    (u_ghost - u_in)/h = -a * u_face,   u_face = (u_ghost + u_in)/2
    =>  u_ghost = u_in * (2 - a h)/(2 + a h)

a = inf gives the Dirichlet closure u_ghost = -u_in (u_face = 0), a = 0
the Neumann closure u_ghost = u_in.  The closure keeps the system
symmetric positive (semi)definite, so conjugate gradients apply and the
discrete maximum principle / monotonicity-in-a checks are clean.

Only axis-aligned polygons whose vertices sit on the grid lattice are
accepted; the triadic snowflake is deliberately Monte-Carlo-only.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from numba import njit

from .geometry import DomainSpec

KIND_EXTERIOR = 0
KIND_INTERIOR = 1
KIND_SOURCE = 2

_ALIGN_TOL = 1e-9


class FDError(ValueError):
    pass


class NonGridAlignedError(FDError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, msg, residual, iterations):
        super().__init__(msg)
        self.residual = residual
        self.iterations = iterations


class ConservationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-10
    max_iter: int = 1_000_000
    method: str = "conjugate-gradient"  # or "successive-over-relaxation"

    def __post_init__(self):
        if not (0.0 < self.tol <= 1e-4):
            raise FDError("tol must lie in (0, 1e-4]")
        if self.max_iter < 1:
            raise FDError("max_iter must be >= 1")
        if self.method not in ("conjugate-gradient", "successive-over-relaxation"):
            raise FDError(f"unknown method {self.method!r}")


@dataclass
class Grid:
    """Rasterized domain: cell kinds plus exact boundary-face arc intervals."""

    h: float
    x0: float
    y0: float
    nx: int
    ny: int
    kinds: np.ndarray           # (ny, nx) int8
    face_cell_i: np.ndarray     # grid column of the adjacent interior cell
    face_cell_j: np.ndarray
    face_dir: np.ndarray        # 0=E 1=W 2=N 3=S
    face_edge_id: np.ndarray
    face_arc_start: np.ndarray
    face_arc_end: np.ndarray
    domain: DomainSpec

    @property
    def n_faces(self) -> int:
        return len(self.face_dir)

    @property
    def n_interior(self) -> int:
        return int(np.sum(self.kinds == KIND_INTERIOR))

    @property
    def n_source(self) -> int:
        return int(np.sum(self.kinds == KIND_SOURCE))

    def cell_centers(self):
        xs = self.x0 + (np.arange(self.nx) + 0.5) * self.h
        ys = self.y0 + (np.arange(self.ny) + 0.5) * self.h
        return xs, ys


@dataclass
class ScalarField:
    grid: Grid
    values: np.ndarray  # (ny, nx); NaN on exterior cells
    a: float
    diagnostics: dict = field(default_factory=dict)


@dataclass
class FluxProfile:
    arc_start: np.ndarray
    arc_end: np.ndarray
    phi: np.ndarray       # flux per unit boundary length, per face
    u_face: np.ndarray
    edge_id: np.ndarray
    total: float


# ---------------------------------------------------------------------------
# rasterization


def _check_grid_aligned(domain: DomainSpec, h: float):
    v = domain.outer.vertices
    w = np.roll(v, -1, axis=0)
    dx = np.abs(w[:, 0] - v[:, 0])
    dy = np.abs(w[:, 1] - v[:, 1])
    axis_ok = np.all((dx < _ALIGN_TOL) | (dy < _ALIGN_TOL))
    on_lattice = np.all(np.abs(v / h - np.round(v / h)) < _ALIGN_TOL / h)
    if not (axis_ok and on_lattice):
        raise NonGridAlignedError(
            "polygon is not grid-aligned at this h; use the Monte Carlo path "
            "for non-axis-aligned boundaries")


def rasterize(domain: DomainSpec, h: float) -> Grid:
    """Classify cells by center membership and enumerate boundary faces.

    For grid-aligned polygons every Interior/Exterior face lies exactly on
    a polygon edge; each face carries that edge id and its arc interval,
    and the intervals tile [0, perimeter).
    """
    _check_grid_aligned(domain, h)
    poly = domain.outer
    minx, miny, maxx, maxy = poly.bbox()
    x0 = round(minx / h) * h
    y0 = round(miny / h) * h
    nx = int(round((maxx - minx) / h))
    ny = int(round((maxy - miny) / h))
    xs = x0 + (np.arange(nx) + 0.5) * h
    ys = y0 + (np.arange(ny) + 0.5) * h
    X, Y = np.meshgrid(xs, ys)
    inside = _points_in_polygon(X.ravel(), Y.ravel(), poly.vertices).reshape(ny, nx)
    kinds = np.where(inside, KIND_INTERIOR, KIND_EXTERIOR).astype(np.int8)
    if domain.source is not None:
        s = domain.source
        in_src = (X - s.cx) ** 2 + (Y - s.cy) ** 2 < s.r ** 2
        kinds[inside & in_src] = KIND_SOURCE
        if not np.any(kinds == KIND_SOURCE):
            raise FDError("source disk rasterizes to zero cells; decrease h")
    # pad with exterior to classify faces at the grid rim
    padded = np.zeros((ny + 2, nx + 2), dtype=np.int8)
    padded[1:-1, 1:-1] = kinds
    ext_e = padded[1:-1, 2:] == KIND_EXTERIOR
    ext_w = padded[1:-1, :-2] == KIND_EXTERIOR
    ext_n = padded[2:, 1:-1] == KIND_EXTERIOR
    ext_s = padded[:-2, 1:-1] == KIND_EXTERIOR
    if np.any((kinds == KIND_SOURCE) & (ext_e | ext_w | ext_n | ext_s)):
        raise FDError("source cells touch the exterior; source is not strictly interior")
    interior = kinds == KIND_INTERIOR
    edge_lookup = _EdgeLookup(domain, h)
    fci, fcj, fdir, feid, fa0, fa1 = [], [], [], [], [], []
    for dcode, mask in ((0, ext_e), (1, ext_w), (2, ext_n), (3, ext_s)):
        jj, ii = np.nonzero(interior & mask)
        for j, i in zip(jj, ii):
            # geometric segment of the face
            if dcode == 0:
                cx, ylo = x0 + (i + 1) * h, y0 + j * h
                eid, s_lo = edge_lookup.vertical(cx, ylo, ylo + h)
            elif dcode == 1:
                cx, ylo = x0 + i * h, y0 + j * h
                eid, s_lo = edge_lookup.vertical(cx, ylo, ylo + h)
            elif dcode == 2:
                cy, xlo = y0 + (j + 1) * h, x0 + i * h
                eid, s_lo = edge_lookup.horizontal(cy, xlo, xlo + h)
            else:
                cy, xlo = y0 + j * h, x0 + i * h
                eid, s_lo = edge_lookup.horizontal(cy, xlo, xlo + h)
            fci.append(i)
            fcj.append(j)
            fdir.append(dcode)
            feid.append(eid)
            fa0.append(s_lo)
            fa1.append(s_lo + h)
    grid = Grid(h=h, x0=x0, y0=y0, nx=nx, ny=ny, kinds=kinds,
                face_cell_i=np.array(fci, dtype=np.int64),
                face_cell_j=np.array(fcj, dtype=np.int64),
                face_dir=np.array(fdir, dtype=np.int8),
                face_edge_id=np.array(feid, dtype=np.int64),
                face_arc_start=np.array(fa0, dtype=np.float64),
                face_arc_end=np.array(fa1, dtype=np.float64),
                domain=domain)
    total = grid.n_faces * h
    if abs(total - poly.perimeter) > 1e-9 * max(1.0, poly.perimeter):
        raise FDError(
            f"boundary faces sum to {total}, perimeter is {poly.perimeter}; "
            "rasterization is inconsistent")
    return grid


def _points_in_polygon(px, py, vertices):
    v = vertices
    w = np.roll(v, -1, axis=0)
    inside = np.zeros(len(px), dtype=bool)
    for k in range(len(v)):
        y1, y2 = v[k, 1], w[k, 1]
        crosses = (y1 > py) != (y2 > py)
        if not np.any(crosses):
            continue
        xc = v[k, 0] + (py - y1) / (y2 - y1) * (w[k, 0] - v[k, 0])
        inside ^= crosses & (xc > px)
    return inside


class _EdgeLookup:
    """Maps an axis-aligned face segment to the polygon edge containing it."""

    def __init__(self, domain: DomainSpec, h: float):
        poly = domain.outer
        self.h = h
        self.cum = poly.cum_arc
        self.vert = {}
        self.horiz = {}
        v = poly.vertices
        w = np.roll(v, -1, axis=0)
        for eid in range(len(v)):
            x1, y1 = v[eid]
            x2, y2 = w[eid]
            if abs(x2 - x1) < _ALIGN_TOL:
                self.vert.setdefault(round(x1 / h), []).append(
                    (eid, min(y1, y2), max(y1, y2), y1))
            else:
                self.horiz.setdefault(round(y1 / h), []).append(
                    (eid, min(x1, x2), max(x1, x2), x1))

    def vertical(self, x, lo, hi):
        for eid, emin, emax, estart in self.vert.get(round(x / self.h), ()):
            if emin - _ALIGN_TOL <= lo and hi <= emax + _ALIGN_TOL:
                t = min(abs(lo - estart), abs(hi - estart))
                return eid, float(self.cum[eid] + t)
        raise FDError(f"face at x={x}, y in [{lo},{hi}] lies on no polygon edge")

    def horizontal(self, y, lo, hi):
        for eid, emin, emax, estart in self.horiz.get(round(y / self.h), ()):
            if emin - _ALIGN_TOL <= lo and hi <= emax + _ALIGN_TOL:
                t = min(abs(lo - estart), abs(hi - estart))
                return eid, float(self.cum[eid] + t)
        raise FDError(f"face at y={y}, x in [{lo},{hi}] lies on no polygon edge")


# ---------------------------------------------------------------------------
# assembly and solve


def _ghost_coeff(a: float, h: float) -> float:
    if a == math.inf:
        return -1.0
    if a * h > 2.0:
        warnings.warn(
            f"a*h = {a * h:.3g} > 2: ghost closure coefficient changes sign; "
            "accuracy degrades, refine h", stacklevel=3)
    return (2.0 - a * h) / (2.0 + a * h)


def _assemble(grid: Grid, a: float, green_cell=None):
    """Build A u = b over Interior unknowns.

    Source cells enter as pinned u = 1 contributions to b.  For Green
    solves `green_cell` = (j, i) places the discrete delta instead.
    """
    kinds = grid.kinds
    ny, nx = kinds.shape
    unk = -np.ones((ny, nx), dtype=np.int64)
    jj, ii = np.nonzero(kinds == KIND_INTERIOR)
    n = len(jj)
    unk[jj, ii] = np.arange(n)
    c_ab = _ghost_coeff(a, grid.h)

    padded = np.full((ny + 2, nx + 2), KIND_EXTERIOR, dtype=np.int8)
    padded[1:-1, 1:-1] = kinds
    unk_p = -np.ones((ny + 2, nx + 2), dtype=np.int64)
    unk_p[1:-1, 1:-1] = unk

    rows = [np.arange(n)]
    cols = [np.arange(n)]
    diag = np.full(n, 4.0)
    b = np.zeros(n)
    for dj, di in ((0, 1), (0, -1), (1, 0), (-1, 0)):
        nb_kind = padded[1 + jj + dj, 1 + ii + di]
        nb_unk = unk_p[1 + jj + dj, 1 + ii + di]
        m_int = nb_kind == KIND_INTERIOR
        rows.append(np.nonzero(m_int)[0])
        cols.append(nb_unk[m_int])
        m_src = nb_kind == KIND_SOURCE
        b[m_src] += 1.0
        m_ext = nb_kind == KIND_EXTERIOR
        diag[m_ext] -= c_ab
    data = [diag] + [-np.ones(len(r)) for r in rows[1:]]
    A = sp.csr_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n))
    if green_cell is not None:
        gj, gi = green_cell
        if unk[gj, gi] < 0:
            raise FDError("green source cell must be an interior cell")
        b = np.zeros(n)
        b[unk[gj, gi]] = 1.0  # A u = h^2 * f with f = delta/h^2
    return A, b, unk


@njit(cache=True)
def _sor_sweeps(indptr, indices, data, b, u, omega, n_sweeps):
    n = b.shape[0]
    for _ in range(n_sweeps):
        for i in range(n):
            s = 0.0
            d = 1.0
            for k in range(indptr[i], indptr[i + 1]):
                j = indices[k]
                if j == i:
                    d = data[k]
                else:
                    s += data[k] * u[j]
            u[i] += omega * ((b[i] - s) / d - u[i])


def _solve_system(A, b, cfg: SolverConfig):
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b), 0, 0.0
    if cfg.method == "successive-over-relaxation":
        u = np.zeros_like(b)
        block = 50
        it = 0
        res = math.inf
        A = A.tocsr()
        while it < cfg.max_iter:
            _sor_sweeps(A.indptr, A.indices, A.data, b, u, 1.9, block)
            it += block
            res = np.linalg.norm(b - A @ u) / bnorm
            if res <= cfg.tol:
                return u, it, res
        raise ConvergenceError(f"SOR failed: residual {res:.3e} after {it} sweeps",
                               res, it)
    # conjugate gradients with an AMG preconditioner when available
    M = None
    try:
        import pyamg
        # the AMG setup draws from np.random (power-iteration spectral radius
        # estimates); pin the state so identical systems solve identically
        state = np.random.get_state()
        np.random.seed(0)
        try:
            M = pyamg.smoothed_aggregation_solver(A.tocsr()).aspreconditioner()
        finally:
            np.random.set_state(state)
    except Exception:
        pass
    iters = 0

    def _cb(_):
        nonlocal iters
        iters += 1

    u, info = spla.cg(A, b, rtol=cfg.tol * 1e-2, atol=0.0,
                      maxiter=cfg.max_iter, M=M, callback=_cb)
    res = np.linalg.norm(b - A @ u) / bnorm
    if res > cfg.tol:
        raise ConvergenceError(
            f"CG failed: residual {res:.3e} after {iters} iterations (info={info})",
            res, iters)
    return u, iters, res


def _field_from_solution(grid: Grid, u, unk, a, iters, res, source_value=None):
    vals = np.full((grid.ny, grid.nx), np.nan)
    jj, ii = np.nonzero(grid.kinds == KIND_INTERIOR)
    vals[jj, ii] = u[unk[jj, ii]]
    if source_value is not None:
        vals[grid.kinds == KIND_SOURCE] = source_value
    return ScalarField(grid=grid, values=vals, a=a,
                       diagnostics={"iterations": int(iters),
                                    "residual": float(res)})


def solve_robin(grid: Grid, a: float, cfg: SolverConfig = SolverConfig()) -> ScalarField:
    """Solve the unit-source Robin problem on the grid."""
    if grid.n_source < 1:
        raise FDError("solve_robin needs at least one source cell")
    if a == 0:
        # Neumann with a unit source forces the constant solution
        vals = np.full((grid.ny, grid.nx), np.nan)
        vals[grid.kinds != KIND_EXTERIOR] = 1.0
        return ScalarField(grid=grid, values=vals, a=a,
                           diagnostics={"iterations": 0, "residual": 0.0})
    A, b, unk = _assemble(grid, a)
    u, iters, res = _solve_system(A, b, cfg)
    return _field_from_solution(grid, u, unk, a, iters, res, source_value=1.0)


def solve_green(grid: Grid, y_cell, a: float,
                cfg: SolverConfig = SolverConfig()) -> ScalarField:
    """Discrete Robin Green function with the delta at cell y (j, i).

    Solved as -Delta G = delta_y, so the field is nonnegative.
    """
    if a == 0:
        raise FDError("Neumann Green function needs a compatibility condition; "
                      "a=0 is unsupported")
    if grid.n_source > 0:
        raise FDError("Green solves use a source-free grid")
    gj, gi = y_cell
    if grid.kinds[gj, gi] != KIND_INTERIOR:
        raise FDError("y must be an interior cell")
    A, b, unk = _assemble(grid, a, green_cell=(gj, gi))
    u, iters, res = _solve_system(A, b, cfg)
    return _field_from_solution(grid, u, unk, a, iters, res)


# ---------------------------------------------------------------------------
# flux


def _face_u_in(field: ScalarField) -> np.ndarray:
    g = field.grid
    return field.values[g.face_cell_j, g.face_cell_i]


def flux_profile(field: ScalarField, a: float) -> FluxProfile:
    """Per-face boundary flux density phi = a * u_face (2 u_in / h at a=inf)."""
    g = field.grid
    u_in = _face_u_in(field)
    if a == math.inf:
        u_face = np.zeros_like(u_in)
        phi = 2.0 * u_in / g.h
    elif a == 0:
        u_face = u_in.copy()
        phi = np.zeros_like(u_in)
    else:
        u_face = 2.0 * u_in / (2.0 + a * g.h)
        phi = a * u_face
    total = float(np.sum(phi) * g.h)
    return FluxProfile(arc_start=g.face_arc_start, arc_end=g.face_arc_end,
                       phi=phi, u_face=u_face, edge_id=g.face_edge_id,
                       total=total)


def source_flux(field: ScalarField) -> float:
    """Discrete flux out of the source cells (conservation reference)."""
    g = field.grid
    kinds = g.kinds
    padded = np.full((g.ny + 2, g.nx + 2), KIND_EXTERIOR, dtype=np.int8)
    padded[1:-1, 1:-1] = kinds
    vals = np.full((g.ny + 2, g.nx + 2), np.nan)
    vals[1:-1, 1:-1] = field.values
    total = 0.0
    jj, ii = np.nonzero(kinds == KIND_SOURCE)
    for dj, di in ((0, 1), (0, -1), (1, 0), (-1, 0)):
        nb_kind = padded[1 + jj + dj, 1 + ii + di]
        nb_val = vals[1 + jj + dj, 1 + ii + di]
        m = nb_kind == KIND_INTERIOR
        total += float(np.sum(1.0 - nb_val[m]))
    return total


def flux_total(field: ScalarField, a: float,
               conservation_warn: float = 0.01,
               conservation_error: float = 0.05) -> float:
    """Total membrane flux F(a), cross-checked against the source flux."""
    prof = flux_profile(field, a)
    F = prof.total
    Fs = source_flux(field)
    ref = max(abs(Fs), abs(F))
    if ref > 0:
        mismatch = abs(F - Fs) / ref
        if mismatch > conservation_error:
            raise ConservationError(
                f"boundary flux {F:.6g} vs source flux {Fs:.6g} "
                f"({100 * mismatch:.2f}% mismatch): assembly bug")
        if mismatch > conservation_warn:
            warnings.warn(f"flux conservation mismatch {100 * mismatch:.2f}%",
                          stacklevel=2)
    return F


# ---------------------------------------------------------------------------
# CSV export (schemas shared with the CLI and plotting scripts)


def write_field_csv(field: ScalarField, path) -> None:
    g = field.grid
    xs, ys = g.cell_centers()
    names = {KIND_EXTERIOR: "exterior", KIND_INTERIOR: "interior",
             KIND_SOURCE: "source"}
    with open(path, "w") as f:
        f.write("i,j,x,y,kind,value\n")
        for j in range(g.ny):
            for i in range(g.nx):
                k = int(g.kinds[j, i])
                v = field.values[j, i]
                vtxt = "" if np.isnan(v) else f"{v:.17g}"
                f.write(f"{i},{j},{xs[i]:.17g},{ys[j]:.17g},{names[k]},{vtxt}\n")


def write_flux_csv(prof: FluxProfile, path) -> None:
    order = np.argsort(prof.arc_start, kind="stable")
    with open(path, "w") as f:
        f.write("arc_start,arc_end,phi,edge_id\n")
        for k in order:
            f.write(f"{prof.arc_start[k]:.17g},{prof.arc_end[k]:.17g},"
                    f"{prof.phi[k]:.17g},{prof.edge_id[k]}\n")
