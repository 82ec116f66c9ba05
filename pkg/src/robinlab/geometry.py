"""Planar domains bounded by prefractal polygons.

Builds the polygon families used by both solvers (triadic Koch snowflake,
grid-aligned quadratic Koch island, square, regular-polygon disk), and
provides the boundary queries everything else relies on: point containment,
nearest-boundary-point distance (BVH-accelerated), and arc-length
parameterization of the boundary.

Conventions: polygons are simple, counterclockwise, with the interior on
the left of each directed edge; the outward normal is the right-hand
normal.  Lengths are dimensionless with domain diameter ~ base_scale.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bvh import BoundaryIndex

# Families accepted by build_prefractal.
TRIADIC = "triadic-koch-snowflake"
QUADRATIC = "quadratic-koch-island"
SQUARE = "square"
DISK = "disk-polygon"

FAMILIES = (TRIADIC, QUADRATIC, SQUARE, DISK)

MAX_GENERATION = 8
BOUNDARY_TOL = 1e-12  # membership tolerance, units of base_scale
ARC_TOL = 1e-9


class GeometryError(ValueError):
    """Invalid geometric input (bad spec, point outside domain, ...)."""


class ResourceGuardError(GeometryError):
    """Request would exceed the generation/memory guard."""


@dataclass(frozen=True)
class PrefractalSpec:
    family: str
    generation: int = 0
    base_scale: float = 1.0
    n_sides: int = 256  # disk-polygon only

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise GeometryError(f"unknown family {self.family!r}")
        if self.generation < 0:
            raise GeometryError("generation must be >= 0")
        if self.generation > MAX_GENERATION:
            raise ResourceGuardError(
                f"generation {self.generation} exceeds guard ({MAX_GENERATION})"
            )
        if not (np.isfinite(self.base_scale) and self.base_scale > 0):
            raise GeometryError("base_scale must be finite and positive")
        if self.family == DISK and self.n_sides < 3:
            raise GeometryError("disk-polygon needs n_sides >= 3")


@dataclass(frozen=True)
class SourceSpec:
    """Concentration source: a disk held at u = 1, strictly inside the domain."""

    cx: float
    cy: float
    r: float

    def __post_init__(self):
        if not (np.isfinite(self.r) and self.r > 0):
            raise GeometryError("source radius must be finite and positive")
        if not (np.isfinite(self.cx) and np.isfinite(self.cy)):
            raise GeometryError("source center must be finite")


class Polygon:
    """Simple counterclockwise polygon stored as an (N, 2) vertex array."""

    def __init__(self, vertices):
        v = np.asarray(vertices, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise GeometryError("polygon needs an (N>=3, 2) vertex array")
        if not np.all(np.isfinite(v)):
            raise GeometryError("polygon vertices must be finite")
        d = np.roll(v, -1, axis=0) - v
        lengths = np.hypot(d[:, 0], d[:, 1])
        if np.any(lengths == 0.0):
            raise GeometryError("consecutive vertices must be distinct")
        area2 = float(np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1]))
        if area2 < 0:  # normalize to counterclockwise
            v = v[::-1].copy()
            d = np.roll(v, -1, axis=0) - v
            lengths = np.hypot(d[:, 0], d[:, 1])
            area2 = -area2
        if area2 == 0:
            raise GeometryError("degenerate polygon (zero signed area)")
        self.vertices = v
        self.edge_vec = d
        self.edge_len = lengths
        self.cum_arc = np.concatenate(([0.0], np.cumsum(lengths)))

    @property
    def n_edges(self) -> int:
        return len(self.vertices)

    @property
    def perimeter(self) -> float:
        return float(self.cum_arc[-1])

    @property
    def area(self) -> float:
        v = self.vertices
        return 0.5 * float(np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1]))

    def centroid(self):
        v = self.vertices
        x, y = v[:, 0], v[:, 1]
        xn, yn = np.roll(x, -1), np.roll(y, -1)
        cross = x * yn - xn * y
        a = 0.5 * np.sum(cross)
        cx = np.sum((x + xn) * cross) / (6.0 * a)
        cy = np.sum((y + yn) * cross) / (6.0 * a)
        return float(cx), float(cy)

    def bbox(self):
        v = self.vertices
        return (
            float(v[:, 0].min()), float(v[:, 1].min()),
            float(v[:, 0].max()), float(v[:, 1].max()),
        )

    def is_simple(self) -> bool:
        """Full O(E^2) segment-intersection check (test-time validator)."""
        v = self.vertices
        n = len(v)
        a = v
        b = np.roll(v, -1, axis=0)
        for i in range(n):
            for j in range(i + 1, n):
                if j == i + 1 or (i == 0 and j == n - 1):
                    continue  # adjacent edges share a vertex by construction
                if _segments_intersect(a[i], b[i], a[j], b[j]):
                    return False
        return True


def _segments_intersect(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(q1, q2, p1)
    d2 = orient(q1, q2, p2)
    d3 = orient(p1, p2, q1)
    d4 = orient(p1, p2, q2)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)):
        return True
    # collinear-touching cases
    for (a, b, c, d) in ((q1, q2, p1, d1), (q1, q2, p2, d2), (p1, p2, q1, d3), (p1, p2, q2, d4)):
        if d == 0 and min(a[0], b[0]) <= c[0] <= max(a[0], b[0]) \
                and min(a[1], b[1]) <= c[1] <= max(a[1], b[1]):
            return True
    return False


# ---------------------------------------------------------------------------
# prefractal construction

# Quadratic Koch (Minkowski sausage) generator: 8 sub-edges of length 1/4.
# Interior vertices in the edge frame (t along the edge, u along the left
# normal), in units of edge_length/4.
_QUAD_GENERATOR = np.array([
    (1.0, 0.0), (1.0, 1.0), (2.0, 1.0), (2.0, 0.0),
    (2.0, -1.0), (3.0, -1.0), (3.0, 0.0),
])


def _koch_refine_triadic(vertices: np.ndarray) -> np.ndarray:
    p1 = vertices
    p2 = np.roll(vertices, -1, axis=0)
    d = (p2 - p1) / 3.0
    s1 = p1 + d
    s2 = p1 + 2.0 * d
    # tip to the right of the edge direction (outward for a CCW polygon)
    c, s = math.cos(-math.pi / 3.0), math.sin(-math.pi / 3.0)
    rot = np.empty_like(d)
    rot[:, 0] = c * d[:, 0] - s * d[:, 1]
    rot[:, 1] = s * d[:, 0] + c * d[:, 1]
    tip = s1 + rot
    out = np.empty((len(p1) * 4, 2))
    out[0::4] = p1
    out[1::4] = s1
    out[2::4] = tip
    out[3::4] = s2
    return out


def _koch_refine_quadratic(vertices: np.ndarray) -> np.ndarray:
    p1 = vertices
    p2 = np.roll(vertices, -1, axis=0)
    d = (p2 - p1) / 4.0  # one generator unit along the edge
    n = np.stack([-d[:, 1], d[:, 0]], axis=1)  # left normal, same magnitude
    out = np.empty((len(p1) * 8, 2))
    out[0::8] = p1
    for k, (t, u) in enumerate(_QUAD_GENERATOR, start=1):
        out[k::8] = p1 + t * d + u * n
    return out


def build_prefractal(spec: PrefractalSpec) -> Polygon:
    """Generate the boundary polygon for a prefractal family at generation g.

    Triadic snowflake: 3*4^g edges of length base_scale/3^g.
    Quadratic island: 4*8^g axis-aligned edges of length base_scale/4^g.
    """
    s = spec.base_scale
    if spec.family == TRIADIC:
        v = np.array([(0.0, 0.0), (s, 0.0), (s / 2.0, s * math.sqrt(3.0) / 2.0)])
        for _ in range(spec.generation):
            v = _koch_refine_triadic(v)
        return Polygon(v)
    if spec.family == QUADRATIC:
        v = np.array([(0.0, 0.0), (s, 0.0), (s, s), (0.0, s)])
        for _ in range(spec.generation):
            v = _koch_refine_quadratic(v)
        return Polygon(v)
    if spec.family == SQUARE:
        return Polygon([(0.0, 0.0), (s, 0.0), (s, s), (0.0, s)])
    if spec.family == DISK:
        k = np.arange(spec.n_sides)
        ang = 2.0 * np.pi * k / spec.n_sides
        r = s / 2.0
        return Polygon(np.stack([r * np.cos(ang), r * np.sin(ang)], axis=1))
    raise GeometryError(f"unknown family {spec.family!r}")


def similarity_dimension(spec: PrefractalSpec) -> float:
    """Similarity dimension of the limiting boundary curve."""
    if spec.family == TRIADIC:
        return math.log(4.0) / math.log(3.0)
    if spec.family == QUADRATIC:
        return math.log(8.0) / math.log(4.0)
    return 1.0


# ---------------------------------------------------------------------------
# domains


class DomainSpec:
    """Outer polygon plus optional source disk, with cached boundary index.

    Immutable after construction; all queries are read-only and safe to call
    concurrently.
    """

    def __init__(self, outer: Polygon, source: Optional[SourceSpec] = None,
                 prefractal: Optional[PrefractalSpec] = None):
        self.outer = outer
        self.source = source
        self.prefractal = prefractal
        self.index = BoundaryIndex(outer.vertices)
        if source is not None:
            if not self._inside_outer(source.cx, source.cy):
                raise GeometryError("source center must be strictly inside the polygon")
            d, _, _, _ = self.index.nearest(source.cx, source.cy)
            if d <= source.r:
                raise GeometryError("source disk must be at positive distance from the boundary")

    # -- boundary metrics -------------------------------------------------
    @property
    def perimeter(self) -> float:
        return self.outer.perimeter

    @property
    def shortest_edge(self) -> float:
        return float(self.outer.edge_len.min())

    def centroid(self):
        return self.outer.centroid()

    # -- predicates -------------------------------------------------------
    def _inside_outer(self, x: float, y: float) -> bool:
        return self.index.inside(x, y)

    def contains(self, x: float, y: float) -> bool:
        """Strict interior of (outer polygon minus source disk).

        Points within 1e-12 of the polygon boundary count as boundary
        (False), per the even-odd rule with a membership tolerance.
        """
        d, _, _, _ = self.index.nearest_unchecked(x, y)
        if d <= BOUNDARY_TOL:
            return False
        if not self.index.inside(x, y):
            return False
        if self.source is not None:
            if math.hypot(x - self.source.cx, y - self.source.cy) <= self.source.r:
                return False
        return True

    def distance_to_boundary(self, x: float, y: float):
        """Distance to the outer polygon from an interior point.

        Returns (dist, (nx, ny), edge_id) with nearest point and edge; ties
        go to the lowest edge id.  O(log E) amortized via the BVH index.
        """
        if not self.index.inside(x, y):
            raise GeometryError(f"point ({x}, {y}) is not inside the domain")
        d, nx, ny, eid = self.index.nearest(x, y)
        return d, (nx, ny), int(eid)

    def distance_to_boundary_brute(self, x: float, y: float):
        """Reference O(E) scan; kept as the oracle for the BVH index."""
        d, nx, ny, eid = self.index.nearest_brute(x, y)
        return d, (nx, ny), int(eid)

    # -- arc-length parameterization -------------------------------------
    def arc_coordinate(self, x: float, y: float, edge_id: int) -> float:
        """Cumulative arc length of a boundary point on a given edge."""
        poly = self.outer
        if not (0 <= edge_id < poly.n_edges):
            raise GeometryError("edge_id out of range")
        a = poly.vertices[edge_id]
        ev = poly.edge_vec[edge_id]
        L = poly.edge_len[edge_id]
        t = ((x - a[0]) * ev[0] + (y - a[1]) * ev[1]) / (L * L)
        tc = min(max(t, 0.0), 1.0)
        px, py = a[0] + tc * ev[0], a[1] + tc * ev[1]
        if math.hypot(x - px, y - py) > ARC_TOL:
            raise GeometryError("point does not lie on the stated edge")
        arc = poly.cum_arc[edge_id] + tc * L
        if arc >= poly.perimeter:
            arc -= poly.perimeter
        return float(arc)

    def point_at_arc(self, arc: float):
        """Inverse of arc_coordinate: boundary point at cumulative arc s."""
        poly = self.outer
        p = poly.perimeter
        s = float(arc) % p
        eid = int(np.searchsorted(poly.cum_arc, s, side="right") - 1)
        eid = min(eid, poly.n_edges - 1)
        t = (s - poly.cum_arc[eid]) / poly.edge_len[eid]
        a = poly.vertices[eid]
        ev = poly.edge_vec[eid]
        return (float(a[0] + t * ev[0]), float(a[1] + t * ev[1]), eid)

    def points_at_arcs(self, arcs: np.ndarray) -> np.ndarray:
        """Vectorized point_at_arc (boundary sampling for synthetic measures)."""
        poly = self.outer
        s = np.asarray(arcs, dtype=np.float64) % poly.perimeter
        eid = np.clip(np.searchsorted(poly.cum_arc, s, side="right") - 1, 0, poly.n_edges - 1)
        t = (s - poly.cum_arc[eid]) / poly.edge_len[eid]
        return poly.vertices[eid] + t[:, None] * poly.edge_vec[eid]


def default_source(poly: Polygon, radius_frac: float = 0.05,
                   base_scale: float = 1.0) -> SourceSpec:
    """Disk of radius 0.05*base_scale at the polygon centroid."""
    cx, cy = poly.centroid()
    return SourceSpec(cx, cy, radius_frac * base_scale)


def make_domain(spec: PrefractalSpec, source: Optional[SourceSpec] = None,
                with_default_source: bool = False) -> DomainSpec:
    poly = build_prefractal(spec)
    if source is None and with_default_source:
        source = default_source(poly, base_scale=spec.base_scale)
    return DomainSpec(poly, source=source, prefractal=spec)


# ---------------------------------------------------------------------------
# geometry file format (JSON)


def domain_to_json(domain: DomainSpec) -> dict:
    obj: dict = {}
    if domain.prefractal is not None:
        ps = domain.prefractal
        obj.update(family=ps.family, generation=ps.generation, base_scale=ps.base_scale)
        if ps.family == DISK:
            obj["n_sides"] = ps.n_sides
    else:
        obj["vertices"] = domain.outer.vertices.tolist()
    if domain.source is not None:
        obj["source"] = {"cx": domain.source.cx, "cy": domain.source.cy, "r": domain.source.r}
    return obj


def domain_from_json(obj: dict) -> DomainSpec:
    source = None
    if obj.get("source"):
        s = obj["source"]
        source = SourceSpec(float(s["cx"]), float(s["cy"]), float(s["r"]))
    if "vertices" in obj:
        return DomainSpec(Polygon(obj["vertices"]), source=source)
    spec = PrefractalSpec(
        family=obj["family"],
        generation=int(obj.get("generation", 0)),
        base_scale=float(obj.get("base_scale", 1.0)),
        n_sides=int(obj.get("n_sides", 256)),
    )
    return make_domain(spec, source=source)


def load_domain(path) -> DomainSpec:
    with open(path) as f:
        return domain_from_json(json.load(f))


def save_domain(domain: DomainSpec, path) -> None:
    with open(path, "w") as f:
        json.dump(domain_to_json(domain), f, indent=2)
        f.write("\n")
