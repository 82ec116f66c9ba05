import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robinlab import (DISK, QUADRATIC, SQUARE, TRIADIC, DomainSpec,
                      GeometryError, Polygon, PrefractalSpec,
                      ResourceGuardError, SourceSpec, build_prefractal,
                      domain_from_json, domain_to_json, make_domain,
                      similarity_dimension)

from conftest import interior_points


# ---------------------------------------------------------------------------
# prefractal construction


@pytest.mark.parametrize("g,edges,perim", [
    (0, 3, 3.0), (1, 12, 4.0), (2, 48, 16.0 / 3.0), (3, 192, 64.0 / 9.0),
])
def test_triadic_counts_and_perimeter(g, edges, perim):
    p = build_prefractal(PrefractalSpec(family=TRIADIC, generation=g))
    assert p.n_edges == edges
    assert p.perimeter == pytest.approx(perim, rel=1e-12)
    # every edge has the common length base/3^g
    assert np.allclose(p.edge_len, 1.0 / 3.0 ** g)


@pytest.mark.parametrize("g,edges,perim", [
    (0, 4, 4.0), (1, 32, 8.0), (2, 256, 16.0),
])
def test_quadratic_counts_and_perimeter(g, edges, perim):
    p = build_prefractal(PrefractalSpec(family=QUADRATIC, generation=g))
    assert p.n_edges == edges
    assert p.perimeter == pytest.approx(perim, rel=1e-12)
    # axis-aligned: every edge is horizontal or vertical
    assert np.all((np.abs(p.edge_vec[:, 0]) < 1e-15)
                  | (np.abs(p.edge_vec[:, 1]) < 1e-15))


@pytest.mark.parametrize("g", range(4))
def test_prefractals_are_simple_polygons(g):
    for fam in (TRIADIC, QUADRATIC):
        assert build_prefractal(PrefractalSpec(family=fam, generation=g)).is_simple()


def test_quadratic_area_is_preserved():
    # the generator adds and removes equal square bumps
    a0 = build_prefractal(PrefractalSpec(family=QUADRATIC, generation=0)).area
    a2 = build_prefractal(PrefractalSpec(family=QUADRATIC, generation=2)).area
    assert a2 == pytest.approx(a0, rel=1e-12)


def test_triadic_area_grows_toward_limit():
    areas = [build_prefractal(PrefractalSpec(family=TRIADIC, generation=g)).area
             for g in range(4)]
    assert all(b > a for a, b in zip(areas, areas[1:]))
    # limiting snowflake area: (2*sqrt(3)/5) * s^2
    assert areas[-1] < 2.0 * math.sqrt(3.0) / 5.0


def test_similarity_dimensions():
    assert similarity_dimension(PrefractalSpec(family=TRIADIC)) == pytest.approx(
        math.log(4.0) / math.log(3.0))
    assert similarity_dimension(PrefractalSpec(family=QUADRATIC)) == pytest.approx(1.5)
    assert similarity_dimension(PrefractalSpec(family=SQUARE)) == 1.0
    assert similarity_dimension(PrefractalSpec(family=DISK)) == 1.0


def test_generation_guard():
    with pytest.raises(ResourceGuardError):
        PrefractalSpec(family=TRIADIC, generation=9)


def test_spec_validation():
    with pytest.raises(GeometryError):
        PrefractalSpec(family="dodecahedron")
    with pytest.raises(GeometryError):
        PrefractalSpec(family=TRIADIC, generation=-1)
    with pytest.raises(GeometryError):
        PrefractalSpec(family=TRIADIC, base_scale=0.0)
    with pytest.raises(GeometryError):
        PrefractalSpec(family=DISK, n_sides=2)


def test_base_scale_scales_lengths():
    p1 = build_prefractal(PrefractalSpec(family=TRIADIC, generation=2))
    p3 = build_prefractal(PrefractalSpec(family=TRIADIC, generation=2,
                                         base_scale=3.0))
    assert p3.perimeter == pytest.approx(3.0 * p1.perimeter)


# ---------------------------------------------------------------------------
# polygon basics


def test_polygon_normalizes_to_ccw():
    cw = Polygon([(0, 0), (0, 1), (1, 1), (1, 0)])
    assert cw.area > 0


def test_polygon_rejects_degenerate():
    with pytest.raises(GeometryError):
        Polygon([(0, 0), (1, 0)])
    with pytest.raises(GeometryError):
        Polygon([(0, 0), (0, 0), (1, 1)])
    with pytest.raises(GeometryError):
        Polygon([(0, 0), (1, 0), (2, 0)])


def test_self_intersecting_polygon_detected():
    crossed = [(0, 0), (2, 2), (2, 0), (0, 1)]
    assert not Polygon(crossed).is_simple()


# ---------------------------------------------------------------------------
# domain predicates and queries


def test_contains_basics(tri2):
    cx, cy = tri2.centroid()
    assert tri2.contains(cx, cy)
    assert not tri2.contains(cx, 10.0)
    # boundary vertex is not interior
    vx, vy = tri2.outer.vertices[0]
    assert not tri2.contains(vx, vy)


def test_source_excluded_from_interior(quad1_src):
    s = quad1_src.source
    assert not quad1_src.contains(s.cx, s.cy)
    assert quad1_src.contains(s.cx + 2.5 * s.r, s.cy)


def test_source_must_be_inside():
    with pytest.raises(GeometryError):
        make_domain(PrefractalSpec(family=SQUARE),
                    source=SourceSpec(cx=5.0, cy=5.0, r=0.05))


def test_distance_matches_brute_force(tri3):
    pts = interior_points(tri3, 200, seed=1)
    for px, py in pts:
        d, (nx, ny), eid = tri3.distance_to_boundary(px, py)
        db, (nxb, nyb), eidb = tri3.distance_to_boundary_brute(px, py)
        assert d == db and eid == eidb and (nx, ny) == (nxb, nyb)


def test_distance_requires_interior(tri2):
    with pytest.raises(GeometryError):
        tri2.distance_to_boundary(100.0, 100.0)


@settings(max_examples=60, deadline=None)
@given(st.floats(min_value=0.0, max_value=100.0, allow_nan=False))
def test_arc_round_trip(arc):
    dom = make_domain(PrefractalSpec(family=TRIADIC, generation=2))
    x, y, eid = dom.point_at_arc(arc)
    back = dom.arc_coordinate(x, y, eid)
    expect = arc % dom.perimeter
    err = min(abs(back - expect), dom.perimeter - abs(back - expect))
    assert err < 1e-9
    assert 0.0 <= back < dom.perimeter


def test_points_at_arcs_matches_scalar(tri2):
    arcs = np.linspace(0.0, tri2.perimeter, 37, endpoint=False)
    pts = tri2.points_at_arcs(arcs)
    for arc, (px, py) in zip(arcs, pts):
        sx, sy, _ = tri2.point_at_arc(arc)
        assert (px, py) == pytest.approx((sx, sy), abs=1e-12)


def test_arc_coordinate_rejects_off_edge(tri2):
    with pytest.raises(GeometryError):
        tri2.arc_coordinate(100.0, 100.0, 0)


# ---------------------------------------------------------------------------
# geometry file round-trip


def test_json_round_trip_prefractal(quad1_src):
    obj = domain_to_json(quad1_src)
    back = domain_from_json(json.loads(json.dumps(obj)))
    assert np.array_equal(back.outer.vertices, quad1_src.outer.vertices)
    assert back.source == quad1_src.source
    assert back.prefractal == quad1_src.prefractal


def test_json_round_trip_explicit_vertices():
    dom = DomainSpec(Polygon([(0, 0), (2, 0), (2, 2), (0, 2)]),
                     source=SourceSpec(1.0, 1.0, 0.1))
    back = domain_from_json(domain_to_json(dom))
    assert np.array_equal(back.outer.vertices, dom.outer.vertices)
    assert back.source == dom.source
