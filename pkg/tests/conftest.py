import numpy as np
import pytest

from robinlab import (DISK, QUADRATIC, SQUARE, TRIADIC, PrefractalSpec,
                      SourceSpec, make_domain)


@pytest.fixture(scope="session")
def tri2():
    return make_domain(PrefractalSpec(family=TRIADIC, generation=2))


@pytest.fixture(scope="session")
def tri3():
    return make_domain(PrefractalSpec(family=TRIADIC, generation=3))


@pytest.fixture(scope="session")
def quad1_src():
    return make_domain(PrefractalSpec(family=QUADRATIC, generation=1),
                       with_default_source=True)


@pytest.fixture(scope="session")
def square_src():
    return make_domain(PrefractalSpec(family=SQUARE), with_default_source=True)


@pytest.fixture(scope="session")
def annulus512():
    spec = PrefractalSpec(family=DISK, generation=0, n_sides=512)
    return make_domain(spec, source=SourceSpec(cx=0.0, cy=0.0, r=0.05))


def interior_points(domain, n, seed=0):
    """Rejection-sample n strictly interior points."""
    rng = np.random.default_rng(seed)
    x0, y0, x1, y1 = domain.outer.bbox()
    pts = []
    while len(pts) < n:
        cand = rng.uniform((x0, y0), (x1, y1), size=(4 * n, 2))
        for px, py in cand:
            if domain.contains(px, py):
                pts.append((px, py))
                if len(pts) == n:
                    break
    return np.array(pts)
