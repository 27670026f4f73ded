import math
import warnings
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from riwalk.errors import DegenerateScale, InvalidInput
from riwalk.lattice import (
    Box, Cone, Cylinder, Explicit, KRegion, Quiver, Site, adjacent, brute_force_boundary,
    cone_boundaries, quiver_scales, region_contains, region_from_params, segment, trap_anchors,
)


def as_set(pts):
    return set(map(tuple, np.asarray(pts).tolist()))


def scan_boundary(region):
    """Inner boundary from the membership predicate over the padded bounding box."""
    lo, hi = region.bbox()
    lo, hi = lo - 1, hi + 1
    axes = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    m = region.contains_many(grid).reshape(tuple(hi - lo + 1))
    inner = m.copy()
    for ax in range(3):
        for s in (1, -1):
            inner[1:-1, 1:-1, 1:-1] &= np.roll(m, s, axis=ax)[1:-1, 1:-1, 1:-1]
    return np.argwhere(m & ~inner) + lo


# ---------------------------------------------------------------- membership

def test_cone_membership_examples():
    assert region_contains(Cone(10, 5), (5, 0, 0))
    assert not region_contains(Cone(10, 5), (-6, 0, 0))
    # 3 <= 1 * (4 - 2) fails
    assert not region_contains(Cone(1, 4), (2, 3, 0))
    assert region_contains(Cone(1, 4), (2, 2, -2))


@given(st.integers(-8, 8), st.integers(-30, 30), st.integers(-30, 30),
       st.sampled_from([Fraction(1, 4), Fraction(1), Fraction(3, 2), Fraction(10)]), st.integers(1, 8))
def test_cone_membership_matches_inequalities(a, b, c, M, n):
    expect = abs(a) <= n and abs(b) <= M * (n - a) and abs(c) <= M * (n - a)
    assert Cone(M, n).contains((a, b, c)) == expect


@given(st.integers(-6, 6), st.integers(-20, 20), st.integers(-20, 20),
       st.sampled_from([Fraction(1, 2), Fraction(1), Fraction(10)]), st.integers(1, 6), st.integers(0, 6))
def test_cone_nesting(a, b, c, M, n1, dn):
    if Cone(M, n1).contains((a, b, c)):
        assert Cone(M, n1 + dn).contains((a, b, c))


def test_adjacency():
    assert adjacent((0, 0, 0), (0, -1, 0))
    assert not adjacent((0, 0, 0), (1, 1, 0))
    assert not adjacent((0, 0, 0), (0, 0, 0))
    assert not adjacent((0, 0, 0), (2, 0, 0))


# ---------------------------------------------------------------- boundaries

REGIONS = [
    Box((0, 0, 0), 0), Box((1, -2, 3), 2), Cylinder((0, 0, 0), 2, 5, 1), Cylinder((3, 1, 0), 0, 0, 3),
    Cone(1, 1), Cone(1, 4), Cone(Fraction(1, 2), 5), Cone(2, 3, clip=4), Cone(10, 3, clip=5),
    KRegion(2, 4), KRegion(3, 5, clip=4), Quiver((0, 0, 0), 10, math.exp(3)),
    segment(4), Explicit(np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [5, 5, 5]])),
]


@pytest.mark.parametrize("region", REGIONS, ids=lambda r: r.descriptor())
def test_boundary_matches_brute_force(region):
    assert as_set(region.boundary()) == as_set(brute_force_boundary(region))


@pytest.mark.parametrize("n", range(1, 11))
def test_cone_boundary_exhaustive(n):
    for M in (Fraction(1), Fraction(1, 3), Fraction(5, 2)):
        c = Cone(M, n)
        assert as_set(c.boundary()) == as_set(scan_boundary(c))


def test_cone_boundaries_unit():
    minus, plus = cone_boundaries(1, 1)
    assert len(minus) == 25
    assert as_set(minus) == {(-1, j, k) for j in range(-2, 3) for k in range(-2, 3)}
    assert not as_set(minus) & as_set(plus)


@pytest.mark.parametrize("M,n", [(1, 1), (1, 5), (Fraction(1, 4), 8), (10, 8), (3, 2)])
def test_cone_boundaries_partition(M, n):
    minus, plus = cone_boundaries(M, n)
    bd = as_set(scan_boundary(Cone(M, n)))
    assert not as_set(minus) & as_set(plus)
    assert as_set(minus) | as_set(plus) == bd
    assert (minus[:, 0] == -n).all()
    assert len(minus) == (2 * int(M * 2 * n) + 1) ** 2


def test_cone_10_8_boundary_count():
    c = Cone(10, 8)
    assert as_set(c.boundary()) == as_set(scan_boundary(c))


@pytest.mark.parametrize("region", REGIONS, ids=lambda r: r.descriptor())
def test_scan_agrees_with_site_scan(region):
    assert as_set(scan_boundary(region)) == as_set(brute_force_boundary(region))


# ---------------------------------------------------------------- quivers and anchors

def test_anchor_example():
    a = trap_anchors((0, 0, 0), 10, math.exp(10))
    assert a.mouth == Site(3, 0, 0)
    assert a.tip == Site(103, 0, 0)
    assert a.segment[0] == a.base and a.segment[-1] == a.mouth
    assert len(a.segment) == 4


def test_anchor_degenerate_scale():
    with pytest.raises(DegenerateScale):
        trap_anchors((0, 0, 0), 10, math.exp(2))


def test_anchor_warns_for_small_M():
    with pytest.warns(UserWarning):
        trap_anchors((0, 0, 0), 2, math.exp(3))


@given(st.tuples(*[st.integers(-50, 50)] * 3), st.sampled_from([10, 12, 20, Fraction(25, 2)]),
       st.floats(3.0, 9.0))
def test_anchor_invariants(x, M, log_n):
    a = trap_anchors(x, M, math.exp(log_n))
    s = quiver_scales(M, math.exp(log_n))
    assert a.mouth == Site(x[0] + s.segment, x[1], x[2])
    assert a.tip == a.mouth + (s.length, 0, 0)
    q = a.quiver
    assert q.contains(a.mouth)
    assert q.cylinder().contains(a.tip) and not q.contains(a.tip)


def test_quiver_is_cylinder_shell():
    q = Quiver((1, 2, 3), 10, math.exp(4))
    s = q.scales
    assert (s.segment, s.length, s.radius) == (1, 40, 2)
    cyl = Cylinder((1, 2, 3), 0, s.length + 1, s.radius)
    assert as_set(q.sites()) == as_set(brute_force_boundary(cyl))
    assert len(q.interior()) == s.length * (2 * s.radius - 1) ** 2


def test_quiver_size_order():
    # c is fixed once by the brute-force count at n = e^8, M = 10
    def ratio(M, m):
        q = Quiver((0, 0, 0), M, math.exp(m))
        return len(q.sites()) / (float(M) * m ** 1.75)

    c = len(scan_boundary(Quiver((0, 0, 0), 10, math.exp(8)).cylinder())) / (10 * 8 ** 1.75)
    assert ratio(10, 8) == pytest.approx(c)
    for M in (10, 20, 40):
        for m in (6, 8, 10, 12, 14):
            assert c / 3 <= ratio(M, m) <= 3 * c


def test_floor_of_exact_integers():
    # (3/M) ln n = 3 exactly in real arithmetic
    assert quiver_scales(10, math.exp(10)).segment == 3
    assert quiver_scales(Fraction(3, 2), math.exp(1)).segment == 2  # n clamped to 3


# ---------------------------------------------------------------- construction from parameters

def test_region_from_params_roundtrip():
    r = region_from_params("cone", M="1/4", n="6", clip="3")
    assert r == Cone(Fraction(1, 4), 6, 3)
    assert region_from_params("box", center="1,2,3", L=2).contains((3, 4, 5))
    assert region_from_params("sites", sites="0,0,0; 1,0,0").size == 2
    with pytest.raises(InvalidInput):
        region_from_params("torus", n=3)


def test_invalid_regions():
    with pytest.raises(InvalidInput):
        Cone(0, 3)
    with pytest.raises(InvalidInput):
        Cone(1, 0)
    with pytest.raises(InvalidInput):
        Box((0, 0, 0), -1)
