import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from riwalk.errors import DegenerateCapacity, DegenerateScale, RegionTooLarge, SupportMismatch
from riwalk.lattice import Box, Explicit, Quiver, segment
from riwalk.potential import (
    HarmonicProfile, TestFunction, best_constant_bound, capacity_estimate, exact_capacity,
    harmonic_measure, normalized_harmonic_measure, quiver_capacity_scan, symmetry_orbits,
    variational_upper_bound,
)
from riwalk.srw import green_function

CAP_0 = 1.0 / 1.516386059151978
# exact small-set oracle, frozen (Green-table linear system)
CAP_PAIR = 0.9838781
CAP_BOX1 = 3.1562058


def test_exact_oracle_values():
    assert exact_capacity([(0, 0, 0)])[0] == pytest.approx(CAP_0, abs=1e-12)
    # a pair: e = 1/(g0 + g1) at each site
    assert exact_capacity([(0, 0, 0), (1, 0, 0)])[0] == pytest.approx(2 / (2 * 1.516386059151978 - 1), abs=1e-12)
    assert exact_capacity([(0, 0, 0), (1, 0, 0)])[0] == pytest.approx(CAP_PAIR, abs=1e-6)
    assert exact_capacity(Box((0, 0, 0), 1))[0] == pytest.approx(CAP_BOX1, abs=1e-6)


def test_single_site_profile():
    h = harmonic_measure([(0, 0, 0)], 1, replicas_per_site=200_000)
    assert abs(h.capacity - CAP_0) <= 3 * h.capacity_stderr
    assert h.values[(0, 0, 0)][0] == h.capacity


def test_translation_invariance():
    a = harmonic_measure(Box((0, 0, 0), 1), 2, replicas_per_site=20_000)
    b = harmonic_measure(Box((0, 7, 0), 1), 3, replicas_per_site=20_000)
    assert a.symmetry_order == b.symmetry_order == 48
    d = a.estimates - b.estimates
    se = np.hypot(a.stderrs, b.stderrs)
    inner = se == 0
    assert (a.estimates[inner] == 0).all() and (b.estimates[inner] == 0).all()
    assert (np.abs(d[~inner]) <= 3.5 * se[~inner]).all()
    assert abs(a.capacity - CAP_BOX1) <= 3 * a.capacity_stderr


def test_profile_without_symmetrisation():
    h = harmonic_measure([(0, 0, 0), (1, 0, 0)], 4, replicas_per_site=50_000, symmetrize=False)
    e0, e1 = h.estimates
    assert abs(e0 - e1) <= 3 * math.hypot(*h.stderrs)
    assert not h.meta["symmetrized"]


def test_profile_csv_roundtrip(tmp_path):
    h = harmonic_measure(segment(3), 5, replicas_per_site=5_000)
    p = tmp_path / "profile.csv"
    h.to_csv(p)
    g = HarmonicProfile.from_csv(p)
    np.testing.assert_array_equal(g.sites, h.sites)
    np.testing.assert_array_equal(g.estimates, h.estimates)
    assert g.region_id == h.region_id and g.seed == h.seed
    assert open(p).readline().startswith("# region=")


def test_region_too_large():
    with pytest.raises(RegionTooLarge):
        harmonic_measure(Box((0, 0, 0), 3), 0, max_sites=100)


def test_symmetry_orbits():
    labels, order = symmetry_orbits(segment(2).sites())
    assert order == 16
    assert len(set(labels.tolist())) == 2


# ---------------------------------------------------------------- normalisation

def test_normalized_point_mass():
    h = harmonic_measure([(0, 0, 0)], 6, replicas_per_site=10_000)
    m = normalized_harmonic_measure(h)
    assert m.probabilities.tolist() == [1.0]


def test_normalized_symmetric_pair():
    h = harmonic_measure([(0, 0, 0), (0, 0, 1)], 7, replicas_per_site=10_000)
    m = normalized_harmonic_measure(h)
    assert m.probabilities.tolist() == [0.5, 0.5]


@given(st.lists(st.floats(0.01, 1.0), min_size=1, max_size=40))
def test_normalized_sums_to_one(vals):
    v = np.array(vals)
    pts = np.c_[np.arange(len(v)) * 3, np.zeros((len(v), 2), dtype=int)]
    h = HarmonicProfile("x", pts, v, np.full(len(v), 1e-4), float(v.sum()), 1e-4)
    m = normalized_harmonic_measure(h)
    assert math.fsum(m.probabilities.tolist()) == 1.0
    assert m.raw_sum == pytest.approx(v.sum())


def test_normalized_degenerate():
    h = HarmonicProfile("x", np.zeros((1, 3), dtype=int), np.array([0.001]), np.array([0.001]), 0.001, 0.001)
    with pytest.raises(DegenerateCapacity):
        normalized_harmonic_measure(h)


# ---------------------------------------------------------------- variational bound

def test_single_site_saturates():
    ok, bound, slack = variational_upper_bound([(0, 0, 0)], TestFunction.constant([(0, 0, 0)], CAP_0))
    assert ok and slack == pytest.approx(0.0, abs=1e-12)
    assert bound == pytest.approx(CAP_0)


def test_zero_function_infeasible():
    Q = Quiver((0, 0, 0), 10, math.exp(6))
    ok, bound, slack = variational_upper_bound(Q, TestFunction.constant(Q, 0.0))
    assert not ok and bound == 0.0 and slack == -1.0


def test_support_mismatch():
    with pytest.raises(SupportMismatch):
        variational_upper_bound([(0, 0, 0)], TestFunction(np.array([[1, 0, 0]]), np.array([1.0])))
    with pytest.raises(SupportMismatch):
        variational_upper_bound([(0, 0, 0)], TestFunction(np.array([[0, 0, 0]]), np.array([-1.0])))


@given(st.lists(st.tuples(*[st.integers(-3, 3)] * 3), min_size=1, max_size=8, unique=True))
def test_feasible_bound_dominates_capacity(pts):
    # the equilibrium measure is feasible with zero slack; any feasible constant gives a larger total
    cap, e = exact_capacity(pts)
    A = Explicit(np.array(pts))
    c, bound = best_constant_bound(A)
    ok, b2, slack = variational_upper_bound(A, TestFunction.constant(A, c))
    assert ok and slack == pytest.approx(0.0, abs=1e-9)
    assert bound >= cap - 1e-9


def test_quiver_scan():
    rows = quiver_capacity_scan(10, [math.exp(6), math.exp(8), math.exp(10)], 8, walks=100_000)
    for r in rows:
        assert r.cap_mc <= r.cap_bound + 3 * r.cap_stderr
        # bounded against M ln n / ln ln n (the trend is still rising at these scales)
        assert 0.5 < r.scaled_cap < 1.5
        assert r.cap_bound * math.log(math.log(r.n)) / (10 * math.log(r.n)) < 2.0
    assert [r.sites for r in rows] == [1538, 2722, 4242]


def test_quiver_scan_degenerate():
    with pytest.raises(DegenerateScale):
        quiver_capacity_scan(10, [math.exp(2)], 0, walks=10)


# ---------------------------------------------------------------- set functions

SMALL = st.lists(st.tuples(*[st.integers(-2, 2)] * 3), min_size=1, max_size=6, unique=True)


@given(SMALL, SMALL)
def test_exact_subadditive_and_monotone(a, b):
    ca, cb = exact_capacity(a)[0], exact_capacity(b)[0]
    cu = exact_capacity(sorted(set(a) | set(b)))[0]
    assert cu <= ca + cb + 1e-9
    assert cu >= max(ca, cb) - 1e-9


def test_mc_subadditive_and_monotone():
    A = [(0, 0, 0), (1, 0, 0)]
    B = [(1, 0, 0), (1, 1, 0), (3, 0, 0)]
    ca = capacity_estimate(A, 11, walks=200_000)
    cb = capacity_estimate(B, 12, walks=200_000)
    cu = capacity_estimate(sorted(set(A) | set(B)), 13, walks=200_000)
    assert cu[0] <= ca[0] + cb[0] + 3 * math.sqrt(ca[1] ** 2 + cb[1] ** 2 + cu[1] ** 2)
    assert cu[0] >= cb[0] - 3 * math.hypot(cu[1], cb[1])


def test_capacity_estimate_vs_escape_sum():
    cap, se = capacity_estimate(Box((0, 0, 0), 1), 14, walks=400_000)
    assert abs(cap - CAP_BOX1) <= 3 * se
