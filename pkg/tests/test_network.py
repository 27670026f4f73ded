import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from riwalk.errors import BrokenPath, InvalidInput, NoCrossingPath
from riwalk.network import (
    WeightedGraph, dense_conductance, dirichlet_energy, effective_conductance, escape_probability_formula,
    exact_conductance, kregion_level, log_path_conductance, path_conductance_lower_bound, rayleigh_check,
    resistance_to_infinity_bound,
)

A, B, C, D = (0, 0, 0), (1, 0, 0), (2, 0, 0), (1, 1, 0)


def graph(edges, source, sink):
    return WeightedGraph.from_edges(edges, source, sink, log=False)


def test_series_and_parallel():
    g = graph([(A, B, 2.0), (B, C, 3.0)], [A], [C])
    assert effective_conductance(g).effective_conductance == pytest.approx(1.2, abs=1e-9)
    p = graph([(A, B, 2.0), (A, B, 3.0)], [A], [B])
    assert effective_conductance(p).effective_conductance == pytest.approx(5.0, abs=1e-9)


def cube_edges():
    pts = list(itertools.product((0, 1), repeat=3))
    return [(x, y, 1) for x, y in itertools.combinations(pts, 2) if sum(abs(a - b) for a, b in zip(x, y)) == 1]


def test_unit_cube_exact():
    edges = cube_edges()
    exact = exact_conductance(edges, [(0, 0, 0)], [(1, 1, 1)])
    # resistance across a unit-resistor cube is 5/6
    assert exact == Fraction(6, 5)
    g = graph([(x, y, float(w)) for x, y, w in edges], [(0, 0, 0)], [(1, 1, 1)])
    assert effective_conductance(g).effective_conductance == pytest.approx(1.2, abs=1e-9)
    assert effective_conductance(g, method="cg", tol=1e-12).effective_conductance == pytest.approx(1.2, abs=1e-9)


def test_disconnected_returns_zero():
    g = graph([(A, B, 1.0), (C, D, 1.0)], [A], [C])
    sol = effective_conductance(g)
    assert sol.effective_conductance == 0.0 and sol.meta["disconnected"]
    assert sol.effective_resistance == math.inf


def test_terminal_validation():
    with pytest.raises(InvalidInput):
        graph([(A, B, 1.0)], [A], [A])
    with pytest.raises(InvalidInput):
        effective_conductance(graph([(A, B, 1.0)], [A], []))
    with pytest.raises(InvalidInput):
        graph([(A, B, -1.0)], [A], [B])


@st.composite
def random_graphs(draw):
    n = draw(st.integers(2, 12))
    verts = [(i, 0, 0) for i in range(n)]
    pairs = list(itertools.combinations(range(n), 2))
    chosen = draw(st.lists(st.sampled_from(pairs), min_size=1, max_size=len(pairs), unique=True))
    ws = draw(st.lists(st.integers(-8, 8), min_size=len(chosen), max_size=len(chosen)))
    edges = [(verts[a], verts[b], float(w)) for (a, b), w in zip(chosen, ws)]
    s, t = draw(st.lists(st.integers(0, n - 1), min_size=2, max_size=2, unique=True))
    return edges, [verts[s]], [verts[t]]


@given(random_graphs())
def test_solver_matches_dense_oracle(case):
    edges, s, t = case
    g = WeightedGraph.from_edges(edges, s, t)  # log-weights spanning e^{+-8}
    sol = effective_conductance(g)
    assert sol.effective_conductance == pytest.approx(dense_conductance(g), rel=1e-8, abs=1e-12)
    assert sol.potential[list(g.source)].tolist() == [1.0]
    assert sol.potential[list(g.sink)].tolist() == [0.0]
    assert sol.effective_conductance >= 0


@given(random_graphs())
def test_energy_equals_conductance(case):
    edges, s, t = case
    g = WeightedGraph.from_edges(edges, s, t)
    sol = effective_conductance(g)
    # vertices outside the terminals' component carry no current
    assert dirichlet_energy(g, sol.potential) == pytest.approx(sol.effective_conductance, rel=1e-8, abs=1e-12)


def test_extreme_scales():
    # conductances beta^{+-200} in series: the smaller one dominates
    g = WeightedGraph.from_edges([(A, B, 200 * math.log(3)), (B, C, -200 * math.log(3))], [A], [C])
    c = effective_conductance(g).effective_conductance
    assert math.log(c) == pytest.approx(-200 * math.log(3), rel=1e-12)


# ---------------------------------------------------------------- escape formula

def test_escape_formula_single_edge():
    g = graph([(A, B, 7.0)], [], [])
    assert escape_probability_formula(g, A, B) == pytest.approx(1.0)


def test_escape_formula_pendant():
    g = graph([(A, B, 2.0), (A, D, 3.0)], [], [])
    assert escape_probability_formula(g, A, B) == pytest.approx(0.4)
    with pytest.raises(InvalidInput):
        escape_probability_formula(g, A, A)


# ---------------------------------------------------------------- Rayleigh

def test_rayleigh_bridge_removal():
    g = graph([(A, B, 1.0), (B, C, 2.0), (B, D, 1.0)], [A], [C])
    before, after, ok = rayleigh_check(g, ("remove", B, C))
    assert ok and after == 0.0 and before > 0


def test_rayleigh_irrelevant_edge():
    g = graph([(A, B, 1.0), (B, C, 2.0), (C, D, 1.0)], [A], [C])
    before, after, ok = rayleigh_check(g, ("remove", C, D))
    assert ok and after == pytest.approx(before, abs=1e-12)


def test_rayleigh_merge_negative_face():
    # a toy version of merging a cone's far face into one terminal
    edges = [((0, 0, 0), (-1, j, 0), 2.0 ** -j) for j in range(-2, 3)]
    edges += [((-1, j, 0), (-2, j, 0), 0.5) for j in range(-2, 3)]
    edges += [((0, 0, 0), (1, 0, 0), 4.0)]
    face = [(-2, j, 0) for j in range(-2, 3)]
    g = graph(edges, [(1, 0, 0)], face)
    before, after, ok = rayleigh_check(g, ("merge", face))
    assert ok and after >= before - 1e-12


@given(random_graphs(), st.data())
def test_rayleigh_properties(case, data):
    edges, s, t = case
    g = WeightedGraph.from_edges(edges, s, t)
    x, y, _ = data.draw(st.sampled_from(edges))
    _, _, ok = rayleigh_check(g, ("remove", x, y))
    assert ok
    others = [v for v in g.vertices if v not in (s[0], t[0])]
    if len(others) >= 2:
        pick = data.draw(st.lists(st.sampled_from(others), min_size=2, max_size=len(others), unique=True))
        _, _, ok = rayleigh_check(g, ("merge", pick))
        assert ok


def test_merge_validation():
    g = graph([(A, B, 1.0)], [A], [B])
    with pytest.raises(InvalidInput):
        g.merge([A, B])
    with pytest.raises(InvalidInput):
        g.remove_edge(A, C)


def test_edgelist_roundtrip():
    g = graph([(A, B, 2.0), (B, C, 3.0)], [A], [C])
    h = WeightedGraph.from_edgelist(g.to_edgelist())
    assert effective_conductance(h).effective_conductance == pytest.approx(1.2)
    assert h.vertices == g.vertices


# ---------------------------------------------------------------- paths and the transience series

def levels(beta):
    return lambda x, y: max(x[0], y[0]) * math.log(beta)


def test_straight_path_series_value():
    path = [(k, 0, 0) for k in range(6)]
    bound = path_conductance_lower_bound(path, levels(2.0))
    exact = 1.0 / sum(2.0 ** -(i + 1) for i in range(5))
    assert bound == pytest.approx(exact, rel=1e-12)
    g = WeightedGraph.from_edges([(a, b, levels(2.0)(a, b)) for a, b in zip(path[:-1], path[1:])],
                                 [path[0]], [path[-1]])
    assert effective_conductance(g).effective_conductance == pytest.approx(exact, rel=1e-12)


def test_single_edge_path():
    assert path_conductance_lower_bound([(2, 0, 0), (3, 0, 0)], levels(3.0)) == pytest.approx(27.0)


def test_path_bound_below_effective_conductance():
    # a ring: the path is one of two routes
    ring = [(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0)]
    f = levels(2.0)
    edges = [(ring[i], ring[(i + 1) % 4], f(ring[i], ring[(i + 1) % 4])) for i in range(4)]
    g = WeightedGraph.from_edges(edges, [ring[0]], [ring[2]])
    assert path_conductance_lower_bound(ring[:3], f) <= effective_conductance(g).effective_conductance + 1e-12


def test_path_errors():
    with pytest.raises(BrokenPath):
        log_path_conductance([(0, 0, 0), (2, 0, 0)], levels(2.0))
    with pytest.raises(BrokenPath):
        log_path_conductance([(0, 0, 0), (1, 0, 0)], lambda x, y: -math.inf)
    with pytest.raises(InvalidInput):
        log_path_conductance([(0, 0, 0)], levels(2.0))


def test_resistance_series_closed_form():
    bound, finite = resistance_to_infinity_bound(2.0, N=0)
    assert finite and bound == pytest.approx(12.0, abs=1e-9)


@given(st.floats(1.01, 20.0), st.integers(0, 10), st.integers(-3, 3))
def test_resistance_series_scaling(beta, N, dN):
    b0, f0 = resistance_to_infinity_bound(beta, N=N)
    b1, f1 = resistance_to_infinity_bound(beta, N=N + dN)
    assert f0 and f1 and math.isfinite(b0)
    assert b1 == pytest.approx(b0 * beta ** dN, rel=1e-9)


def test_resistance_from_path():
    path = [(0, 0, 0), (0, 1, 0), (1, 1, 0), (2, 1, 0)]
    assert kregion_level(path) == 1
    b, ok = resistance_to_infinity_bound(2.0, path=path, depth=2)
    assert ok and b == pytest.approx(12.0 * 2.0)
    with pytest.raises(NoCrossingPath):
        resistance_to_infinity_bound(2.0, path=path, depth=5)
    with pytest.raises(NoCrossingPath):
        resistance_to_infinity_bound(2.0, path=path[1:])
    assert resistance_to_infinity_bound(1.0, N=0) == (math.inf, False)
