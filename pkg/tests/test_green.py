import io
import math

import numpy as np
import pytest

from riwalk.srw import green, green_function, green_matrix, green_oracle

# Watson's integral: 1 / (1 - Polya return probability)
G00 = 1.516386059151978


def test_origin_value():
    assert green.g0() == pytest.approx(G00, abs=1e-12)
    assert green_oracle((0, 0, 0)) == pytest.approx(G00, abs=1e-12)


def test_neighbour_identity():
    # harmonicity at 0: mean over neighbours equals g(0,0) - 1
    assert green_function((0, 0, 0), (1, 0, 0)) == pytest.approx(G00 - 1.0, abs=1e-10)


@pytest.mark.parametrize("x", [(2, 1, 0), (3, 3, 3), (7, 0, 2), (12, 5, 1)])
def test_table_matches_quadrature(x):
    assert green_function((0, 0, 0), x) == pytest.approx(green_oracle(x), abs=1e-10)


def test_table_symmetric():
    tab = green.load_table()
    np.testing.assert_array_equal(tab, tab[::-1, ::-1, ::-1])
    np.testing.assert_array_equal(tab, np.transpose(tab, (1, 0, 2)))
    np.testing.assert_array_equal(tab, np.transpose(tab, (2, 1, 0)))
    P = np.array([[0, 0, 0], [3, -1, 2], [5, 5, 0]])
    G = green_matrix(P)
    np.testing.assert_array_equal(G, G.T)


def test_discrete_harmonicity():
    tab = green.load_table()
    c = tab[1:-1, 1:-1, 1:-1]
    mean = (tab[2:, 1:-1, 1:-1] + tab[:-2, 1:-1, 1:-1] + tab[1:-1, 2:, 1:-1] + tab[1:-1, :-2, 1:-1]
            + tab[1:-1, 1:-1, 2:] + tab[1:-1, 1:-1, :-2]) / 6.0
    lap = mean - c
    R = c.shape[0] // 2
    delta = np.zeros_like(lap)
    delta[R, R, R] = 1.0
    # g(0,x) - mean of neighbours = delta_0(x)
    assert np.abs(lap + delta).max() < 1e-6


def test_far_field():
    assert green_function((0, 0, 0), (50, 0, 0)) == pytest.approx(3 / (2 * math.pi * 50), rel=0.01)
    # crossover mismatch against the oracle just past the table
    for x in [(21, 0, 0), (15, 15, 0), (12, 12, 12)]:
        far = green.green_far(np.array([x]))[0]
        assert far == pytest.approx(green_oracle(x), rel=5e-3)


def test_table_file_roundtrip(tmp_path):
    vals = np.arange(27, dtype=float)
    p = tmp_path / "t.bin"
    green.write_table(p, vals, R=1)
    with open(p, "rb") as fh:
        R, data = green.read_table(io.BufferedReader(fh))
    assert R == 1
    np.testing.assert_array_equal(data, vals)
    assert open(p, "rb").read().startswith(green.MAGIC)


def test_four_dimensional_origin():
    assert green.green_origin(4) == pytest.approx(green.G4_ORIGIN, rel=1e-10)
