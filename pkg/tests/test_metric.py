import math

import numpy as np
import pytest

from hbargeo import cell_pde as C
from hbargeo import metric as M
from hbargeo import potential as P
from hbargeo.errors import BadLevel, OutOfWindow

L = 4 / math.pi


def test_weights(sep):
    g = M.build_metric_grid(sep, 0.0, 64, 1)
    e, r = g.extent, g.resolution
    assert g.weights[e * r, e * r] == 0.0
    assert g.weights[e * r + r // 2, e * r + r // 2] == pytest.approx(math.sqrt(8), abs=1e-12)
    assert g.n == 2 * (g.window + 1) * r + 1
    c = M.build_metric_grid(P.constant(-1.0), 1.0, 64, 1)
    np.testing.assert_allclose(c.weights, 2.0, atol=1e-14)


def test_bad_level_and_window(sep):
    with pytest.raises(BadLevel):
        M.build_metric_grid(sep, -0.5, 64, 1)
    g = M.build_metric_grid(sep, 0.0, 64, 1)
    with pytest.raises(OutOfWindow):
        g.node_of((3.0, 0.0))


def test_geodesic_distances(sep):
    g = M.build_metric_grid(sep, 0.0, 256, 1)
    assert M.geodesic_distance(g, (0.3, 0.2), (0.3, 0.2)) == 0.0
    assert M.geodesic_distance(g, (0, 0), (1, 0)) == pytest.approx(L, abs=2e-2)
    c = M.build_metric_grid(P.constant(-1.0), 0.0, 128, 1)
    assert M.geodesic_distance(c, (0, 0), (0.5, 0)) == pytest.approx(math.sqrt(2) * 0.5, rel=3e-2)


def test_support_values(sep_table):
    assert sep_table[(1, 0)] == pytest.approx(L, abs=2e-2)
    assert sep_table[(1, 1)] == pytest.approx(sep_table[(1, 0)] + sep_table[(0, 1)], abs=2e-2)
    for w in sep_table.keys():
        assert sep_table[w] == sep_table[(-w[0], -w[1])]


def test_support_table_properties(pert):
    tab = M.support_table(pert, 128, 2)
    eps = M.grid_error(pert, 2, (64, 128))
    ws = tab.keys()
    for w1 in ws:
        assert tab[w1] > 0
        for w2 in ws:
            s = (w1[0] + w2[0], w1[1] + w2[1])
            if s in tab.entries:
                assert tab[s] <= tab[w1] + tab[w2] + 2 * eps


def test_support_value_window(sep):
    with pytest.raises(OutOfWindow):
        M.support_value(sep, (2, 1), 64, window=2)


def test_table_json_roundtrip(sep_table):
    back = M.SupportTable.from_json(sep_table.to_json())
    assert back.entries == sep_table.entries


def test_subsolution_inequality(sep):
    f = C.solve_cell(sep, (0.0, 0.0), 64)
    rep = M.subsolution_inequality_check(sep, (0.0, 0.0), f, samples=24)
    assert rep.passed
    p = (L - 0.1, 0.0)
    f = C.solve_cell(sep, p, 64, tol=1e-5)
    pairs = np.array([[[0.0, 0.0], [1.0, 0.0]], [[0.2, 0.0], [0.9, 0.0]]])
    rep = M.subsolution_inequality_check(sep, p, f, pairs=pairs)
    assert rep.passed and abs(rep.worst_margin) < 0.15
    same = M.subsolution_inequality_check(sep, p, f, pairs=np.array([[[0.3, 0.4], [0.3, 0.4]]]))
    assert same.worst_margin == pytest.approx(0.0, abs=1e-12)


def test_min_gap_omega(sep):
    w64, w128, w256 = (M.min_gap_omega(sep, 0.25, r) for r in (64, 128, 256))
    # converges to a positive limit; the lattice error here is from below
    assert min(w64, w128, w256) > 0
    assert abs(w256 - w128) < abs(w128 - w64)
    assert abs(w256 - w128) < 1e-4 * w256
    assert M.min_gap_omega(sep, 0.35, 64) >= w64 - 1e-12
    w4 = M.min_gap_omega(sep.scaled(4.0), 0.25, 64)
    assert w4 == pytest.approx(2 * w64, rel=1e-9)
