import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hbargeo import geometry as G
from hbargeo import metric as M
from hbargeo.errors import EmptyInterior, NotAVertex, NotOnBoundary

L = 4 / math.pi


def table_from(fn, window):
    ent = {}
    for m in range(-window, window + 1):
        for n in range(-window, window + 1):
            if (m or n) and math.gcd(abs(m), abs(n)) == 1:
                ent[(m, n)] = float(fn(m, n))
    return M.SupportTable(ent, 0, window)


def rect_table(Lx=1.0, Ly=1.0, window=2):
    return table_from(lambda m, n: Lx * abs(m) + Ly * abs(n), window)


# --- construction ------------------------------------------------------------

def test_separable_rectangle(sep_poly):
    assert len(sep_poly) == 4
    np.testing.assert_allclose(np.abs(sep_poly.vertices), L, atol=2e-2)
    assert sep_poly.symmetry_defect() <= 1e-9
    assert sorted(sep_poly.edge_w) == [(-1, 0), (0, -1), (0, 1), (1, 0)]


def test_scaling(sep_table, sep_poly):
    big = G.build_f0(sep_table.scaled(2.0))
    np.testing.assert_allclose(big.vertices, 2 * sep_poly.vertices, rtol=1e-14, atol=1e-14)


def test_inactive_diagonal(sep_table, sep_poly):
    s = sep_table[(1, 0)] + sep_table[(0, 1)]
    poly = G.build_f0(sep_table.with_entry((1, 1), s))
    assert len(poly) == 4
    np.testing.assert_allclose(poly.vertices, sep_poly.vertices, atol=1e-12)


def test_cut_corner():
    poly = G.build_f0(rect_table().with_entry((1, 1), 1.5))
    assert len(poly) == 6
    assert poly.area == pytest.approx(4 - 0.25, abs=1e-12)


def test_empty_and_unbounded():
    with pytest.raises(EmptyInterior):
        G.build_f0(M.SupportTable({(1, 0): 0.0, (-1, 0): 0.0, (0, 1): 1.0, (0, -1): 1.0}, 0, 1))
    with pytest.raises(EmptyInterior):
        G.build_f0(M.SupportTable({(1, 0): 1.0, (-1, 0): 1.0}, 0, 1))


@settings(max_examples=40, deadline=None)
@given(st.floats(0.3, 3.0), st.floats(-0.9, 0.9), st.floats(0.3, 3.0), st.integers(0, 2 ** 31))
def test_polygon_invariants(l1, shear, l2, seed):
    A = np.array([[l1, shear], [0.0, l2]])
    rng = np.random.default_rng(seed)
    bumps = {}

    def sigma(m, n):
        key = (m, n) if (m, n) > (-m, -n) else (-m, -n)
        bumps.setdefault(key, rng.uniform(0, 0.3))
        return np.linalg.norm(A @ [m, n]) * (1 + bumps[key])

    tab = table_from(sigma, 2)
    poly = G.build_f0(tab)
    V = poly.vertices
    k = len(poly)
    assert poly.area > 0 and poly.symmetry_defect() <= 1e-9
    for i in range(k):
        e1 = V[(i + 1) % k] - V[i]
        e2 = V[(i + 2) % k] - V[(i + 1) % k]
        assert e1[0] * e2[1] - e1[1] * e2[0] > 0  # strictly convex, counterclockwise
        w = np.asarray(poly.edge_w[i], float)
        assert abs(e1 @ w) <= 1e-9 * max(1.0, np.linalg.norm(e1))
        assert V[i] @ w == pytest.approx(tab[poly.edge_w[i]], abs=1e-9)
    for w, s in tab.entries.items():
        assert np.all(V @ np.asarray(w, float) <= s + 1e-9)


def test_json_roundtrip(sep_poly):
    back = G.ConvexPolygon.from_json(sep_poly.to_json())
    np.testing.assert_array_equal(back.vertices, sep_poly.vertices)
    assert back.edge_w == sep_poly.edge_w


def test_svg_well_formed(sep_poly):
    root = ET.fromstring(G.polygon_svg(sep_poly).split("\n", 1)[1])
    assert root.tag.endswith("svg") and root.get("version") == "1.1"


# --- refinement --------------------------------------------------------------

@pytest.fixture(scope="module")
def sep_seq(sep):
    return G.refine_f0(sep, [2, 3, 4], 128)


def test_refinement_area(sep_seq):
    areas = [p.area for p in sep_seq]
    assert all(a2 <= a1 + 1e-3 for a1, a2 in zip(areas, areas[1:]))


def test_perturbed_area_larger(sep, pert):
    # V_pert <= V_sep pointwise, so the Maupertuis weights and sigma grow
    a_sep = G.refine_f0(sep, [2], 128)[0].area
    a_pert = G.refine_f0(pert, [2], 128)[0].area
    assert a_pert > a_sep


def test_flat_edges_rectangle(sep_seq):
    edges = G.detect_flat_edges(sep_seq, 1e-2)
    assert len(edges) == 4 and all(e.stable for e in edges)
    assert sorted(e.normal for e in edges) == [(-1, 0), (0, -1), (0, 1), (1, 0)]
    assert G.detect_flat_edges(sep_seq, 10.0) == []


def test_flat_edges_perturbed(pert):
    counts = []
    for win in (2, 3):
        seq = G.refine_f0(pert, [win, win], [64, 128])
        counts.append(sum(e.stable for e in G.detect_flat_edges(seq, 1e-2)))
    assert counts[0] > 0 and counts[0] <= counts[1]


# --- local structure ---------------------------------------------------------

def test_normal_cone(sep_poly):
    c = G.normal_cone(sep_poly, (sep_poly.vertices[:, 0].max(), 0.0))
    assert c.width == 0.0 and c.start == pytest.approx(0.0, abs=1e-15)
    corner = sep_poly.vertices[np.argmax(sep_poly.vertices.sum(axis=1))]
    c = G.normal_cone(sep_poly, corner)
    assert c.start == pytest.approx(0.0, abs=1e-15) and c.width == pytest.approx(math.pi / 2)
    for q in c.directions(7):
        assert np.all((sep_poly.vertices - corner) @ q <= 1e-9)
    with pytest.raises(NotOnBoundary):
        G.normal_cone(sep_poly, (0.0, 0.0))


def test_homology_fan(sep_table, sep_poly):
    tol = 3 * 5e-5
    corner = sep_poly.vertices[np.argmax(sep_poly.vertices.sum(axis=1))]
    fan = G.homology_fan(corner, sep_table, tol, sep_poly)
    assert set(fan.classes) == {(1, 0), (0, 1), (1, 1)} and all(fan.in_cone)
    assert G.homology_fan((0.0, 0.0), sep_table, tol).classes == []
    mid = (corner[0], 0.0)
    assert G.homology_fan(mid, sep_table, tol).classes == [(1, 0)]


def test_vertex_check_corner(sep_poly):
    corner = sep_poly.vertices[np.argmax(sep_poly.vertices.sum(axis=1))]
    vc = G.vertex_unimodular_check(sep_poly, corner)
    assert {vc.v0, vc.v1} == {(1, 0), (0, 1)}
    assert vc.unimodular and vc.cone_ok
    # labels (v1, v0) = ((1,0), (0,1)) give det(v1^T v0^T) = +1
    assert (vc.v1, vc.v0, vc.det) == ((1, 0), (0, 1), 1) and vc.det_swapped == -1
    with pytest.raises(NotAVertex):
        G.vertex_unimodular_check(sep_poly, (corner[0], 0.0))


def test_vertex_check_non_unimodular():
    tab = M.SupportTable({(1, 0): 1.0, (-1, 0): 1.0, (1, 2): 2.0, (-1, -2): 2.0,
                          (0, 1): 5.0, (0, -1): 5.0, (1, -1): 10.0, (-1, 1): 10.0}, 0, 2)
    poly = G.build_f0(tab)
    v = G._cramer((1, 0), 1.0, (1, 2), 2.0)
    vc = G.vertex_unimodular_check(poly, v)
    assert abs(vc.det) == 2 and not vc.unimodular


def test_classify_rectangle(sep_table, sep_poly):
    rng = np.random.default_rng(0)
    for phi in rng.uniform(0, 2 * math.pi, 40):
        q = sep_poly.ray_boundary((math.cos(phi), math.sin(phi)))
        assert G.classify_boundary_point(q, sep_poly, sep_table, 1e-9).kind == "edge-interior"
    for v in sep_poly.vertices:
        assert G.classify_boundary_point(v, sep_poly, sep_table, 1e-9).kind == "vertex"


def _marked(poly, unstable):
    return [G.EdgeRecord(poly.edge(i), w, 1.0, w not in unstable) for i, w in enumerate(poly.edge_w)]


def test_classify_candidates_pairs():
    tab = rect_table(window=1).with_entry((1, 1), 1.5).with_entry((1, -1), 1.5)
    poly = G.build_f0(tab)
    edges = _marked(poly, {(1, 1), (-1, -1)})
    i = poly.edge_w.index((1, 1))
    p = poly.vertices[i] + 0.3 * (poly.vertices[(i + 1) % len(poly)] - poly.vertices[i])
    a = G.classify_boundary_point(p, poly, tab, 1e-9, edges, prev=G.build_f0(rect_table(window=1)))
    b = G.classify_boundary_point(-p, poly, tab, 1e-9, edges)
    assert a.kind == b.kind == "rational-nonlinear-candidate"
    assert a.normal_class == (1, 1) and b.normal_class == (-1, -1)
    assert a.confidence == pytest.approx(math.sqrt(2), rel=1e-12)


def test_classify_irrational_arc():
    tab = rect_table(window=1).with_entry((1, 1), 1.5).with_entry((1, -1), 1.5)
    poly = G.build_f0(tab)
    edges = _marked(poly, {(1, 0), (1, 1), (-1, 0), (-1, -1)})
    i = poly.edge_w.index((1, 1))
    p = 0.5 * (poly.vertices[i] + poly.vertices[(i + 1) % len(poly)])
    assert G.classify_boundary_point(p, poly, tab, 1e-9, edges).kind == "smooth-irrational"
