"""Polygonal model of the flat set F0 = {p : p.w <= sigma(w) for all w}.

Edges carry the integer class w whose constraint is active on them.  Vertices
are recomputed from consecutive active pairs by Cramer's rule, whose
denominator det(w_i, w_j) is an exact integer.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInterior, NotAVertex, NotOnBoundary
from .metric import SupportTable, support_table

CULL = 1e-12


def _perp(v):
    """Rotation by +90 degrees."""
    return np.array([-v[1], v[0]], float)


def _cramer(w1, s1, w2, s2) -> np.ndarray:
    det = w1[0] * w2[1] - w1[1] * w2[0]  # integer
    if det == 0:
        raise ZeroDivisionError("parallel constraints")
    return np.array([(s1 * w2[1] - s2 * w1[1]) / det, (s2 * w1[0] - s1 * w2[0]) / det])


def _angle(v) -> float:
    return math.atan2(v[1], v[0])


@dataclass
class ConvexPolygon:
    vertices: np.ndarray  # (k, 2), counterclockwise
    edge_w: list  # edge i joins vertex i to vertex i+1
    edge_sigma: list
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.edge_w)

    @property
    def area(self) -> float:
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def edge(self, i):
        k = len(self)
        return self.vertices[i % k], self.vertices[(i + 1) % k]

    def edge_lengths(self) -> np.ndarray:
        return np.linalg.norm(np.roll(self.vertices, -1, axis=0) - self.vertices, axis=1)

    def support(self, w) -> float:
        return float(np.max(self.vertices @ np.asarray(w, float)))

    def scaled(self, factor: float) -> "ConvexPolygon":
        return ConvexPolygon(self.vertices * factor, list(self.edge_w), [factor * s for s in self.edge_sigma],
                             dict(self.meta))

    def symmetry_defect(self) -> float:
        """Hausdorff-type distance between the vertex set and its negation."""
        V = self.vertices
        d = np.linalg.norm(V[:, None, :] + V[None, :, :], axis=-1)
        return float(max(d.min(axis=1).max(), d.min(axis=0).max()))

    def boundary_locate(self, p):
        """(distance to boundary, edge index, parameter s in [0, 1] along the edge)."""
        p = np.asarray(p, float)
        best = (math.inf, -1, 0.0)
        for i in range(len(self)):
            a, b = self.edge(i)
            d = b - a
            s = float(np.clip((p - a) @ d / (d @ d), 0.0, 1.0))
            dist = float(np.linalg.norm(a + s * d - p))
            if dist < best[0]:
                best = (dist, i, s)
        return best

    def ray_boundary(self, direction) -> np.ndarray:
        """Boundary point t*direction, t > 0 (0 is interior)."""
        u = np.asarray(direction, float)
        t = min(s / float(np.dot(w, u)) for w, s in zip(self.edge_w, self.edge_sigma) if np.dot(w, u) > 0)
        return t * u

    def to_json(self) -> dict:
        return {"vertices": [list(map(float, v)) for v in self.vertices],
                "edges": [{"w": list(w), "sigma": s} for w, s in zip(self.edge_w, self.edge_sigma)],
                "area": self.area, "meta": self.meta}

    @classmethod
    def from_json(cls, d: dict) -> "ConvexPolygon":
        return cls(np.array(d["vertices"], float), [tuple(e["w"]) for e in d["edges"]],
                   [float(e["sigma"]) for e in d["edges"]], d.get("meta", {}))


def _clip(poly, w, s):
    """Clip a CCW polygon [(vertex, edge id)] by p.w <= s; the new edge gets id w."""
    out = []
    n = len(poly)
    wv = np.asarray(w, float)
    for k in range(n):
        (a, ida), (b, _) = poly[k], poly[(k + 1) % n]
        fa, fb = a @ wv - s, b @ wv - s
        if fa <= 0:
            out.append((a, ida))
            if fb > 0:
                t = fa / (fa - fb)
                out.append((a + t * (b - a), w))
        elif fb <= 0:
            t = fa / (fa - fb)
            out.append((a + t * (b - a), ida))
    return out


def build_f0(table: SupportTable) -> ConvexPolygon:
    """Intersection of the half-planes p.w <= sigma(w) over the table."""
    items = sorted(table.entries.items(), key=lambda kv: (_angle(kv[0]), kv[0]))
    big = 1.0 + 4.0 * max(s for _, s in items) * 1e3
    poly = [(np.array([-big, -big]), None), (np.array([big, -big]), None),
            (np.array([big, big]), None), (np.array([-big, big]), None)]
    for w, s in items:
        if s <= 0:
            raise EmptyInterior(f"sigma{w} = {s} <= 0")
        poly = _clip(poly, w, s)
        if len(poly) < 3:
            raise EmptyInterior("half-plane intersection is degenerate")
    ids = [e for _, e in poly]
    if any(e is None for e in ids):
        raise EmptyInterior("table does not bound the polygon in every direction")
    # merge repeated ids, then drop constraints whose edge is shorter than CULL
    ws = [ids[k] for k in range(len(ids)) if ids[k] != ids[k - 1]] or ids[:1]
    while True:
        verts = [_cramer(ws[k - 1], table[ws[k - 1]], ws[k], table[ws[k]]) for k in range(len(ws))]
        lens = [float(np.linalg.norm(verts[(k + 1) % len(ws)] - verts[k])) for k in range(len(ws))]
        k = int(np.argmin(lens))
        if lens[k] >= CULL or len(ws) <= 3:
            break
        ws.pop(k)
    # vertex k is the start of edge k, i.e. the meet of edges k-1 and k
    V = np.array(verts)
    poly_ = ConvexPolygon(V, [tuple(w) for w in ws], [float(table[w]) for w in ws],
                          {"resolution": table.resolution, "window": table.window})
    if poly_.area <= CULL:
        raise EmptyInterior(f"polygon area {poly_.area:.3e}")
    return poly_


def refine_f0(spec, windows, resolutions) -> list[ConvexPolygon]:
    """Polygons for (window, resolution) stages; a scalar resolution is reused."""
    windows = list(windows)
    if np.isscalar(resolutions):
        resolutions = [int(resolutions)] * len(windows)
    resolutions = list(resolutions)
    if len(resolutions) != len(windows):
        raise ValueError("windows and resolutions must have equal length")
    if any(np.diff(windows) < 0) or any(np.diff(resolutions) < 0):
        raise ValueError("windows and resolutions must be non-decreasing")
    out = []
    for win, res in zip(windows, resolutions):
        poly = build_f0(support_table(spec, res, win))
        out.append(poly)
    return out


@dataclass
class EdgeRecord:
    endpoints: tuple
    normal: tuple
    length: float
    stable: bool
    sigma: float = math.nan
    drift: float = math.nan

    def to_json(self) -> dict:
        return {"endpoints": [list(map(float, e)) for e in self.endpoints], "normal": list(self.normal),
                "length": self.length, "stable": self.stable, "sigma": self.sigma, "drift": self.drift}


def detect_flat_edges(seq: list[ConvexPolygon], eps_edge: float = 1e-2) -> list[EdgeRecord]:
    """Edges of the last polygon longer than eps_edge, with a stability flag.

    An edge is stable when the previous stage has an edge with the same
    normal whose endpoints are within eps_edge/4 of the current ones.
    """
    if len(seq) < 2:
        raise ValueError("need at least two refinement stages")
    last, prev = seq[-1], seq[-2]
    prev_edges = {w: prev.edge(i) for i, w in enumerate(prev.edge_w)}
    out = []
    for i, w in enumerate(last.edge_w):
        a, b = last.edge(i)
        length = float(np.linalg.norm(b - a))
        if length <= eps_edge:
            continue
        drift = math.inf
        if w in prev_edges:
            pa, pb = prev_edges[w]
            drift = max(float(np.linalg.norm(pa - a)), float(np.linalg.norm(pb - b)))
        out.append(EdgeRecord((a.copy(), b.copy()), tuple(int(k) for k in w), length,
                              drift < eps_edge / 4, last.edge_sigma[i], drift))
    return out


@dataclass
class NormalCone:
    start: float  # angle of the first normal
    width: float  # counterclockwise angular width
    vertex: int = -1
    edge: int = -1

    def directions(self, k: int = 2) -> np.ndarray:
        th = self.start + self.width * np.linspace(0, 1, k)
        return np.stack([np.cos(th), np.sin(th)], axis=1)

    def contains(self, q, tol: float = 1e-9) -> bool:
        d = (_angle(q) - self.start) % (2 * math.pi)
        return d <= self.width + tol or d >= 2 * math.pi - tol


def normal_cone(poly: ConvexPolygon, p, tol: float = 1e-9) -> NormalCone:
    """Unit outer normals of supporting lines at the boundary point nearest p."""
    dist, i, s = poly.boundary_locate(p)
    if dist > tol:
        raise NotOnBoundary(f"point {tuple(np.asarray(p, float))} is {dist:.3e} from the boundary")
    k = len(poly)
    a, b = poly.edge(i)
    L = float(np.linalg.norm(b - a))
    at_start = s * L <= tol
    at_end = (1 - s) * L <= tol
    if at_start or at_end:
        v = i if at_start else (i + 1) % k
        w_in, w_out = poly.edge_w[v - 1], poly.edge_w[v]
        th0 = _angle(w_in)
        width = (_angle(w_out) - th0) % (2 * math.pi)
        return NormalCone(th0, width, vertex=v)
    return NormalCone(_angle(poly.edge_w[i]), 0.0, edge=i)


@dataclass
class HomologyFan:
    point: tuple
    classes: list
    tight: list
    in_cone: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"point": list(map(float, self.point)), "classes": [list(w) for w in self.classes],
                "tight": [list(w) for w in self.tight], "in_cone": self.in_cone}


def homology_fan(p, table: SupportTable, tol: float, poly: ConvexPolygon | None = None,
                 ang_tol: float = 1e-6) -> HomologyFan:
    """Classes supported at p, reduced to the shape {v0, v1} or {v0, v1, v0 + v1}.

    `tight` lists every table class with p.w >= sigma(w) - tol.  When sigma is
    additive along the cone (as for separable V) every lattice combination of
    the two extreme classes is tight, so the fan keeps the two extreme
    classes and their sum when that sum is itself tight.
    """
    p = np.asarray(p, float)
    tight = sorted((w for w, s in table.entries.items() if p @ np.asarray(w, float) >= s - tol),
                   key=lambda w: (_angle(w), w))
    if len(tight) <= 1:
        classes = list(tight)
    else:
        mid = np.sum([np.asarray(w, float) / math.hypot(*w) for w in tight], axis=0)
        ref = _angle(mid)
        rel = [((_angle(w) - ref + math.pi) % (2 * math.pi)) - math.pi for w in tight]
        lo = tight[int(np.argmin(rel))]
        hi = tight[int(np.argmax(rel))]
        classes = [lo, hi]
        s = (lo[0] + hi[0], lo[1] + hi[1])
        if s in tight and s not in classes:
            classes.append(s)
    in_cone = []
    if poly is not None and classes:
        cone = normal_cone(poly, p, tol=max(tol, 1e-9) * 10)
        in_cone = [cone.contains(np.asarray(w, float), ang_tol) for w in classes]
    return HomologyFan(tuple(p), classes, tight, in_cone)


@dataclass
class VertexCheck:
    v0: tuple
    v1: tuple
    det: int
    det_swapped: int
    cone_ok: bool

    @property
    def unimodular(self) -> bool:
        return abs(self.det) == 1


def vertex_unimodular_check(poly: ConvexPolygon, p, tol: float = 1e-9, ang_tol: float = 1e-9,
                            delta: float = 0.0) -> VertexCheck:
    """Active pair at a vertex, ordered by the cone equation.

    The edges leaving the vertex run along (-1)^i v_i^perp (perp = +90 deg),
    i = 0, 1.  det is that of the matrix with columns v1, v0; det_swapped the
    same with the labels exchanged.
    """
    p = np.asarray(p, float)
    d = np.linalg.norm(poly.vertices - p, axis=1)
    k = int(np.argmin(d))
    if d[k] > tol:
        raise NotAVertex(f"nearest vertex is {d[k]:.3e} away")
    n = len(poly)
    w_in, w_out = poly.edge_w[k - 1], poly.edge_w[k]
    v0, v1 = w_out, w_in
    out_dir = poly.vertices[(k + 1) % n] - p
    in_dir = poly.vertices[k - 1] - p
    ok = True
    for vec, sgn, edge_vec in ((v0, 1.0, out_dir), (v1, -1.0, in_dir)):
        want = sgn * _perp(np.asarray(vec, float))
        want /= np.linalg.norm(want)
        L = float(np.linalg.norm(edge_vec))
        got = edge_vec / L
        ang = math.acos(max(-1.0, min(1.0, float(want @ got))))
        ok &= ang <= ang_tol and L >= delta
    det = int(v1[0] * v0[1] - v0[0] * v1[1])
    return VertexCheck(tuple(v0), tuple(v1), det, -det, bool(ok))


@dataclass
class PointClassification:
    point: tuple
    kind: str  # edge-interior | vertex | smooth-irrational | rational-nonlinear-candidate
    cone: NormalCone
    normal_class: tuple | None = None
    confidence: float = math.nan


def _boundary_length(poly: ConvexPolygon, A, B) -> float:
    """Length of poly's boundary between the rays through A and B (counterclockwise)."""
    pa, pb = poly.ray_boundary(A), poly.ray_boundary(B)
    th_a = _angle(A)
    span = (_angle(B) - th_a) % (2 * math.pi)
    inside = [v for v in poly.vertices if 0 < (_angle(v) - th_a) % (2 * math.pi) < span]
    inside.sort(key=lambda v: (_angle(v) - th_a) % (2 * math.pi))
    path = [pa, *inside, pb]
    return float(sum(np.linalg.norm(q - p) for p, q in zip(path, path[1:])))


def _primitive_directions(window: int):
    out = []
    for m in range(-window, window + 1):
        for n in range(-window, window + 1):
            if (m or n) and math.gcd(abs(m), abs(n)) == 1:
                out.append((m, n))
    return out


def classify_boundary_point(p, poly: ConvexPolygon, table: SupportTable, tol: float = 1e-9,
                            edges: list[EdgeRecord] | None = None, prev: ConvexPolygon | None = None,
                            ang_tol: float = 1e-3) -> PointClassification:
    """Linear / corner / nonlinear-candidate verdict for a boundary point.

    Without `edges` every polygon edge counts as a flat edge.  With them, a
    point on an unstable edge (or at a vertex touching one) belongs to an
    unresolved arc between stable edges; its normal is estimated from the
    arc's chord and tested against rational directions of the table window.
    `prev` (the previous refinement stage) gives a confidence: the factor by
    which the arc length shrank.
    """
    cone = normal_cone(poly, p, tol)
    stable = None
    if edges is not None:
        stable = {e.normal for e in edges if e.stable}
    n = len(poly)

    def is_stable(i):
        return stable is None or tuple(poly.edge_w[i % n]) in stable

    if cone.vertex < 0:
        if is_stable(cone.edge):
            return PointClassification(tuple(p), "edge-interior", cone, tuple(poly.edge_w[cone.edge]))
        i0 = cone.edge
    else:
        v = cone.vertex
        if is_stable(v - 1) and is_stable(v):
            return PointClassification(tuple(p), "vertex", cone)
        i0 = v if not is_stable(v) else v - 1
    # walk to the unstable arc's ends
    lo = i0
    while not is_stable(lo - 1) and (i0 - lo) < n:
        lo -= 1
    hi = i0
    while not is_stable(hi + 1) and (hi - i0) < n:
        hi += 1
    A = poly.vertices[lo % n]
    B = poly.vertices[(hi + 1) % n]
    chord = B - A
    normal = -_perp(chord)  # outward for a counterclockwise boundary
    normal /= np.linalg.norm(normal)
    est = NormalCone(_angle(normal), 0.0, edge=i0)
    best, err = None, math.inf
    for w in _primitive_directions(table.window):
        u = np.asarray(w, float) / math.hypot(*w)
        e = math.acos(max(-1.0, min(1.0, float(u @ normal))))
        if e < err:
            best, err = w, e
    arc = float(np.sum(poly.edge_lengths()[[k % n for k in range(lo, hi + 1)]]))
    conf = math.nan
    if prev is not None:
        prev_arc = _boundary_length(prev, A, B)
        conf = prev_arc / arc if arc > 0 else math.inf
    kind = "rational-nonlinear-candidate" if err <= ang_tol else "smooth-irrational"
    return PointClassification(tuple(p), kind, est, best if err <= ang_tol else None, conf)


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def polygon_svg(poly: ConvexPolygon, edges: list[EdgeRecord] | None = None, vertex_checks=None,
                size: int = 480, title: str = "") -> str:
    """Well-formed SVG 1.1 of the polygon; stable edges drawn thick."""
    R = float(np.abs(poly.vertices).max()) * 1.25
    sc = size / (2 * R)

    def tr(q):
        return (q[0] + R) * sc, (R - q[1]) * sc

    stable = {e.normal: e.stable for e in (edges or [])}
    parts = ['<?xml version="1.0" encoding="UTF-8"?>',
             f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{size}" height="{size}" '
             f'viewBox="0 0 {size} {size}">',
             f'<rect width="{size}" height="{size}" fill="white"/>',
             f'<line x1="0" y1="{size / 2:.3f}" x2="{size}" y2="{size / 2:.3f}" stroke="#ccc"/>',
             f'<line x1="{size / 2:.3f}" y1="0" x2="{size / 2:.3f}" y2="{size}" stroke="#ccc"/>']
    if title:
        parts.append(f'<text x="8" y="16" font-size="12" font-family="monospace">{title}</text>')
    for i, w in enumerate(poly.edge_w):
        a, b = poly.edge(i)
        (x1, y1), (x2, y2) = tr(a), tr(b)
        st = stable.get(tuple(w))
        color = "#c0392b" if st else ("#2c3e50" if st is None else "#95a5a6")
        width = 3 if st else 1.5
        parts.append(f'<line x1="{x1:.3f}" y1="{y1:.3f}" x2="{x2:.3f}" y2="{y2:.3f}" '
                     f'stroke="{color}" stroke-width="{width}"/>')
        if st or st is None:
            mx, my = tr(0.5 * (a + b) + 0.08 * R * np.asarray(w, float) / math.hypot(*w))
            parts.append(f'<text x="{mx:.3f}" y="{my:.3f}" font-size="10" font-family="monospace" '
                         f'text-anchor="middle">({w[0]},{w[1]})</text>')
    for vc in vertex_checks or []:
        (x, y), det = tr(vc[0]), vc[1]
        col = "#27ae60" if abs(det) == 1 else "#e67e22"
        parts.append(f'<circle cx="{x:.3f}" cy="{y:.3f}" r="3" fill="{col}"/>')
        parts.append(f'<text x="{x + 4:.3f}" y="{y - 4:.3f}" font-size="9" font-family="monospace">'
                     f'det={det}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def dumps_polygon(poly: ConvexPolygon) -> str:
    return json.dumps(poly.to_json(), indent=2, sort_keys=True)
