"""Zero-level Maupertuis distances on the universal cover.

At level c the least action of a path, minimised over time parametrisations,
is its length in the degenerate metric sqrt(2 (c - V)) |dx|.  We discretise
that length on a lattice graph (16-neighbour stencil, trapezoid edge weights)
and run Dijkstra.  sigma(w) = distance from lattice point 0 to lattice point w.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numba
import numpy as np

from .errors import BadLevel, OutOfWindow
from .potential import PotentialSpec

OFFSETS = np.array([(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1),
                    (1, 2), (2, 1), (-1, 2), (-2, 1), (1, -2), (2, -1), (-1, -2), (-2, -1)],
                   dtype=np.int64)
NEAR_ZERO = 1e-6


# --- indexed binary heap keyed by (distance, node index) -------------------

@numba.njit(cache=True, nogil=True, inline="always")
def _less(hk, hv, a, b):
    return hk[a] < hk[b] or (hk[a] == hk[b] and hv[a] < hv[b])


@numba.njit(cache=True, nogil=True)
def _swap(hk, hv, pos, a, b):
    hk[a], hk[b] = hk[b], hk[a]
    hv[a], hv[b] = hv[b], hv[a]
    pos[hv[a]] = a
    pos[hv[b]] = b


@numba.njit(cache=True, nogil=True)
def _sift_up(hk, hv, pos, i):
    while i > 0:
        par = (i - 1) >> 1
        if _less(hk, hv, i, par):
            _swap(hk, hv, pos, i, par)
            i = par
        else:
            break


@numba.njit(cache=True, nogil=True)
def _sift_down(hk, hv, pos, i, size):
    while True:
        l = 2 * i + 1
        m = i
        if l < size and _less(hk, hv, l, m):
            m = l
        if l + 1 < size and _less(hk, hv, l + 1, m):
            m = l + 1
        if m == i:
            break
        _swap(hk, hv, pos, i, m)
        i = m


@numba.njit(cache=True, nogil=True)
def _dijkstra(W, h, src, offs, target, stop_r2):
    """Shortest paths from node src on the grid graph of node weights W.

    Stops early when `target` (>= 0) is settled, or when the first node at
    squared lattice distance >= stop_r2 (> 0) from src is settled; returns
    (dist, stop_value) with stop_value the settling distance (inf otherwise).
    """
    ny, nx = W.shape
    N = ny * nx
    dist = np.full(N, np.inf)
    pos = np.full(N, -1, np.int64)  # -1 unseen, -2 settled
    hk = np.empty(N)
    hv = np.empty(N, np.int64)
    K = offs.shape[0]
    lens = np.empty(K)
    for k in range(K):
        lens[k] = h * math.sqrt(offs[k, 0] ** 2 + offs[k, 1] ** 2)
    si, sj = src // nx, src % nx
    dist[src] = 0.0
    hk[0] = 0.0
    hv[0] = src
    pos[src] = 0
    size = 1
    while size > 0:
        d = hk[0]
        u = hv[0]
        size -= 1
        if size > 0:
            _swap(hk, hv, pos, 0, size)
            _sift_down(hk, hv, pos, 0, size)
        pos[u] = -2
        i, j = u // nx, u % nx
        if u == target:
            return dist, d
        if stop_r2 > 0 and (i - si) ** 2 + (j - sj) ** 2 >= stop_r2:
            return dist, d
        wu = W[i, j]
        for k in range(K):
            ii = i + offs[k, 0]
            jj = j + offs[k, 1]
            if ii < 0 or jj < 0 or ii >= ny or jj >= nx:
                continue
            v = ii * nx + jj
            pv = pos[v]
            if pv == -2:
                continue
            nd = d + 0.5 * (wu + W[ii, jj]) * lens[k]
            if nd < dist[v]:
                dist[v] = nd
                if pv == -1:
                    hk[size] = nd
                    hv[size] = v
                    pos[v] = size
                    size += 1
                    _sift_up(hk, hv, pos, size - 1)
                else:
                    hk[pv] = nd
                    _sift_up(hk, hv, pos, pv)
    return dist, np.inf


# --- grids -----------------------------------------------------------------

@dataclass
class MetricGrid:
    """Node weights sqrt(2 (c - V)) on the cover [-window-1, window+1]^2."""

    resolution: int
    window: int
    level: float
    weights: np.ndarray
    clamped: int = 0
    near_zero_extra: int = 0

    @property
    def extent(self) -> int:
        return self.window + 1

    @property
    def h(self) -> float:
        return 1.0 / self.resolution

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    def node_of(self, x) -> int:
        x = np.asarray(x, float)
        e = self.extent
        if np.any(np.abs(x) > e + 1e-12):
            raise OutOfWindow(f"point {tuple(x)} outside the cover [-{e}, {e}]^2")
        i, j = np.rint((x + e) * self.resolution).astype(int)
        return int(i) * self.n + int(j)

    def point_of(self, node: int) -> np.ndarray:
        i, j = divmod(node, self.n)
        return np.array([i, j], float) / self.resolution - self.extent

    def distances_from(self, x, target: int = -1, stop_r2: int = 0):
        return _dijkstra(self.weights, self.h, self.node_of(x), OFFSETS, target, stop_r2)


def build_metric_grid(spec: PotentialSpec, c: float, resolution: int = 256, window: int = 3) -> MetricGrid:
    if c < 0:
        raise BadLevel(f"level c = {c} < 0")
    if resolution < 64:
        raise ValueError("resolution must be >= 64")
    cell = spec.sample(resolution)  # one period, tiled so the weights are exactly periodic
    rad = 2.0 * (c - cell)
    clamped = int(np.count_nonzero(rad < 0))
    wcell = np.sqrt(np.maximum(rad, 0.0))
    e = window + 1
    reps = 2 * e
    tiled = np.tile(wcell, (reps, reps))
    # close the last row/column so the cover has 2*e*res + 1 nodes per side
    tiled = np.concatenate([tiled, tiled[:1]], axis=0)
    tiled = np.concatenate([tiled, tiled[:, :1]], axis=1)
    near = wcell < NEAR_ZERO
    near[0, 0] = False if c == 0 else near[0, 0]
    extra = int(np.count_nonzero(near))
    return MetricGrid(resolution, window, float(c), np.ascontiguousarray(tiled), clamped, extra)


@lru_cache(maxsize=8)
def _cached_grid(spec: PotentialSpec, c: float, resolution: int, window: int) -> MetricGrid:
    return build_metric_grid(spec, c, resolution, window)


def geodesic_distance(grid: MetricGrid, x, y) -> float:
    tgt = grid.node_of(y)
    _, d = grid.distances_from(x, target=tgt)
    return float(d)


# --- support values --------------------------------------------------------

def _primitive(m: int, n: int) -> bool:
    return math.gcd(abs(m), abs(n)) == 1


def _order_key(w):
    return (max(abs(w[0]), abs(w[1])), w[0], w[1])


@dataclass
class SupportTable:
    entries: dict
    resolution: int
    window: int
    eps_grid: float = float("nan")
    meta: dict = field(default_factory=dict)

    def __getitem__(self, w) -> float:
        return self.entries[tuple(int(k) for k in w)]

    def keys(self):
        return sorted(self.entries, key=_order_key)

    def scaled(self, factor: float) -> "SupportTable":
        return SupportTable({w: factor * s for w, s in self.entries.items()}, self.resolution,
                            self.window, self.eps_grid * abs(factor), dict(self.meta))

    def restricted(self, window: int) -> "SupportTable":
        ent = {w: s for w, s in self.entries.items() if max(abs(w[0]), abs(w[1])) <= window}
        return SupportTable(ent, self.resolution, window, self.eps_grid, dict(self.meta))

    def with_entry(self, w, sigma: float) -> "SupportTable":
        ent = dict(self.entries)
        w = (int(w[0]), int(w[1]))
        ent[w] = ent[(-w[0], -w[1])] = float(sigma)
        return SupportTable(ent, self.resolution, self.window, self.eps_grid, dict(self.meta))

    def to_json(self) -> dict:
        out = {"resolution": self.resolution, "window": self.window,
               "entries": [{"w": list(w), "sigma": self.entries[w]} for w in self.keys()]}
        if math.isfinite(self.eps_grid):
            out["eps_grid"] = self.eps_grid
        if self.meta:
            out["meta"] = self.meta
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, d: dict) -> "SupportTable":
        ent = {(int(e["w"][0]), int(e["w"][1])): float(e["sigma"]) for e in d["entries"]}
        return cls(ent, int(d["resolution"]), int(d["window"]), float(d.get("eps_grid", math.nan)),
                   d.get("meta", {}))


def lattice_distances(spec: PotentialSpec, resolution: int = 256, window: int = 3) -> dict:
    """d(0, w) for every lattice point w with |w|_inf <= window (one Dijkstra)."""
    grid = _cached_grid(spec, 0.0, resolution, window)
    dist, _ = grid.distances_from((0.0, 0.0))
    dist = dist.reshape(grid.n, grid.n)
    e, r = grid.extent, resolution
    out = {}
    for m in range(-window, window + 1):
        for n in range(-window, window + 1):
            if m or n:
                out[(m, n)] = float(dist[(m + e) * r, (n + e) * r])
    return out


def support_table(spec: PotentialSpec, resolution: int = 256, window: int = 3) -> SupportTable:
    """sigma(w) for primitive w with |w|_inf <= window.

    A path from 0 to -w, reversed and shifted by w, is a path from 0 to w of
    the same weight (the weights are exactly periodic), so both lattice
    estimates bound sigma(w) from the same side; we keep the smaller one.
    """
    d = lattice_distances(spec, resolution, window)
    ent = {}
    for (m, n), s in d.items():
        if _primitive(m, n):
            ent[(m, n)] = min(s, d[(-m, -n)])
    return SupportTable(ent, resolution, window, meta={"spec": spec.to_json()})


def support_value(spec: PotentialSpec, w, resolution: int = 256, window: int | None = None) -> float:
    w = (int(w[0]), int(w[1]))
    if w == (0, 0):
        raise ValueError("w must be nonzero")
    need = max(abs(w[0]), abs(w[1]))
    if window is None:
        window = need + 1
    if window < need + 1:
        raise OutOfWindow(f"window {window} < |w|_inf + 1 = {need + 1}")
    d = lattice_distances(spec, resolution, window)
    return min(d[w], d[(-w[0], -w[1])])


def grid_error(spec: PotentialSpec, window: int, resolutions=(128, 256), classes=None) -> float:
    """Largest change of sigma(w) between the last two resolutions."""
    tabs = [support_table(spec, r, window) for r in resolutions[-2:]]
    ws = classes or tabs[-1].keys()
    return max(abs(tabs[-1][w] - tabs[-2][w]) for w in ws)


# --- diagnostics -----------------------------------------------------------

@dataclass
class SubsolutionReport:
    pairs: int
    worst_margin: float
    violations: int
    slack: float

    @property
    def passed(self) -> bool:
        return self.violations == 0


def subsolution_inequality_check(spec: PotentialSpec, p, corrector, samples: int = 64,
                                 resolution: int = 128, slack: float = 3e-2, seed: int = 0,
                                 pairs=None) -> SubsolutionReport:
    """Check h(x, y) >= p.(y - x) + v(y) - v(x) - slack on random pairs.

    Pairs are x in the unit cell, y = x + d with d uniform in [-1, 1]^2;
    pass `pairs` (array (k, 2, 2)) to fix them.
    """
    p = np.asarray(p, float)
    if pairs is None:
        rng = np.random.default_rng(seed)
        xs = rng.random((samples, 2))
        ys = xs + rng.uniform(-1.0, 1.0, (samples, 2))
        pairs = np.stack([xs, ys], axis=1)
    grid = _cached_grid(spec, 0.0, resolution, 2)
    worst = math.inf
    bad = 0
    for x, y in pairs:
        # snap to nodes so the right side uses the same points as the graph
        xs_ = grid.point_of(grid.node_of(x))
        ys_ = grid.point_of(grid.node_of(y))
        d = geodesic_distance(grid, xs_, ys_)
        rhs = float(p @ (ys_ - xs_) + corrector.at(ys_) - corrector.at(xs_))
        margin = d - rhs
        worst = min(worst, margin)
        if margin < -slack:
            bad += 1
    return SubsolutionReport(len(pairs), worst, bad, slack)


def _local_escape(spec: PotentialSpec, x0, delta: float, resolution: int) -> float:
    """Distance from x0 to the complement of its delta-ball on a local lattice."""
    r = int(math.ceil(delta * resolution)) + 3
    ax = np.arange(-r, r + 1) / resolution
    X1, X2 = np.meshgrid(x0[0] + ax, x0[1] + ax, indexing="ij")
    W = np.sqrt(np.maximum(-2.0 * spec.value(np.stack([X1, X2], -1)), 0.0))
    n = 2 * r + 1
    stop = int(math.ceil((delta * resolution) ** 2 - 1e-9))
    _, d = _dijkstra(np.ascontiguousarray(W), 1.0 / resolution, r * n + r, OFFSETS, -1, stop)
    return float(d)


def min_gap_omega(spec: PotentialSpec, delta: float, resolution: int = 128, base: int = 32,
                  refine: int = 4) -> float:
    """Estimate inf h(x, y) over |x - y| >= delta.

    Escape costs are computed from a base x grid of base^2 points in one cell;
    the `refine` best base points are then searched on the full-resolution
    nodes of their surrounding base cell.
    """
    if not 0 < delta < 0.5:
        raise ValueError("delta must lie in (0, 0.5)")
    if resolution % base:
        raise ValueError("base must divide resolution")
    pts = np.arange(base) / base
    vals = np.array([[_local_escape(spec, (a, b), delta, resolution) for b in pts] for a in pts])
    best = float(vals.min())
    order = np.argsort(vals, axis=None, kind="stable")[:refine]
    stride = resolution // base
    for k in order:
        i, j = divmod(int(k), base)
        for di in range(-stride + 1, stride):
            for dj in range(-stride + 1, stride):
                x = ((i * stride + di) / resolution, (j * stride + dj) / resolution)
                best = min(best, _local_escape(spec, x, delta, resolution))
    return best
