"""Effective Hamiltonian of 1/2|p|^2 + V by the large-time method on the cell problem.

We evolve  w_t + 1/2|p + Dw|^2 + V = 0  on the periodic unit cell from w = 0.
Once the per-step decrease of w is spatially constant, that constant is Hbar(p)
and w minus its mean is the corrector v.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import HbarGeoError, NoConvergence, NotInterior
from .potential import PotentialSpec

SCHEMES = {"godunov": 0, "lax-friedrichs": 1}
EPS_FLAT_128 = 5e-3


def eps_flat_for(grid_n: int) -> float:
    """Flat-set threshold: 5e-3 at grid 128, halved with every doubling."""
    return EPS_FLAT_128 * 128.0 / grid_n


@numba.njit(cache=True, nogil=True)
def _evolve(V, w0, p1, p2, h, tol, max_steps, scheme, theta_floor, theta_cap):
    n = V.shape[0]
    w = w0.copy()
    wn = np.zeros((n, n))
    nxt = np.empty(n, np.int64)
    prv = np.empty(n, np.int64)
    for i in range(n):
        nxt[i] = i + 1 if i + 1 < n else 0
        prv[i] = i - 1 if i > 0 else n - 1
    theta = theta_floor
    dmax = 0.0
    dmin = 0.0
    dsum = 0.0
    for step in range(max_steps):
        dt = 0.4 * h / theta
        dmax = -1e300
        dmin = 1e300
        dsum = 0.0
        qmax = 0.0
        for i in range(n):
            ip = nxt[i]
            im = prv[i]
            for j in range(n):
                jp = nxt[j]
                jm = prv[j]
                wc = w[i, j]
                xp = p1 + (w[ip, j] - wc) / h
                xm = p1 + (wc - w[im, j]) / h
                yp = p2 + (w[i, jp] - wc) / h
                ym = p2 + (wc - w[i, jm]) / h
                if scheme == 0:
                    # Godunov flux for the convex Hamiltonian 1/2 q^2
                    ax = max(max(xm, 0.0), -min(xp, 0.0))
                    ay = max(max(ym, 0.0), -min(yp, 0.0))
                    hn = 0.5 * (ax * ax + ay * ay) + V[i, j]
                else:
                    thx = max(abs(xp), abs(xm))
                    thy = max(abs(yp), abs(ym))
                    qx = 0.5 * (xp + xm)
                    qy = 0.5 * (yp + ym)
                    hn = 0.5 * (qx * qx + qy * qy) + V[i, j] - 0.5 * thx * (xp - xm) - 0.5 * thy * (yp - ym)
                qloc = max(max(abs(xp), abs(xm)), max(abs(yp), abs(ym)))
                if qloc > qmax:
                    qmax = qloc
                wn[i, j] = wc - dt * hn
                if hn > dmax:
                    dmax = hn
                if hn < dmin:
                    dmin = hn
                dsum += hn
        w, wn = wn, w
        if not math.isfinite(dsum):
            return w, dsum, dmax, dmin, -(step + 1)
        if dmax - dmin <= tol:
            return w, dsum / (n * n), dmax, dmin, step + 1
        theta = min(max(qmax, theta_floor), theta_cap)
    return w, dsum / (n * n), dmax, dmin, -max_steps


def _prolong(v: np.ndarray) -> np.ndarray:
    """Periodic linear interpolation of an n x n field onto 2n x 2n."""
    n = v.shape[0]
    out = np.empty((2 * n, 2 * n))
    vx = 0.5 * (v + np.roll(v, -1, 0))
    out[0::2, 0::2] = v
    out[1::2, 0::2] = vx
    out[0::2, 1::2] = 0.5 * (v + np.roll(v, -1, 1))
    out[1::2, 1::2] = 0.5 * (vx + np.roll(vx, -1, 1))
    return out


@dataclass
class CorrectorField:
    grid_n: int
    values: np.ndarray
    residual: float
    hbar: float
    p: tuple = (0.0, 0.0)
    steps: int = 0
    scheme: str = "godunov"
    # sup of the central-difference defect and the constant C = defect * grid_n
    central_defect: float = float("nan")
    defect_constant: float = float("nan")

    def gradient(self):
        """Central-difference Dv on the grid, periodic."""
        h = 1.0 / self.grid_n
        v = self.values
        return ((np.roll(v, -1, 0) - np.roll(v, 1, 0)) / (2 * h),
                (np.roll(v, -1, 1) - np.roll(v, 1, 1)) / (2 * h))

    def at(self, x) -> np.ndarray:
        """Bilinear periodic interpolation of v at points x (..., 2)."""
        x = np.asarray(x, float)
        n = self.grid_n
        s = np.mod(x, 1.0) * n
        i0 = np.floor(s).astype(int)
        f = s - i0
        i0 %= n
        i1 = (i0 + 1) % n
        v = self.values
        a, b = i0[..., 0], i0[..., 1]
        c, d = i1[..., 0], i1[..., 1]
        fx, fy = f[..., 0], f[..., 1]
        return ((1 - fx) * (1 - fy) * v[a, b] + fx * (1 - fy) * v[c, b]
                + (1 - fx) * fy * v[a, d] + fx * fy * v[c, d])


def solve_cell(spec: PotentialSpec, p, grid_n: int = 128, tol: float = 1e-6,
               max_steps: int = 1_000_000, scheme: str = "godunov",
               warm_start: bool = False) -> CorrectorField:
    """Hbar(p) and a zero-mean corrector on a grid_n^2 cell grid.

    warm_start solves on the half-resolution grid first (recursively down to
    32) and starts the evolution from the interpolated corrector.
    """
    if grid_n < 32 or grid_n & (grid_n - 1):
        raise ValueError("grid_n must be a power of two >= 32")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; choose from {sorted(SCHEMES)}")
    p1, p2 = float(p[0]), float(p[1])
    V = np.ascontiguousarray(spec.sample(grid_n))
    vmin = float(V.min())
    pn = math.hypot(p1, p2)
    theta_floor = max(math.sqrt(max(pn * pn - 2.0 * vmin, 0.0)), 1e-12)
    theta_cap = max(2.0 * (pn + math.sqrt(max(-2.0 * vmin, 0.0))), theta_floor)
    if warm_start and grid_n > 32:
        coarse = solve_cell(spec, p, grid_n // 2, tol, max_steps, scheme, warm_start=True)
        w0 = _prolong(coarse.values)
    else:
        w0 = np.zeros((grid_n, grid_n))
    w, mean_hn, dmax, dmin, steps = _evolve(V, w0, p1, p2, 1.0 / grid_n, tol, max_steps,
                                            SCHEMES[scheme], theta_floor, theta_cap)
    if steps < 0:
        raise NoConvergence(-steps, f"drift spread {dmax - dmin:.3e} > tol {tol:g} at p={p1, p2} "
                                    f"after {-steps} steps (grid {grid_n})")
    hbar = float(mean_hn)
    if hbar < 0:
        if hbar < -tol:
            raise HbarGeoError(f"negative Hbar {hbar:.3e} beyond tolerance at p={p1, p2}")
        hbar = 0.0
    v = w - w.mean()
    residual = float(max(dmax - mean_hn, mean_hn - dmin))
    field_ = CorrectorField(grid_n, v, residual, hbar, (p1, p2), int(steps), scheme)
    g1, g2 = field_.gradient()
    cd = float(np.max(np.abs(0.5 * ((p1 + g1) ** 2 + (p2 + g2) ** 2) + V - hbar)))
    field_.central_defect = cd
    field_.defect_constant = cd * grid_n
    return field_


@dataclass
class HbarGrid:
    p_min: float
    p_max: float
    p_step: float
    hbar_values: np.ndarray
    residuals: np.ndarray
    min_v: float = 0.0
    params: dict = field(default_factory=dict)

    @property
    def axis(self) -> np.ndarray:
        m = self.hbar_values.shape[0]
        return self.p_min + self.p_step * np.arange(m)

    def nodes(self) -> np.ndarray:
        a = self.axis
        P1, P2 = np.meshgrid(a, a, indexing="ij")
        return np.stack([P1, P2], axis=-1)

    @property
    def complete(self) -> bool:
        return bool(np.all(np.isfinite(self.hbar_values)))

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["p1", "p2", "hbar", "residual"])
        a = self.axis
        m = len(a)
        for i in range(m):
            for j in range(m):
                wr.writerow([f"{a[i]:.17g}", f"{a[j]:.17g}",
                             f"{self.hbar_values[i, j]:.17g}", f"{self.residuals[i, j]:.17g}"])
        return buf.getvalue()

    def sidecar(self) -> dict:
        return {"p_min": self.p_min, "p_max": self.p_max, "p_step": self.p_step,
                "min_v": self.min_v, "params": self.params}

    def save(self, stem: str) -> tuple[str, str]:
        with open(stem + ".csv", "w") as fh:
            fh.write(self.to_csv())
        with open(stem + ".json", "w") as fh:
            json.dump(self.sidecar(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return stem + ".csv", stem + ".json"

    @classmethod
    def load(cls, stem: str) -> "HbarGrid":
        with open(stem + ".json") as fh:
            meta = json.load(fh)
        rows = np.loadtxt(stem + ".csv", delimiter=",", skiprows=1, ndmin=2)
        m = int(round(math.sqrt(rows.shape[0])))
        return cls(meta["p_min"], meta["p_max"], meta["p_step"], rows[:, 2].reshape(m, m),
                   rows[:, 3].reshape(m, m), meta.get("min_v", 0.0), meta.get("params", {}))


def _thread_count() -> int:
    env = os.environ.get("HBARGEO_THREADS")
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def sweep_hbar_grid(spec: PotentialSpec, p_box: float, p_step: float, grid_n: int = 64,
                    tol: float = 1e-6, scheme: str = "godunov", threads: int | None = None) -> HbarGrid:
    """Hbar on the square grid [-p_box, p_box]^2 with spacing p_step.

    Only the nodes with (i, j) <= (m-1-i, m-1-j) are solved; the rest are
    filled by Hbar(-p) = Hbar(p).  Failed nodes are stored as NaN.
    """
    m = int(round(2 * p_box / p_step)) + 1
    if abs((m - 1) * p_step - 2 * p_box) > 1e-9 * max(1.0, p_box):
        raise ValueError("p_box must be a multiple of p_step/2 and symmetric about 0")
    axis = -p_box + p_step * np.arange(m)
    jobs = [(i, j) for i in range(m) for j in range(m) if (i, j) <= (m - 1 - i, m - 1 - j)]

    def run(ij):
        i, j = ij
        p = (0.0 if 2 * i == m - 1 else axis[i], 0.0 if 2 * j == m - 1 else axis[j])
        try:
            f = solve_cell(spec, p, grid_n, tol, scheme=scheme)
            return f.hbar, f.residual
        except NoConvergence:
            return math.nan, math.nan

    nthreads = threads or _thread_count()
    if nthreads > 1:
        with ThreadPoolExecutor(nthreads) as ex:
            results = list(ex.map(run, jobs))
    else:
        results = [run(ij) for ij in jobs]
    H = np.full((m, m), np.nan)
    R = np.full((m, m), np.nan)
    for (i, j), (hb, res) in zip(jobs, results):
        H[i, j] = H[m - 1 - i, m - 1 - j] = hb
        R[i, j] = R[m - 1 - i, m - 1 - j] = res
    vmin = float(spec.sample(grid_n).min())
    params = {"grid_n": grid_n, "tol": tol, "scheme": scheme}
    return HbarGrid(-float(p_box), float(p_box), float(p_step), H, R, vmin, params)


def exact_grid(fn, p_box: float, p_step: float, min_v: float) -> HbarGrid:
    """HbarGrid filled by evaluating fn(p) at every node (oracle grids)."""
    m = int(round(2 * p_box / p_step)) + 1
    axis = -p_box + p_step * np.arange(m)
    H = np.array([[fn((a, b)) for b in axis] for a in axis], float)
    return HbarGrid(-float(p_box), float(p_box), float(p_step), H, np.zeros_like(H), min_v,
                    {"source": "exact"})


@dataclass
class GlobalReport:
    evenness_defect: float
    convexity_violation: float
    lower_bound_violation: float
    upper_bound_violation: float
    flat_nodes: np.ndarray
    eps_flat: float

    def bounds_hold(self, slack: float) -> bool:
        return self.lower_bound_violation <= slack and self.upper_bound_violation <= slack


def validate_global_properties(grid: HbarGrid, eps_flat: float = EPS_FLAT_128) -> GlobalReport:
    H = grid.hbar_values
    if not grid.complete:
        raise ValueError("grid has missing nodes")
    m = H.shape[0]
    even = float(np.max(np.abs(H - H[::-1, ::-1])))
    # midpoint convexity over every collinear triple p - d, p, p + d of nodes
    worst = -math.inf
    for d1 in range(0, (m - 1) // 2 + 1):
        for d2 in range(-((m - 1) // 2), (m - 1) // 2 + 1):
            if d1 == 0 and d2 <= 0:
                continue
            a1, a2 = d1, abs(d2)
            if 2 * a1 >= m or 2 * a2 >= m:
                continue
            mid = H[a1:m - a1, a2:m - a2]
            lo = H[0:m - 2 * a1, (0 if d2 >= 0 else 2 * a2):(m - 2 * a2 if d2 >= 0 else m)]
            hi = H[2 * a1:m, (2 * a2 if d2 >= 0 else 0):(m if d2 >= 0 else m - 2 * a2)]
            worst = max(worst, float(np.max(mid - 0.5 * (lo + hi))))
    P = grid.nodes()
    half = 0.5 * np.sum(P * P, axis=-1)
    lower = float(np.max(half + grid.min_v - H))
    upper = float(np.max(H - half))
    flat = P[H <= eps_flat]
    return GlobalReport(even, max(worst, 0.0), max(lower, 0.0), max(upper, 0.0), flat, eps_flat)


def interior_point_check(grid: HbarGrid, eps_flat: float) -> float:
    """Largest node radius r with every node |p| <= r inside {Hbar <= eps_flat}.

    eps_flat must be positive: solver output is clamped at max V, so a zero
    threshold would certify flatness from rounding alone.
    """
    if not eps_flat > 0:
        raise NotInterior(f"eps_flat = {eps_flat:g} cannot certify flatness of numerical output")
    P = grid.nodes().reshape(-1, 2)
    H = grid.hbar_values.reshape(-1)
    r = np.hypot(P[:, 0], P[:, 1])
    order = np.lexsort((H, r))
    best = -1.0
    for k in order:
        if not (H[k] <= eps_flat):
            rfail = r[k]
            # nodes at the same radius as the failing one do not count
            ok = r[order][(r[order] < rfail - 1e-12)]
            best = float(ok.max()) if ok.size else -1.0
            break
    else:
        best = float(r.max())
    if best <= 0.0:
        raise NotInterior(f"no neighbourhood of 0 lies in {{Hbar <= {eps_flat:g}}} on this grid")
    return best
