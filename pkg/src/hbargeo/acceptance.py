"""Acceptance checks, grouped into named suites.

Each check returns a CheckResult with the measured quantities it compared.
Expensive intermediate results (support tables, polygons, homoclinic
records) are shared through a Context so a suite run computes each once.
"""
from __future__ import annotations

import hashlib
import math
import os
import tempfile
import time
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import cell_pde, geometry, metric, onedim, orbits, potential
from .errors import HbarGeoError

FOUR_OVER_PI = 4.0 / math.pi


@dataclass
class CheckResult:
    criterion: int
    name: str
    passed: bool
    measured: dict = field(default_factory=dict)
    detail: str = ""
    seconds: float = 0.0

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} criterion {self.criterion} ({self.name}): {self.detail}"

    def to_json(self) -> dict:
        return {"criterion": self.criterion, "name": self.name, "passed": self.passed,
                "measured": _plain(self.measured), "detail": self.detail, "seconds": round(self.seconds, 3)}


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    return x


class Context:
    """Shared state for one suite run on the separable test potential."""

    def __init__(self, seed: int = 0, resolution: int = 256, window: int = 3):
        self.seed = seed
        self.resolution = resolution
        self.window = window
        self.h1 = onedim.cosine()
        self.spec = onedim.separable_spec(self.h1, self.h1)

    @cached_property
    def table(self) -> metric.SupportTable:
        tab = metric.support_table(self.spec, self.resolution, self.window)
        tab.eps_grid = metric.grid_error(self.spec, self.window, (self.resolution // 2, self.resolution))
        return tab

    @cached_property
    def polygon(self) -> geometry.ConvexPolygon:
        return geometry.build_f0(self.table)

    @cached_property
    def homoclinic(self) -> orbits.HomoclinicRecord:
        return orbits.shoot_homoclinic(self.spec, (1, 0))

    def hbar_exact(self, p) -> float:
        return onedim.hbar_separable(self.h1, self.h1, p)


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------

def check_rectangle(ctx: Context) -> CheckResult:
    t0 = time.perf_counter()
    poly = ctx.polygon
    elapsed = time.perf_counter() - t0
    half = np.abs(poly.vertices).max(axis=0)
    err = float(np.max(np.abs(half - FOUR_OVER_PI)))
    ok = len(poly) == 4 and err <= 2e-2 and elapsed < 60
    return CheckResult(1, "separable rectangle", ok,
                       {"edges": len(poly), "half_widths": half, "max_error": err, "seconds_build": elapsed},
                       f"{len(poly)} edges, half-width error {err:.2e} (tol 2e-2), {elapsed:.1f} s (< 60 s)")


def check_engine_crosscheck(ctx: Context, grid_n: int = 128, tol: float = 1e-4, n_samples: int = 25,
                            n_boundary: int = 8) -> CheckResult:
    t0 = time.perf_counter()
    rng = np.random.default_rng(ctx.seed)
    P = rng.uniform(-2.0, 2.0, (n_samples, 2))
    errs = []
    for p in P:
        f = cell_pde.solve_cell(ctx.spec, p, grid_n, tol)
        errs.append(abs(f.hbar - ctx.hbar_exact(p)))
    eps = 5e-3
    on, out = [], []
    for k in range(n_boundary):
        phi = 2 * math.pi * (k + 0.5 * (k % 2)) / n_boundary
        q = ctx.polygon.ray_boundary((math.cos(phi), math.sin(phi)))
        on.append(cell_pde.solve_cell(ctx.spec, q, grid_n, tol).hbar)
        out.append(cell_pde.solve_cell(ctx.spec, 1.1 * q, grid_n, tol).hbar)
    elapsed = time.perf_counter() - t0
    max_err = float(max(errs))
    ok = max_err <= 2e-2 and max(on) <= eps and min(out) > eps and elapsed < 300
    return CheckResult(2, "engine cross-validation", ok,
                       {"max_error": max_err, "boundary_max": max(on), "outside_min": min(out),
                        "seconds": elapsed},
                       f"max |pde - exact| {max_err:.2e} (tol 2e-2); boundary max {max(on):.2e} (<= 5e-3); "
                       f"1.1x boundary min {min(out):.2e} (> 5e-3); {elapsed:.0f} s (< 300 s)")


def check_corner(ctx: Context) -> CheckResult:
    tab = ctx.table
    corner = ctx.polygon.vertices[np.argmax(ctx.polygon.vertices.sum(axis=1))]
    tol = 3 * tab.eps_grid
    fan = geometry.homology_fan(corner, tab, tol, ctx.polygon)
    vc = geometry.vertex_unimodular_check(ctx.polygon, corner)
    want = {(1, 0), (0, 1), (1, 1)}
    ok = set(fan.classes) == want and len(fan.classes) == 3 and abs(vc.det) == 1 and vc.cone_ok
    return CheckResult(3, "corner structure", ok,
                       {"corner": corner, "fan": fan.classes, "tight": fan.tight, "fan_tol": tol,
                        "det": vc.det, "det_swapped": vc.det_swapped, "cone_ok": vc.cone_ok},
                       f"fan {sorted(fan.classes)} (want {sorted(want)}), det {vc.det} "
                       f"(swapped {vc.det_swapped}), cone_ok {vc.cone_ok}")


def check_homoclinic_action(ctx: Context) -> CheckResult:
    rec = ctx.homoclinic
    sigma = ctx.table[(1, 0)]
    e_exact = abs(rec.action - FOUR_OVER_PI)
    e_sigma = abs(rec.action - sigma)
    off_axis = float(np.max(np.abs(rec.orbit.positions[:, 1])))
    ok = e_exact <= 1e-3 and e_sigma <= 3e-2 and off_axis <= 1e-8
    return CheckResult(4, "homoclinic action", ok,
                       {"action": rec.action, "sigma": sigma, "error_exact": e_exact,
                        "error_sigma": e_sigma, "off_axis": off_axis},
                       f"action {rec.action:.10f}: |A - 4/pi| {e_exact:.1e} (tol 1e-3), "
                       f"|A - sigma| {e_sigma:.1e} (tol 3e-2), off-axis {off_axis:.1e} (tol 1e-8)")


def lp_example(theta: float, a: float = 1.0, b: float = 2.0, alpha: float = 3.0) -> orbits.LPProblem:
    def F(x):
        return np.stack([alpha * x[1] ** 2, np.zeros_like(x[1])])

    def DF(x):
        z = np.zeros_like(x[1])
        return np.array([[z, 2 * alpha * x[1]], [z, z]])

    return orbits.LPProblem(a, b, F, theta, lambda0=1.9, DF=DF)


def check_lp_exact(ctx: Context, alpha: float = 3.0) -> CheckResult:
    t0 = time.perf_counter()
    meas = {}
    ok = True
    for theta in (0.1, -0.1):
        orb = orbits.lyapunov_perron_orbit(lp_example(theta, alpha=alpha))
        t = orb.times
        exact = np.stack([-alpha * theta ** 2 / 3 * np.exp(-4 * t), theta * np.exp(-2 * t)], axis=1)
        err = float(np.max(np.abs(orb.positions - exact)))
        rho = orb.info["contraction"]
        meas[f"theta={theta:+g}"] = {"sup_error": err, "contraction": rho, "iterations": orb.info["iterations"]}
        ok &= err <= 1e-8 and rho <= 0.5
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 1.0
    meas["seconds"] = elapsed
    worst = max(v["sup_error"] for k, v in meas.items() if k != "seconds")
    rho = max(v["contraction"] for k, v in meas.items() if k != "seconds")
    return CheckResult(5, "Lyapunov-Perron exact example", bool(ok), meas,
                       f"sup error {worst:.1e} (tol 1e-8), contraction {rho:.2e} (<= 0.5), {elapsed:.2f} s (< 1 s)")


def check_near_origin(ctx: Context, n_formula: int = 10, n_orbits: int = 20) -> CheckResult:
    rng = np.random.default_rng(ctx.seed)
    diffs = []
    for _ in range(n_formula):
        a, b, s1, s2, b1, b2 = orbits.random_admissible_endpoints(rng)
        closed = orbits.near_origin_action(a, b, s1, s2, b1, b2)
        diffs.append(abs(closed - orbits.two_ray_quadrature(a, b, s1, s2, b1, b2)))
    formula_ok = max(diffs) <= 1e-8
    # zero-energy connections between admissible endpoints
    margins, attempts = [], 0
    while len(margins) < n_orbits and attempts < 10 * n_orbits:
        attempts += 1
        a, b, s1, s2, b1, b2 = orbits.random_admissible_endpoints(rng)
        for orb in orbits.connect_quadratic(a, b, (s1, -b1 * s1), (s2, b2 * s2)):
            margins.append(orb.action_quadrature() - orbits.two_ray_value(a, b, s1, s2, b1, b2))
            break
    strict_ok = len(margins) >= n_orbits and min(margins) > 0
    ok = formula_ok and strict_ok
    if margins:
        orbit_msg = f"{len(margins)}/{n_orbits} connecting orbits, min margin {min(margins):.2e}"
    else:
        orbit_msg = (f"0/{n_orbits} connecting orbits found in {attempts} admissible endpoint draws "
                     "(zero energy forces beta1*beta2 >= (a/b)^2 > lambda^2)")
    return CheckResult(6, "near-origin action", ok,
                       {"formula_max_diff": max(diffs), "orbits_found": len(margins), "attempts": attempts,
                        "margins": margins},
                       f"closed form vs quadrature {max(diffs):.1e} (tol 1e-8); {orbit_msg}")


def check_decay(ctx: Context, slack: float = 1e-6) -> CheckResult:
    rows = []
    specs = {"separable": ctx.spec, "perturbed-separable": potential.perturbed_separable()}
    for name, spec in specs.items():
        for w in ((1, 0), (0, 1), (1, 1), (1, -1)):
            rec = ctx.homoclinic if (name == "separable" and w == (1, 0)) else orbits.shoot_homoclinic(spec, w)
            for seg, c, center in orbits.homoclinic_tails(spec, rec):
                rep = orbits.decay_check(seg, c, center, slack)
                rows.append({"potential": name, "w": w, "c": c, "worst_margin": rep.worst_margin,
                             "violations": rep.violations})
    ok = all(r["violations"] == 0 for r in rows)
    worst = min(r["worst_margin"] for r in rows)
    return CheckResult(7, "tail decay bounds", ok, {"tails": rows},
                       f"{len(rows)} tails, worst margin {worst:.2e} (slack {slack:g}), "
                       f"{sum(r['violations'] for r in rows)} violations")


def check_global(ctx: Context, grids=(32, 64, 128), p_box: float = 2.0, p_step: float = 0.5,
                 tol: float = 1e-4) -> CheckResult:
    meas = {}
    ok = True
    for name, spec in (("separable", ctx.spec), ("perturbed-separable", potential.perturbed_separable())):
        for g in grids:
            grid = cell_pde.sweep_hbar_grid(spec, p_box, p_step, g, tol)
            if not grid.complete:
                meas[f"{name}/{g}"] = {"complete": False}
                ok = False
                continue
            rep = cell_pde.validate_global_properties(grid, cell_pde.eps_flat_for(g))
            # the convexity slack tightens with the grid: 3e-2 at 128
            cslack = 3e-2 * 128 / g
            row = {"evenness": rep.evenness_defect, "convexity": rep.convexity_violation,
                   "convexity_slack": cslack, "lower": rep.lower_bound_violation,
                   "upper": rep.upper_bound_violation}
            row_ok = rep.evenness_defect == 0 and rep.bounds_hold(2e-2) and rep.convexity_violation <= cslack
            if name == "separable" and g == max(grids):
                try:
                    row["interior_r"] = cell_pde.interior_point_check(grid, cell_pde.eps_flat_for(g))
                except HbarGeoError:
                    row["interior_r"] = 0.0
                row_ok &= row["interior_r"] > 0.5
            meas[f"{name}/{g}"] = row
            ok &= bool(row_ok)
    conv = max(v.get("convexity", math.inf) for v in meas.values())
    r = meas.get(f"separable/{max(grids)}", {}).get("interior_r", float("nan"))
    return CheckResult(8, "global properties", bool(ok), meas,
                       f"{len(meas)} grids; worst convexity {conv:.1e} (slack 3e-2 at 128); interior r {r:.3f} (> 0.5)")


def check_flat_edges(ctx: Context, windows=(2, 3, 4), resolutions=(64, 128, 256),
                     eps_edge: float = 1e-2) -> CheckResult:
    spec = potential.perturbed_separable()
    counts, bad, dets = [], [], []
    for win in windows:
        seq = geometry.refine_f0(spec, [win] * len(resolutions), list(resolutions))
        edges = geometry.detect_flat_edges(seq, eps_edge)
        stable = {e.normal for e in edges if e.stable}
        counts.append(len(stable))
        poly = seq[-1]
        for k, v in enumerate(poly.vertices):
            if tuple(poly.edge_w[k - 1]) in stable and tuple(poly.edge_w[k]) in stable:
                vc = geometry.vertex_unimodular_check(poly, v)
                dets.append(vc.det)
                if abs(vc.det) != 1:
                    bad.append((win, list(v), vc.det))
    monotone = all(c1 <= c2 for c1, c2 in zip(counts, counts[1:]))
    ok = monotone and not bad and bool(dets)
    return CheckResult(9, "flat-edge densification", ok,
                       {"stable_counts": counts, "stable_vertex_dets": dets, "bad_vertices": bad},
                       f"stable edges per window {dict(zip(windows, counts))}; "
                       f"{len(dets)} stable vertices, {len(bad)} with |det| != 1")


def check_determinism(ctx: Context) -> CheckResult:
    from . import cli

    digests = []
    for _ in range(2):
        metric._cached_grid.cache_clear()
        with tempfile.TemporaryDirectory() as d:
            cfg = {"potential": {"template": "separable"}, "seed": ctx.seed}
            runs = [("f0", {"windows": [ctx.window], "resolutions": [ctx.resolution]}),
                    ("hbar", {"p_box": 2.0, "p_step": 0.5, "grid_n": 32, "tol": 1e-5}),
                    ("homoclinic", {"classes": [[1, 0]]})]
            for cmd, extra in runs:
                code = cli.run_command(cmd, dict(cfg, **extra), os.path.join(d, cmd))
                if code != 0:
                    return CheckResult(10, "determinism", False, {"failed_command": cmd}, f"{cmd} exited {code}")
            files = {}
            for root, _, names in os.walk(d):
                for n in sorted(names):
                    path = os.path.join(root, n)
                    with open(path, "rb") as fh:
                        files[os.path.relpath(path, d)] = hashlib.sha256(fh.read()).hexdigest()
            digests.append(files)
    same = digests[0] == digests[1]
    return CheckResult(10, "determinism", same and bool(digests[0]), {"files": digests[0]},
                       f"{len(digests[0])} artifacts, byte-identical across runs: {same}")


CRITERIA = {
    1: check_rectangle,
    2: check_engine_crosscheck,
    3: check_corner,
    4: check_homoclinic_action,
    5: check_lp_exact,
    6: check_near_origin,
    7: check_decay,
    8: check_global,
    9: check_flat_edges,
    10: check_determinism,
}

SUITES = {
    "separable-oracle": [1, 3, 4],
    "engine-crosscheck": [2],
    "lp-exact": [5],
    "near-origin": [6],
    "decay": [7],
    "global-properties": [8],
    "flat-edges": [9],
    "determinism": [10],
    "all": list(CRITERIA),
}


def run_criterion(k: int, ctx: Context) -> CheckResult:
    t0 = time.perf_counter()
    try:
        res = CRITERIA[k](ctx)
    except HbarGeoError as exc:
        res = CheckResult(k, CRITERIA[k].__name__, False, {"error": type(exc).__name__}, str(exc))
    res.seconds = time.perf_counter() - t0
    return res


def run_suites(names, seed: int = 0) -> list[CheckResult]:
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise KeyError(f"unknown suite(s) {unknown}; available: {sorted(SUITES)}")
    ks = sorted({k for n in names for k in SUITES[n]})
    ctx = Context(seed)
    return [run_criterion(k, ctx) for k in ks]
