"""Command-line front end.

    hbargeo hbar --config run.json --out out/ --seed 7
    hbargeo verify --suite separable-oracle --out report/

A run is configured by a JSON object (``--config``) whose keys can be
overridden with ``--set key=<json>``.  Every output embeds a hash of the
resolved configuration.  Exit codes: 0 success, 1 bad input, 2 solver
failure; ``verify`` returns the number of failed checks (capped at 125).
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys

import numpy as np

from . import acceptance, cell_pde, geometry, metric, orbits, potential
from .errors import HbarGeoError
from .potential import PotentialSpec

COMMANDS = ("hbar", "f0", "homoclinic", "lp-demo", "verify")

DEFAULTS = {
    "hbar": {"p_box": 2.0, "p_step": 0.25, "grid_n": 64, "tol": 1e-5, "scheme": "godunov"},
    "f0": {"windows": [1, 2, 3], "resolutions": 256, "eps_edge": 1e-2},
    "homoclinic": {"classes": [[1, 0], [0, 1], [1, 1], [1, -1]], "r0": 1e-3, "dt": 1e-3, "tol": 1e-10},
    "lp-demo": {"a": 1.0, "b": 2.0, "alpha": 3.0, "theta": 0.1, "lambda0": 1.9},
    "verify": {"suites": ["separable-oracle"]},
}


class InputError(Exception):
    """Malformed configuration or missing input file (exit code 1)."""


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def resolve_potential(entry) -> PotentialSpec:
    if entry is None:
        return potential.separable()
    if isinstance(entry, str):
        if entry in potential.TEMPLATES:
            return potential.from_template(entry)
        if not os.path.exists(entry):
            raise InputError(f"potential file not found: {entry}")
        try:
            return potential.load_spec(entry)
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise InputError(f"cannot read potential file {entry}: {exc}") from exc
    if isinstance(entry, dict):
        try:
            return PotentialSpec.from_json(entry)
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"bad potential entry: {exc}") from exc
    raise InputError(f"potential must be a template name, file path or object, got {type(entry).__name__}")


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    if not os.path.exists(path):
        raise InputError(f"config file not found: {path}")
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON in {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise InputError(f"config {path} must hold a JSON object")
    return cfg


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:16]


def _check_tolerances(cfg: dict):
    for k, v in cfg.items():
        if (k == "tol" or k.startswith("eps")) and not (isinstance(v, (int, float)) and v > 0):
            raise InputError(f"{k} must be a positive number, got {v!r}")


class Writer:
    """Writes outputs into one directory, stamping each with the config hash."""

    def __init__(self, out_dir: str, cfg: dict):
        self.out = out_dir
        self.hash = config_hash(cfg)
        self.seed = cfg.get("seed", 0)
        self.files: list[str] = []
        os.makedirs(out_dir, exist_ok=True)

    def _path(self, name):
        self.files.append(name)
        return os.path.join(self.out, name)

    def json(self, name: str, obj: dict):
        obj = dict(obj, config_hash=self.hash, seed=self.seed)
        with open(self._path(name), "w") as fh:
            json.dump(acceptance._plain(obj), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def csv(self, name: str, text: str):
        with open(self._path(name), "w") as fh:
            fh.write(text)
            fh.write(f"# config_hash={self.hash} seed={self.seed}\n")

    def svg(self, name: str, text: str):
        stamp = f"<!-- config_hash={self.hash} seed={self.seed} -->\n"
        head, _, rest = text.partition("\n")
        with open(self._path(name), "w") as fh:
            fh.write(head + "\n" + stamp + rest)

    def manifest(self, status: str, **extra):
        self.json("manifest.json", dict(extra, status=status, files=sorted(self.files)))


# ---------------------------------------------------------------------------
# contour plot
# ---------------------------------------------------------------------------

# marching-squares edge pairs per case; corners 0..3 = (i,j), (i+1,j), (i+1,j+1), (i,j+1)
_CASES = {1: [(3, 0)], 2: [(0, 1)], 3: [(3, 1)], 4: [(1, 2)], 5: [(3, 0), (1, 2)], 6: [(0, 2)],
          7: [(3, 2)], 8: [(2, 3)], 9: [(0, 2)], 10: [(0, 1), (2, 3)], 11: [(1, 2)], 12: [(3, 1)],
          13: [(0, 1)], 14: [(3, 0)]}


def contour_segments(axis: np.ndarray, H: np.ndarray, level: float):
    """Line segments of {H = level} on the node grid H[i, j] at (axis[i], axis[j])."""
    segs = []
    m = len(axis)
    for i in range(m - 1):
        for j in range(m - 1):
            c = [H[i, j], H[i + 1, j], H[i + 1, j + 1], H[i, j + 1]]
            if not all(math.isfinite(v) for v in c):
                continue
            pts = [(axis[i], axis[j]), (axis[i + 1], axis[j]), (axis[i + 1], axis[j + 1]), (axis[i], axis[j + 1])]
            case = sum(1 << k for k in range(4) if c[k] > level)
            for e1, e2 in _CASES.get(case, []):
                ends = []
                for e in (e1, e2):
                    a, b = e, (e + 1) % 4
                    t = (level - c[a]) / (c[b] - c[a])
                    ends.append((pts[a][0] + t * (pts[b][0] - pts[a][0]), pts[a][1] + t * (pts[b][1] - pts[a][1])))
                segs.append(tuple(ends))
    return segs


def hbar_svg(grid: cell_pde.HbarGrid, eps_flat: float, n_levels: int = 8, size: int = 480) -> str:
    axis, H = grid.axis, grid.hbar_values
    R = max(abs(grid.p_min), abs(grid.p_max))
    sc = size / (2 * R)

    def tr(q):
        return (q[0] + R) * sc, (R - q[1]) * sc

    top = float(np.nanmax(H)) if np.any(np.isfinite(H)) else 1.0
    levels = [eps_flat] + list(np.linspace(eps_flat, top, n_levels + 2)[1:-1])
    parts = ['<?xml version="1.0" encoding="UTF-8"?>',
             f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{size}" height="{size}" '
             f'viewBox="0 0 {size} {size}">',
             f'<rect width="{size}" height="{size}" fill="white"/>']
    for q, h in zip(grid.nodes().reshape(-1, 2), H.reshape(-1)):
        if h <= eps_flat:
            x, y = tr(q)
            parts.append(f'<circle cx="{x:.3f}" cy="{y:.3f}" r="2" fill="#f5b041"/>')
    for k, lev in enumerate(levels):
        color = "#c0392b" if k == 0 else "#2c3e50"
        for (p, q) in contour_segments(axis, H, lev):
            (x1, y1), (x2, y2) = tr(p), tr(q)
            parts.append(f'<line x1="{x1:.3f}" y1="{y1:.3f}" x2="{x2:.3f}" y2="{y2:.3f}" '
                         f'stroke="{color}" stroke-width="{2 if k == 0 else 1}"/>')
    parts.append('<text x="8" y="16" font-size="12" font-family="monospace">Hbar level lines; '
                 f'flat set Hbar &lt;= {eps_flat:.3g}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_hbar(cfg: dict, spec: PotentialSpec, w: Writer) -> int:
    grid = cell_pde.sweep_hbar_grid(spec, float(cfg["p_box"]), float(cfg["p_step"]), int(cfg["grid_n"]),
                                    float(cfg["tol"]), cfg["scheme"])
    eps = cell_pde.eps_flat_for(int(cfg["grid_n"]))
    w.csv("hbar.csv", grid.to_csv())
    w.json("hbar.json", dict(grid.sidecar(), potential=spec.to_json(), eps_flat=eps))
    w.svg("hbar.svg", hbar_svg(grid, eps))
    if not grid.complete:
        bad = grid.nodes()[~np.isfinite(grid.hbar_values)]
        w.manifest("partial", failed_nodes=bad)
        print(f"error: {len(bad)} cell problems did not converge", file=sys.stderr)
        return 2
    w.manifest("ok")
    return 0


def cmd_f0(cfg: dict, spec: PotentialSpec, w: Writer) -> int:
    windows = [int(k) for k in cfg["windows"]]
    res = cfg["resolutions"]
    res = [int(res)] * len(windows) if np.isscalar(res) else [int(r) for r in res]
    if len(res) != len(windows):
        raise InputError("windows and resolutions must have equal length")
    try:
        tables = [metric.support_table(spec, r, win) for win, r in zip(windows, res)]
        seq = [geometry.build_f0(t) for t in tables]
    except HbarGeoError:
        w.manifest("failed")
        raise
    table, poly = tables[-1], seq[-1]
    table.eps_grid = metric.grid_error(spec, windows[-1], (res[-1] // 2, res[-1]))
    edges = geometry.detect_flat_edges(seq, float(cfg["eps_edge"])) if len(seq) >= 2 else []
    stable = {e.normal for e in edges if e.stable} if edges else set(poly.edge_w)
    vertices = []
    for k, v in enumerate(poly.vertices):
        vc = geometry.vertex_unimodular_check(poly, v)
        fan = geometry.homology_fan(v, table, 3 * table.eps_grid, poly)
        vertices.append({"point": v, "v0": vc.v0, "v1": vc.v1, "det": vc.det, "det_swapped": vc.det_swapped,
                         "cone_ok": vc.cone_ok, "fan": fan.classes,
                         "stable": poly.edge_w[k - 1] in stable and poly.edge_w[k] in stable})
    areas = [p.area for p in seq]
    w.json("table.json", table.to_json())
    w.json("f0.json", {"potential": spec.to_json(),
                       "stages": [{"window": win, "resolution": r, "area": p.area, "edges": len(p)}
                                  for win, r, p in zip(windows, res, seq)],
                       "area_nonincreasing": all(a2 <= a1 + 1e-3 for a1, a2 in zip(areas, areas[1:])),
                       "polygon": poly.to_json(), "edges": [e.to_json() for e in edges],
                       "vertices": vertices, "eps_grid": table.eps_grid})
    checks = [(v["point"], v["det"]) for v in vertices]
    w.svg("f0.svg", geometry.polygon_svg(poly, edges or None, checks,
                                         title=f"F0 window {windows[-1]} res {res[-1]}"))
    w.manifest("ok")
    return 0


def cmd_homoclinic(cfg: dict, spec: PotentialSpec, w: Writer) -> int:
    recs = []
    for cls in cfg["classes"]:
        rec = orbits.shoot_homoclinic(spec, tuple(int(k) for k in cls), r0=float(cfg["r0"]),
                                      tol=float(cfg["tol"]), dt=float(cfg["dt"]))
        recs.append(rec)
        w.csv(f"orbit_{cls[0]}_{cls[1]}.csv", rec.orbit.to_csv())
    w.json("homoclinic.json", {"potential": spec.to_json(), "records": [r.to_json() for r in recs]})
    w.manifest("ok")
    return 0


def cmd_lp_demo(cfg: dict, spec: PotentialSpec, w: Writer) -> int:
    a, b, alpha, theta = (float(cfg[k]) for k in ("a", "b", "alpha", "theta"))
    prob = acceptance.lp_example(theta, a, b, alpha)
    prob.lambda0 = float(cfg["lambda0"])
    orb = orbits.lyapunov_perron_orbit(prob)
    t = orb.times
    out = {"a": a, "b": b, "alpha": alpha, "theta": theta, "lambda0": prob.lambda0, **orb.info}
    if a == 1.0 and b == 2.0:
        exact = np.stack([-alpha * theta ** 2 / 3 * np.exp(-4 * t), theta * np.exp(-2 * t)], axis=1)
        out["sup_error_exact"] = float(np.max(np.abs(orb.positions - exact)))
    w.json("lp.json", out)
    w.csv("lp_orbit.csv", orb.to_csv())
    w.manifest("ok")
    return 0


def cmd_verify(cfg: dict, spec: PotentialSpec, w: Writer) -> int:
    suites = cfg["suites"]
    if isinstance(suites, str):
        suites = [suites]
    unknown = [s for s in suites if s not in acceptance.SUITES]
    if unknown:
        print(f"error: unknown suite(s) {', '.join(unknown)}; available: {', '.join(sorted(acceptance.SUITES))}",
              file=sys.stderr)
        return 1
    results = acceptance.run_suites(suites, seed=int(cfg.get("seed", 0)))
    for r in results:
        print(r.line())
    failed = sum(not r.passed for r in results)
    w.json("verify.json", {"suites": suites, "failed": failed, "results": [r.to_json() for r in results]})
    w.manifest("ok" if failed == 0 else "failed")
    return min(failed, 125)


HANDLERS = {"hbar": cmd_hbar, "f0": cmd_f0, "homoclinic": cmd_homoclinic, "lp-demo": cmd_lp_demo,
            "verify": cmd_verify}


def run_command(cmd: str, cfg: dict, out_dir: str) -> int:
    """Run one subcommand on a resolved config; returns the exit code."""
    try:
        cfg = dict(DEFAULTS[cmd], **cfg)
        _check_tolerances(cfg)
        spec = resolve_potential(cfg.get("potential"))
        w = Writer(out_dir, cfg)
        w.json("config.json", {"command": cmd, "config": cfg})
        return HANDLERS[cmd](cfg, spec, w)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except HbarGeoError as exc:
        print(f"solver error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 2


def _parse_set(items) -> dict:
    out = {}
    for item in items or []:
        key, sep, val = item.partition("=")
        if not sep:
            raise InputError(f"--set expects key=value, got {item!r}")
        try:
            out[key] = json.loads(val)
        except json.JSONDecodeError:
            out[key] = val
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hbargeo", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", default=f"hbargeo-{name}", help="output directory")
        p.add_argument("--seed", type=int, help="seed for randomized sampling")
        p.add_argument("--potential", help="template name or potential JSON file")
        p.add_argument("--set", action="append", metavar="KEY=JSON", help="override a config key")
        if name == "verify":
            p.add_argument("--suite", action="append", help=f"one of {sorted(acceptance.SUITES)}")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        cfg.update(_parse_set(args.set))
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.seed is not None:
        if args.seed < 0:
            print("error: seed must be non-negative", file=sys.stderr)
            return 1
        cfg["seed"] = args.seed
    cfg.setdefault("seed", 0)
    if args.potential:
        cfg["potential"] = args.potential
    if getattr(args, "suite", None):
        cfg["suites"] = args.suite
    return run_command(args.command, cfg, args.out)


if __name__ == "__main__":
    sys.exit(main())
