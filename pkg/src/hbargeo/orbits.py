"""Characteristics of 1/2|p|^2 + V: integration, homoclinic shooting, local analysis.

Orbits solve xi'' = -DV(xi).  Zero-energy orbits asymptotic to lattice
translates of the maximiser are found by shooting on the launch angle; their
actions are the arc integral of |xi'|^2 plus closed-form tails from the
linearised flow near the maximiser.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_simpson, quad, simpson
from scipy.optimize import brentq

from .errors import BadBeta, BlowUp, ContractionFailure, NoConnection, NotConverging
from .potential import CriticalData, lambda_proof, lambda_statement, locate_maximum

# fourth-order symmetric composition of velocity Verlet
_W1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
_W0 = -(2.0 ** (1.0 / 3.0)) * _W1
_DRIFT = (0.5 * _W1, 0.5 * (_W0 + _W1), 0.5 * (_W0 + _W1), 0.5 * _W1)
_KICK = (_W1, _W0, _W1)


class QuadraticModel:
    """W(x) = -(a^2 x1^2 + b^2 x2^2)/2, the local model at a nondegenerate maximum."""

    def __init__(self, a: float, b: float):
        self.a, self.b = float(a), float(b)
        self._d = np.array([self.a ** 2, self.b ** 2])

    def value(self, x):
        x = np.asarray(x, float)
        out = -0.5 * (x ** 2) @ self._d
        return out if np.ndim(out) else float(out)

    def gradient(self, x):
        return -np.asarray(x, float) * self._d

    def hessian(self, x):
        x = np.asarray(x, float)
        return np.broadcast_to(np.diag(-self._d), x.shape[:-1] + (2, 2)).copy()

    @property
    def critical(self) -> CriticalData:
        return CriticalData.from_rates(self.a, self.b)


@dataclass
class Orbit:
    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    energies: np.ndarray
    info: dict = field(default_factory=dict)

    @property
    def energy(self) -> float:
        return float(self.energies[0])

    @property
    def energy_drift(self) -> float:
        e = self.energies
        return float(np.max(np.abs(e - e[0]))) if np.all(np.isfinite(e)) else math.nan

    def reversed(self) -> "Orbit":
        """xi(-t): same path, opposite direction."""
        t = self.times
        return Orbit(t[-1] + t[0] - t[::-1], self.positions[::-1].copy(), -self.velocities[::-1],
                     self.energies[::-1].copy(), dict(self.info))

    def translated(self, k) -> "Orbit":
        return Orbit(self.times, self.positions + np.asarray(k, float), self.velocities, self.energies,
                     dict(self.info))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("t,x1,x2,v1,v2,energy\n")
        for t, x, v, e in zip(self.times, self.positions, self.velocities, self.energies):
            buf.write(f"{t:.17g},{x[0]:.17g},{x[1]:.17g},{v[0]:.17g},{v[1]:.17g},{e:.17g}\n")
        return buf.getvalue()


def _project(pot, X, P, E0):
    """Rescale velocities so that 1/2|P|^2 + V(X) = E0."""
    ke = E0 - np.atleast_1d(pot.value(X))
    sp = np.linalg.norm(P, axis=-1)
    target = np.sqrt(2.0 * np.maximum(ke, 0.0))
    scale = np.where(sp > 0, target / np.where(sp > 0, sp, 1.0), 1.0)
    return P * scale[:, None]


def _step(pot, X, P, dt):
    for k in range(3):
        X = X + _DRIFT[k] * dt * P
        P = P - _KICK[k] * dt * pot.gradient(X)
    X = X + _DRIFT[3] * dt * P
    return X, P


def integrate_characteristic(pot, x0, v0, T: float, dt: float = 1e-3, project: bool = True,
                             window: float = 100.0) -> Orbit:
    """Integrate xi'' = -DV(xi) on [0, T] with a 4th-order symmetric scheme."""
    if dt > 1e-2:
        raise ValueError("dt must be <= 1e-2")
    n = int(math.ceil(T / dt - 1e-9))
    dt = T / n if n else dt
    X = np.asarray(x0, float).reshape(1, 2)
    P = np.asarray(v0, float).reshape(1, 2)
    E0 = float(0.5 * P[0] @ P[0] + pot.value(X[0]))
    xs = np.empty((n + 1, 2))
    vs = np.empty((n + 1, 2))
    xs[0], vs[0] = X[0], P[0]
    for i in range(1, n + 1):
        X, P = _step(pot, X, P, dt)
        if project:
            P = _project(pot, X, P, E0)
        if not np.all(np.isfinite(X)) or np.abs(X).max() > window:
            raise BlowUp(f"|xi| left the window {window} at t={i * dt:.4g}")
        xs[i], vs[i] = X[0], P[0]
    en = 0.5 * np.sum(vs * vs, axis=1) + np.asarray(pot.value(xs))
    return Orbit(np.arange(n + 1) * dt, xs, vs, en, {"dt": dt, "projected": project})


# ---------------------------------------------------------------------------
# homoclinic orbits
# ---------------------------------------------------------------------------

def _local_frame(spec):
    """Maximiser, Hessian eigen-data and S = sqrt(-D^2 V) there.

    Unlike critical_data this accepts equal eigenvalues (isotropic maxima).
    """
    if isinstance(spec, QuadraticModel):
        xs = np.zeros(2)
    else:
        xs = locate_maximum(spec)
    w, U = np.linalg.eigh(spec.hessian(xs))
    if w[1] >= 0:
        raise ValueError("maximum is degenerate; no hyperbolic frame")
    S = U @ np.diag(np.sqrt(-w)) @ U.T
    a, b = math.sqrt(-w[1]), math.sqrt(-w[0])
    crit = CriticalData(xs, a * a, b * b, U[:, 1], U[:, 0], lambda_statement(a, b) if b > a else 0.0,
                        lambda_proof(a, b) if b > a else 0.0)
    return xs, S, crit


def tail_action(S: np.ndarray, xi) -> float:
    """Action of the linearised zero-energy flow from xi to the maximiser (or back)."""
    xi = np.asarray(xi, float)
    return 0.5 * float(xi @ S @ xi)


@dataclass
class HomoclinicRecord:
    homology: tuple
    action: float
    orbit: Orbit
    terminal_gap: float
    limiting_dirs: tuple
    start: np.ndarray = None
    end: np.ndarray = None
    angle: float = math.nan
    parts: dict = field(default_factory=dict)

    def translate(self, k) -> "HomoclinicRecord":
        k = np.asarray(k, float)
        return replace(self, orbit=self.orbit.translated(k), start=self.start + k, end=self.end + k)

    def time_reverse(self) -> "HomoclinicRecord":
        return replace(self, homology=(-self.homology[0], -self.homology[1]), orbit=self.orbit.reversed(),
                       limiting_dirs=(self.limiting_dirs[1], self.limiting_dirs[0]),
                       start=self.end, end=self.start)

    def to_json(self) -> dict:
        return {"homology": list(self.homology), "action": self.action, "terminal_gap": self.terminal_gap,
                "limiting_dirs": [list(map(float, d)) for d in self.limiting_dirs],
                "angle": self.angle, "parts": self.parts}


def _gcd_primitive(w) -> bool:
    return math.gcd(abs(int(w[0])), abs(int(w[1]))) == 1


def _launch(spec, xs, S, phis, r0):
    U = np.stack([np.cos(phis), np.sin(phis)], axis=-1)
    X = xs + r0 * U
    P = (r0 * U) @ S.T  # tangent to the linearised unstable manifold
    return X, _project(spec, X, P, 0.0)


def _sweep(spec, xs, S, target, w, phis, r0, dt, t_max, arc_max):
    """Fly a batch of zero-energy trajectories; return (status, dmin, sign)."""
    K = len(phis)
    X, P = _launch(spec, xs, S, phis, r0)
    status = np.zeros(K, int)  # 0 flying, 1 hit target, 2 captured elsewhere, 3 gave up
    dmin = np.full(K, np.inf)
    sign = np.zeros(K)
    arc = np.zeros(K)
    left = np.zeros(K, bool)
    w = np.asarray(w, float)
    nsteps = int(t_max / dt)
    for _ in range(nsteps):
        Xn, Pn = _step(spec, X, P, dt)
        Pn = _project(spec, Xn, Pn, 0.0)
        fly = status == 0
        X = np.where(fly[:, None], Xn, X)
        P = np.where(fly[:, None], Pn, P)
        arc += np.where(fly, np.linalg.norm(Pn, axis=1) * dt, 0.0)
        rel = target - X
        d = np.linalg.norm(rel, axis=1)
        better = fly & (d < dmin)
        dmin = np.where(better, d, dmin)
        cr = P[:, 0] * rel[:, 1] - P[:, 1] * rel[:, 0]
        sign = np.where(better, np.sign(cr), sign)
        y = X - xs
        k = np.rint(y)
        dk = np.linalg.norm(y - k, axis=1)
        left |= np.linalg.norm(y, axis=1) > 2 * r0
        at_origin = (k[:, 0] == 0) & (k[:, 1] == 0)
        at_target = (k[:, 0] == w[0]) & (k[:, 1] == w[1])
        hit = fly & (d <= r0)
        caught = fly & ~hit & (dk <= r0) & ~at_target & (~at_origin | left)
        gone = fly & ~hit & ~caught & ((arc > arc_max) | (d > dmin + 0.5))
        status = np.where(hit, 1, np.where(caught, 2, np.where(gone, 3, status)))
        if not np.any(status == 0):
            break
    sign = np.where(status == 1, 0.0, sign)
    return status, dmin, sign


def shoot_homoclinic(spec, w, r0: float = 1e-3, tol: float = 1e-10, dt: float = 1e-3,
                     n_angles: int = 64, batch: int = 16, capture: float = 0.3) -> HomoclinicRecord:
    """Zero-energy orbit from the maximiser x* to x* + w, by shooting on the launch angle."""
    w = (int(w[0]), int(w[1]))
    if w == (0, 0) or not _gcd_primitive(w):
        raise ValueError(f"homology class {w} is not primitive")
    if not 1e-4 <= r0 <= 1e-2:
        raise ValueError("r0 must lie in [1e-4, 1e-2]")
    xs, S, crit = _local_frame(spec)
    target = xs + np.array(w, float)
    wn = math.hypot(*w)
    arc_max = 10.0 * wn
    t_max = 4.0 * math.log(1.0 / r0) / crit.a + 10.0 * wn
    fly = lambda ph: _sweep(spec, xs, S, target, w, np.asarray(ph, float), r0, dt, t_max, arc_max)

    phis = 2 * math.pi * np.arange(n_angles) / n_angles
    st, dm, sg = fly(phis)
    hits = [phis[i] for i in range(n_angles) if st[i] == 1]
    candidates = []
    for i in range(n_angles):
        j = (i + 1) % n_angles
        if sg[i] * sg[j] < 0 and min(dm[i], dm[j]) < capture * wn:
            hi = phis[j] if j else 2 * math.pi
            candidates.append((phis[i], sg[i], hi, sg[j]))
    for lo, slo, hi, shi in candidates:
        while hi - lo > tol and not hits:
            inner = lo + (hi - lo) * np.arange(1, batch + 1) / (batch + 1)
            st, dm, sg = fly(inner)
            found = [inner[k] for k in range(batch) if st[k] == 1]
            if found:
                hits.append(found[0])
                break
            allp = np.concatenate([[lo], inner, [hi]])
            alls = np.concatenate([[slo], sg, [shi]])
            k = int(np.nonzero(alls[:-1] * alls[1:] < 0)[0][0])
            lo, slo, hi, shi = allp[k], alls[k], allp[k + 1], alls[k + 1]
        if hits:
            break
    if not hits:
        raise NoConnection(f"no zero-energy connection from the maximiser to its translate by {w}")
    phi = float(min(hits))
    return _record(spec, xs, S, crit, w, phi, r0, dt, t_max)


def _record(spec, xs, S, crit, w, phi, r0, dt, t_max) -> HomoclinicRecord:
    target = xs + np.array(w, float)
    X, P = _launch(spec, xs, S, np.array([phi]), r0)
    xsamp, vsamp = [X[0].copy()], [P[0].copy()]
    for _ in range(int(t_max / dt)):
        X, P = _step(spec, X, P, dt)
        P = _project(spec, X, P, 0.0)
        xsamp.append(X[0].copy())
        vsamp.append(P[0].copy())
        if np.linalg.norm(X[0] - target) <= r0:
            break
    else:
        raise NoConnection("shooting solution did not reproduce on the recording pass")
    xs_ = np.array(xsamp)
    vs_ = np.array(vsamp)
    t = np.arange(len(xs_)) * dt
    en = 0.5 * np.sum(vs_ * vs_, axis=1) + np.asarray(spec.value(xs_))
    orbit = Orbit(t, xs_, vs_, en, {"dt": dt, "r0": r0})
    arc = float(simpson(np.sum(vs_ * vs_, axis=1), x=t))
    t_in = tail_action(S, xs_[0] - xs)
    t_out = tail_action(S, xs_[-1] - target)
    gap = max(float(np.linalg.norm(xs_[0] - xs)), float(np.linalg.norm(xs_[-1] - target)))
    back = limiting_direction(orbit.reversed(), crit, center=xs)[0]
    fwd = limiting_direction(orbit, crit, center=target)[0]
    return HomoclinicRecord(w, t_in + arc + t_out, orbit, gap, (back, fwd), xs.copy(), target, phi,
                            {"arc": arc, "tail_in": t_in, "tail_out": t_out})


def limiting_direction(orbit: Orbit, critical: CriticalData, center=None, tol: float = 1e-2):
    """Limit of (xi - center)/|xi - center| along the forward tail.

    The angle is fitted linearly against |xi - center| over the last decade
    of decay and extrapolated to 0.  Returns (direction, tag, residual)
    where direction is the nearest of +-v_a, +-v_b.
    """
    c = np.asarray(critical.maximizer if center is None else center, float)
    y = orbit.positions - c
    r = np.linalg.norm(y, axis=1)
    r_end = r[-1]
    if not r_end > 0:
        raise NotConverging("orbit ends at the centre; no direction")
    tail = np.nonzero(r <= 10.0 * r_end)[0]
    first = tail[0]
    # the tail must be the final stretch and |xi| must decrease along it
    seg = slice(first, len(r))
    rs = r[seg]
    if len(rs) < 3 or np.any(np.diff(rs) > 1e-14 * max(1.0, rs[0])):
        raise NotConverging("|xi| is not monotonically decreasing over the tail")
    ang = np.unwrap(np.arctan2(y[seg, 1], y[seg, 0]))
    A = np.stack([np.ones_like(rs), rs], axis=1)
    coef, *_ = np.linalg.lstsq(A, ang, rcond=None)
    th = coef[0]
    d = np.array([math.cos(th), math.sin(th)])
    va, vb = np.asarray(critical.v_a, float), np.asarray(critical.v_b, float)
    cands = [(va, "a-generic"), (-va, "a-generic"), (vb, "b-exceptional"), (-vb, "b-exceptional")]
    errs = [math.acos(max(-1.0, min(1.0, float(d @ v)))) for v, _ in cands]
    k = int(np.argmin(errs))
    return cands[k][0].copy(), cands[k][1], errs[k]


# ---------------------------------------------------------------------------
# decay along tails
# ---------------------------------------------------------------------------

def dominance_ratio(pot, x, v) -> np.ndarray:
    """(-2 v.D^2V v + 2|DV|^2)/|v|^2; h'' >= c^2 h holds with c^2 its minimum."""
    x = np.atleast_2d(x)
    v = np.atleast_2d(v)
    H = pot.hessian(x)
    g = pot.gradient(x)
    vv = np.sum(v * v, axis=1)
    num = -2.0 * np.einsum("ni,nij,nj->n", v, H, v) + 2.0 * np.sum(g * g, axis=1)
    return num / vv


@dataclass
class DecayReport:
    c: float
    worst_margin: float
    violations: int
    rate: float
    M: float
    slack: float

    @property
    def passed(self) -> bool:
        return self.violations == 0


def decay_check(orbit: Orbit, c: float, center=None, slack: float = 1e-6) -> DecayReport:
    """Check h(t) <= h(0) e^{-ct} + h(T) e^{-c(T-t)} for h = |xi'|^2 on the orbit.

    Also fits |xi - center| + |xi'| <= M e^{-rate t}.
    """
    t = orbit.times - orbit.times[0]
    T = t[-1]
    h = np.sum(orbit.velocities ** 2, axis=1)
    bound = h[0] * np.exp(-c * t) + h[-1] * np.exp(-c * (T - t))
    margin = bound - h
    worst = float(margin.min())
    viol = int(np.count_nonzero(margin < -slack))
    ctr = orbit.positions[-1] * 0 if center is None else np.asarray(center, float)
    s = np.linalg.norm(orbit.positions - ctr, axis=1) + np.sqrt(h)
    rate, M = math.nan, math.nan
    if np.all(s > 0) and len(t) > 2:
        slope, icpt = np.polyfit(t, np.log(s), 1)
        rate = -slope
        M = float(np.exp(np.max(np.log(s) + rate * t)))
    return DecayReport(c, worst, viol, float(rate), M, slack)


def homoclinic_tails(pot, rec: HomoclinicRecord, radius: float = 0.2):
    """The two tail segments of a record inside `radius` of its endpoints.

    The departing tail is returned with its own time axis; the arriving tail
    likewise.  Each comes with the dominance constant c measured on it.
    """
    o = rec.orbit
    out = []
    for ctr, pick in ((rec.start, "out"), (rec.end, "in")):
        r = np.linalg.norm(o.positions - ctr, axis=1)
        inside = r <= radius
        if pick == "out":
            stop = int(np.argmax(~inside)) if not inside.all() else len(r)
            sl = slice(0, stop)
        else:
            start = len(r) - int(np.argmax(~inside[::-1])) if not inside.all() else 0
            sl = slice(start, len(r))
        seg = Orbit(o.times[sl], o.positions[sl], o.velocities[sl], o.energies[sl])
        ratio = dominance_ratio(pot, seg.positions, seg.velocities)
        c = math.sqrt(max(float(ratio.min()), 0.0))
        out.append((seg, c, ctr))
    return out


# ---------------------------------------------------------------------------
# orbit diagnostics
# ---------------------------------------------------------------------------

@dataclass
class OverlapReport:
    angle: float
    flagged: bool
    same_point: bool


def direction_overlap_probe(rec1: HomoclinicRecord, rec2: HomoclinicRecord,
                            threshold: float = 1e-3) -> OverlapReport:
    """Angle between rec1's arriving direction and rec2's departing direction.

    Directions are the limits of (xi - p)/|xi - p| at the shared lattice
    point p; coinciding directions are a forbidden configuration.
    """
    d1 = np.asarray(rec1.limiting_dirs[1], float)
    d2 = np.asarray(rec2.limiting_dirs[0], float)
    ang = math.acos(max(-1.0, min(1.0, float(d1 @ d2))))
    same = bool(np.linalg.norm(np.asarray(rec1.end) - np.asarray(rec2.start)) < 1e-9)
    return OverlapReport(ang, ang < threshold, same)


# ---------------------------------------------------------------------------
# Lyapunov-Perron construction of the fast stable orbits
# ---------------------------------------------------------------------------

@dataclass
class LPProblem:
    """x1' = -a x1 + F1(x), x2' = -b x2 + F2(x); stable orbits with x2(0) ~ theta."""

    a: float
    b: float
    F: Callable
    theta: float
    lambda0: float
    T_max: float | None = None
    tolerance: float = 1e-13
    dt: float = 1e-3
    DF: Callable | None = None
    max_iter: int = 200

    def __post_init__(self):
        if not 0 < self.a < self.b:
            raise ValueError("need 0 < a < b")
        if not self.a < self.lambda0 < min(self.b, 2 * self.a):
            raise ValueError(f"lambda0 must lie in ({self.a}, {min(self.b, 2 * self.a)})")
        if self.T_max is None:
            self.T_max = 40.0 / self.a

    @property
    def df_bound(self) -> float:
        l0 = self.lambda0
        return (self.b - self.a) / (2 * (l0 - self.a) * (self.b - l0))


def _jacobian_norm(prob: LPProblem, X: np.ndarray) -> np.ndarray:
    if prob.DF is not None:
        J = prob.DF(X)
    else:
        h = 1e-6
        cols = []
        for k in range(2):
            e = np.zeros((2, 1))
            e[k] = h
            cols.append((prob.F(X + e) - prob.F(X - e)) / (2 * h))
        J = np.stack(cols, axis=1)  # (2, 2, n): J[i, k] = dF_i/dx_k
    return np.linalg.norm(np.moveaxis(J, -1, 0), ord=2, axis=(1, 2))


def contraction_radius(prob: LPProblem, n_r: int = 60, n_phi: int = 64) -> float:
    """Largest r <= 1 with |DF| <= (b-a)/(2(l0-a)(b-l0)) on the sampled disc B_r."""
    bound = prob.df_bound
    phi = 2 * math.pi * np.arange(n_phi) / n_phi

    def ok(r):
        rr = np.linspace(0, r, n_r)
        R, Ph = np.meshgrid(rr, phi, indexing="ij")
        X = np.stack([(R * np.cos(Ph)).ravel(), (R * np.sin(Ph)).ravel()])
        return bool(np.all(_jacobian_norm(prob, X) <= bound))

    if ok(1.0):
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if ok(mid) else (lo, mid)
    return lo


def lyapunov_perron_orbit(prob: LPProblem) -> Orbit:
    """Picard iteration of the Lyapunov-Perron operator on [0, T_max].

        x1(t) = -int_t^inf e^{-a(t-s)} F1(xi(s)) ds
        x2(t) = theta e^{-bt} + int_0^t e^{-b(t-s)} F2(xi(s)) ds

    The first component carries the minus sign required by x1' = -a x1 + F1.
    Gaps are measured in sup_t e^{lambda0 t}|.|.
    """
    a, b, th, l0 = prob.a, prob.b, prob.theta, prob.lambda0
    n = int(math.ceil(prob.T_max / prob.dt))
    n += n % 2
    t = np.linspace(0.0, prob.T_max, n + 1)
    wgt = np.exp(l0 * t)
    r0 = contraction_radius(prob)
    xi = np.stack([np.zeros_like(t), th * np.exp(-b * t)])
    gaps, ratios = [], []
    envelope_ok = True
    ebt = np.exp(-b * t)
    for it in range(prob.max_iter):
        F1, F2 = prob.F(xi)
        # accumulated from the right end so the small values at large t keep
        # their relative accuracy in the weighted norm
        g1 = np.exp(a * (t - t[-1])) * F1
        x1 = -np.exp(-a * (t - t[-1])) * _tail_integral(g1, t)
        g2 = np.exp(b * t) * F2
        x2 = th * ebt + ebt * cumulative_simpson(g2, x=t, initial=0.0)
        new = np.stack([x1, x2])
        gap = float(np.max(wgt * np.linalg.norm(new - xi, axis=0)))
        if np.any(np.linalg.norm(new, axis=0) > 3 * abs(th) * ebt + 1e-15):
            envelope_ok = False
        if gaps and gaps[-1] > 0:
            ratios.append(gap / gaps[-1])
            if ratios[-1] > 0.9 and gaps[-1] > 1e3 * prob.tolerance:
                raise ContractionFailure(f"gap ratio {ratios[-1]:.3f} > 0.9 at iteration {it}")
        gaps.append(gap)
        xi = new
        if gap <= prob.tolerance:
            break
    else:
        raise ContractionFailure(f"no convergence in {prob.max_iter} iterations (gap {gaps[-1]:.3e})")
    F1, F2 = prob.F(xi)
    vel = np.stack([-a * xi[0] + F1, -b * xi[1] + F2])
    info = {"iterations": len(gaps), "gaps": gaps, "contraction": max(ratios) if ratios else 0.0,
            "r0": r0, "theta_admissible": abs(th) <= r0 / 4, "envelope_ok": envelope_ok,
            # |int_T^inf ...| for F1 decaying at least like e^{-2 lambda0 s}
            "tail_remainder": float(abs(F1[-1])) / (2 * l0 - a)}
    return Orbit(t, xi.T.copy(), vel.T.copy(), np.full(len(t), np.nan), info)


def _tail_integral(g: np.ndarray, t: np.ndarray) -> np.ndarray:
    """int_t^T g(s) ds at every grid point, accumulated from the right end."""
    rev = cumulative_simpson(g[::-1], x=-t[::-1], initial=0.0)
    return rev[::-1]


# ---------------------------------------------------------------------------
# near-origin comparison in the quadratic model
# ---------------------------------------------------------------------------

def near_origin_action(a: float, b: float, s1: float, s2: float, beta1: float, beta2: float) -> float:
    """Action of the two rays P1 -> 0 -> P2 in the quadratic model.

    P1 = (s1, -beta1 s1), P2 = (s2, beta2 s2).  beta_i is checked against the
    smaller of the two admissible constants, lambda_proof(a, b).
    """
    lam = lambda_proof(a, b)
    for beta in (beta1, beta2):
        if not 0 < beta <= lam:
            raise BadBeta(f"beta {beta} outside (0, {lam:.6g}]")
    return two_ray_value(a, b, s1, s2, beta1, beta2)


def two_ray_value(a, b, s1, s2, beta1, beta2) -> float:
    return 0.5 * (a * (s1 * s1 + s2 * s2) + b * (beta1 ** 2 * s1 * s1 + beta2 ** 2 * s2 * s2))


def two_ray_quadrature(a, b, s1, s2, beta1, beta2, horizon: float | None = None) -> float:
    """Same value by quadrature of 1/2|eta'|^2 - W along eta1 on [0, T) and eta2 on (-T, 0]."""
    W = QuadraticModel(a, b)
    T = horizon or 40.0 / a

    def lag(t, s, beta, sgn):
        e_a, e_b = math.exp(-a * t), math.exp(-b * t)
        x = np.array([s * e_a, sgn * beta * s * e_b])
        v = np.array([-a * s * e_a, -sgn * b * beta * s * e_b])
        return 0.5 * float(v @ v) - W.value(x)

    # eta2(t) = (s2 e^{at}, beta2 s2 e^{bt}) on (-inf, 0] is eta1-shaped after t -> -t
    i1 = quad(lag, 0.0, T, args=(s1, beta1, -1.0), epsabs=1e-14, epsrel=1e-13, limit=200)[0]
    i2 = quad(lag, 0.0, T, args=(s2, beta2, 1.0), epsabs=1e-14, epsrel=1e-13, limit=200)[0]
    return i1 + i2


@dataclass(frozen=True)
class HyperbolicOrbit:
    """xi(t) = (nu (e^{at} - e^{-at}), c e^{bt} + d e^{-bt}) on [-T1, T2]."""

    a: float
    b: float
    nu: float
    c: float
    d: float
    T1: float
    T2: float

    def position(self, t):
        t = np.asarray(t, float)
        return np.stack([self.nu * (np.exp(self.a * t) - np.exp(-self.a * t)),
                         self.c * np.exp(self.b * t) + self.d * np.exp(-self.b * t)], axis=-1)

    def velocity(self, t):
        t = np.asarray(t, float)
        a, b = self.a, self.b
        return np.stack([a * self.nu * (np.exp(a * t) + np.exp(-a * t)),
                         b * (self.c * np.exp(b * t) - self.d * np.exp(-b * t))], axis=-1)

    @property
    def energy(self) -> float:
        return 2 * self.a ** 2 * self.nu ** 2 - 2 * self.b ** 2 * self.c * self.d

    def endpoints(self):
        return self.position(-self.T1), self.position(self.T2)

    def betas(self):
        P1, P2 = self.endpoints()
        return P1[1] / -P1[0], P2[1] / P2[0]

    def action_quadrature(self) -> float:
        W = QuadraticModel(self.a, self.b)

        def lag(t):
            v = self.velocity(t)
            return 0.5 * float(v @ v) - W.value(self.position(t))

        return quad(lag, -self.T1, self.T2, epsabs=1e-13, epsrel=1e-13, limit=400)[0]

    def action_closed_form(self) -> float:
        a, b, nu, c, d, T1, T2 = self.a, self.b, self.nu, self.c, self.d, self.T1, self.T2
        I = 0.5 * a * nu ** 2 * (math.exp(2 * a * T2) - math.exp(-2 * a * T1)) \
            + 0.5 * a * nu ** 2 * (math.exp(2 * a * T1) - math.exp(-2 * a * T2))
        II = 0.5 * b * c ** 2 * (math.exp(2 * b * T2) - math.exp(-2 * b * T1)) \
            + 0.5 * b * d ** 2 * (math.exp(2 * b * T1) - math.exp(-2 * b * T2))
        return I + II


def connect_quadratic(a: float, b: float, P1, P2, n_scan: int = 4000) -> list[HyperbolicOrbit]:
    """All zero-energy orbits of the quadratic model from P1 (x1 < 0) to P2 (x1 > 0).

    Any such orbit crosses x1 = 0, so after a time shift it has the form of
    HyperbolicOrbit.  Given T2 the remaining unknowns follow from the end
    conditions, leaving the energy condition c d = nu^2 a^2 / b^2 as one
    scalar equation in T2, which is scanned and solved by brentq.
    """
    s1, y1 = float(P1[0]), float(P1[1])
    s2, y2 = float(P2[0]), float(P2[1])
    if not s1 < 0 < s2:
        raise ValueError("need P1[0] < 0 < P2[0]")

    def unknowns(T2):
        nu = s2 / (2 * math.sinh(a * T2))
        T1 = math.asinh(-s1 / (2 * nu)) / a
        M = np.array([[math.exp(b * T2), math.exp(-b * T2)], [math.exp(-b * T1), math.exp(b * T1)]])
        c, d = np.linalg.solve(M, [y2, y1])
        return nu, T1, c, d

    def g(T2):
        nu, T1, c, d = unknowns(T2)
        return (c * d - (nu * a / b) ** 2) / (nu * nu)

    T2s = np.geomspace(1e-4 / a, 30.0 / b, n_scan)
    vals = np.array([g(T) for T in T2s])
    out = []
    for i in range(n_scan - 1):
        if np.isfinite(vals[i]) and np.isfinite(vals[i + 1]) and vals[i] * vals[i + 1] < 0:
            T2 = brentq(g, T2s[i], T2s[i + 1], xtol=1e-15, rtol=1e-14)
            nu, T1, c, d = unknowns(T2)
            out.append(HyperbolicOrbit(a, b, nu, float(c), float(d), T1, T2))
    return out


def random_hyperbolic_orbit(rng: np.random.Generator, a: float, b: float) -> HyperbolicOrbit:
    """Zero-energy orbit with nu = 1, random split c/d and random end times."""
    T1, T2 = rng.uniform(0.2, 6.0, 2) / a
    rho = math.exp(rng.uniform(-8, 8))
    k = a / b
    return HyperbolicOrbit(a, b, 1.0, k * rho, k / rho, float(T1), float(T2))


def random_admissible_endpoints(rng: np.random.Generator, beta_cap: str = "proof"):
    """(a, b, s1, s2, beta1, beta2) with 0 < beta_i <= lambda and s1 < 0 < s2."""
    a = rng.uniform(0.5, 2.0)
    b = a * rng.uniform(1.2, 4.0)
    lam = lambda_proof(a, b) if beta_cap == "proof" else lambda_statement(a, b)
    s1 = -rng.uniform(0.1, 1.0)
    s2 = rng.uniform(0.1, 1.0)
    beta1, beta2 = rng.uniform(0.05, 1.0, 2) * lam
    return a, b, s1, s2, float(beta1), float(beta2)
