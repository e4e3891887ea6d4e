"""Periodic potentials on the 2-torus as finite real Fourier sums.

A potential is

    V(x) = offset + sum_j amp_j * cos(2*pi*k_j.x + phase_j)

with integer wavevectors k_j, so V, DV and D^2V are evaluated exactly term by
term.  Constructors normalise the offset so that max V = 0.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import DegenerateMaximum, MultipleMaxima

TWO_PI = 2.0 * math.pi
TEMPLATES = ("separable", "perturbed-separable", "annulus-barrier", "two-maxima", "isotropic", "constant")

# Eigenvalue distinctness / negativity tolerance for the maximum.
EIG_TOL = 1e-8
# Value tolerance deciding that a second local maximum also reaches max V = 0.
MAX_TOL = 1e-8


@dataclass(frozen=True)
class FourierTerm:
    amp: float
    k: tuple[int, int]
    phase: float = 0.0

    def to_json(self) -> dict:
        return {"amp": self.amp, "k": [int(self.k[0]), int(self.k[1])], "phase": self.phase}


@dataclass(frozen=True)
class PotentialSpec:
    terms: tuple[FourierTerm, ...]
    offset: float = 0.0
    template: str | None = None
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        ks = np.array([t.k for t in self.terms], dtype=float).reshape(-1, 2)
        object.__setattr__(self, "_k", ks * TWO_PI)
        object.__setattr__(self, "_amp", np.array([t.amp for t in self.terms], dtype=float))
        object.__setattr__(self, "_phase", np.array([t.phase for t in self.terms], dtype=float))

    # -- evaluation, vectorised over leading axes of x[..., 2] --------------
    def _arg(self, x):
        x = np.asarray(x, dtype=float)
        return x @ self._k.T + self._phase

    def value(self, x):
        x = np.asarray(x, dtype=float)
        if not self.terms:
            return np.full(x.shape[:-1], self.offset) if x.ndim > 1 else float(self.offset)
        out = np.cos(self._arg(x)) @ self._amp + self.offset
        return out if np.ndim(out) else float(out)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        if not self.terms:
            return np.zeros(x.shape)
        s = np.sin(self._arg(x)) * self._amp
        return -(s @ self._k)

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        if not self.terms:
            return np.zeros(x.shape + (2,))
        c = np.cos(self._arg(x)) * self._amp
        kk = np.einsum("mi,mj->mij", self._k, self._k)
        return -np.tensordot(c, kk, axes=([-1], [0]))

    def sample(self, n: int) -> np.ndarray:
        """V on the n x n grid x = (i/n, j/n), indexed [i, j]."""
        x = np.arange(n) / n
        g = np.stack(np.meshgrid(x, x, indexing="ij"), axis=-1)
        return np.asarray(self.value(g))

    def scaled(self, factor: float) -> "PotentialSpec":
        terms = tuple(FourierTerm(factor * t.amp, t.k, t.phase) for t in self.terms)
        return PotentialSpec(terms, factor * self.offset, self.template, dict(self.params, scale=factor))

    # -- persistence ---------------------------------------------------------
    def to_json(self) -> dict:
        d = {"terms": [t.to_json() for t in self.terms], "template": self.template, "offset": self.offset}
        if self.params:
            d["params"] = dict(self.params)
        return d

    @classmethod
    def from_json(cls, d: dict) -> "PotentialSpec":
        if "terms" not in d and d.get("template"):
            return from_template(d["template"], **d.get("params", {}))
        terms = tuple(FourierTerm(float(t["amp"]), (int(t["k"][0]), int(t["k"][1])), float(t.get("phase", 0.0)))
                      for t in d["terms"])
        if "offset" in d and d["offset"] is not None:
            return cls(terms, float(d["offset"]), d.get("template"), dict(d.get("params", {})))
        return normalized(terms, d.get("template"), d.get("params", {}))

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def eval_potential(spec: PotentialSpec, x) -> float:
    return spec.value(x)


def eval_derivatives(spec: PotentialSpec, x):
    return spec.gradient(x), spec.hessian(x)


# ---------------------------------------------------------------------------
# maximum search
# ---------------------------------------------------------------------------

def _wrap(x):
    y = np.asarray(x, float) - np.floor(x)
    return np.where((y < 1e-12) | (y > 1 - 1e-12), 0.0, y)


def torus_distance(x, y) -> float:
    d = np.asarray(x, float) - np.asarray(y, float)
    d -= np.round(d)
    return float(np.hypot(d[0], d[1]))


def _polish(spec, x, iters=50):
    """Newton ascent on DV = 0, damped by a backtracking line search on V."""
    x = np.asarray(x, float).copy()
    for _ in range(iters):
        g = spec.gradient(x)
        H = spec.hessian(x)
        if np.linalg.norm(g) < 1e-15:
            break
        try:
            w = np.linalg.eigvalsh(H)
            step = -np.linalg.solve(H, g) if w.max() < 0 else g / max(1.0, np.abs(w).max())
        except np.linalg.LinAlgError:
            step = g
        v0 = spec.value(x)
        t = 1.0
        while t > 1e-12:
            if spec.value(x + t * step) >= v0 - 1e-15:
                break
            t *= 0.5
        x = x + t * step
    return _wrap(x)


def local_maxima(spec: PotentialSpec, grid_n: int = 256, keep: int = 8):
    """Polished local maxima on the torus, best first, as a list of (x, V(x))."""
    V = spec.sample(grid_n)
    ismax = np.ones_like(V, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                ismax &= V >= np.roll(np.roll(V, di, 0), dj, 1)
    idx = np.argwhere(ismax)
    order = np.argsort(-V[ismax], kind="stable")
    found: list[tuple[np.ndarray, float]] = []
    for i, j in idx[order][: 4 * keep]:
        x = _polish(spec, np.array([i, j], float) / grid_n)
        vx = float(spec.value(x))
        if all(torus_distance(x, y) > 1e-6 for y, _ in found):
            found.append((x, vx))
    found.sort(key=lambda t: -t[1])
    return found[:keep]


def locate_maximum(spec: PotentialSpec, grid_n: int = 256) -> np.ndarray:
    x, _ = local_maxima(spec, grid_n, keep=1)[0]
    # represent lattice-point maximisers exactly
    return _wrap(x)


def normalized(terms: Iterable[FourierTerm], template: str | None = None, params: dict | None = None,
               grid_n: int = 256) -> PotentialSpec:
    """Spec whose offset is minus the (polished) maximum of the raw Fourier sum."""
    terms = tuple(terms)
    raw = PotentialSpec(terms, 0.0)
    if not terms:
        return PotentialSpec(terms, 0.0, template, dict(params or {}))
    x = locate_maximum(raw, grid_n)
    return PotentialSpec(terms, 0.0 - float(raw.value(x)), template, dict(params or {}))


# ---------------------------------------------------------------------------
# Assumption (M)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CriticalData:
    maximizer: np.ndarray
    eig_small: float  # a^2
    eig_large: float  # b^2
    v_a: np.ndarray
    v_b: np.ndarray
    lambda_statement: float
    lambda_proof: float

    @property
    def a(self) -> float:
        return math.sqrt(self.eig_small)

    @property
    def b(self) -> float:
        return math.sqrt(self.eig_large)

    @classmethod
    def from_rates(cls, a, b, v_a=(1.0, 0.0), v_b=(0.0, 1.0), maximizer=(0.0, 0.0)):
        return cls(np.asarray(maximizer, float), a * a, b * b, np.asarray(v_a, float), np.asarray(v_b, float),
                   lambda_statement(a, b), lambda_proof(a, b))


def lambda_statement(a: float, b: float) -> float:
    return (a / b) * math.sqrt((b - a) / (b + a))


def lambda_proof(a: float, b: float) -> float:
    return math.sqrt(a * a * (b - a) / (b * b * (b + 4 * a)))


def _canonical_sign(v):
    v = np.asarray(v, float)
    i = 0 if abs(v[0]) > 1e-12 else 1
    return v if v[i] > 0 else -v


def critical_data(spec: PotentialSpec, grid_n: int = 256) -> CriticalData:
    maxima = local_maxima(spec, grid_n, keep=4)
    x0, v0 = maxima[0]
    for y, vy in maxima[1:]:
        if vy >= v0 - MAX_TOL:
            raise MultipleMaxima(f"second maximum at {y.tolist()} with V={vy:.3e}")
    x0 = locate_maximum(spec, grid_n)
    w, U = np.linalg.eigh(spec.hessian(x0))
    # w[0] = -b^2 <= w[1] = -a^2
    if w[1] >= -EIG_TOL:
        raise DegenerateMaximum(f"Hessian eigenvalue {w[1]:.3e} is not negative")
    if abs(w[1] - w[0]) <= EIG_TOL * max(1.0, abs(w[0])):
        raise DegenerateMaximum(f"Hessian eigenvalues coincide ({w[0]:.6g}, {w[1]:.6g})")
    a, b = math.sqrt(-w[1]), math.sqrt(-w[0])
    return CriticalData(x0, -w[1], -w[0], _canonical_sign(U[:, 1]), _canonical_sign(U[:, 0]),
                        lambda_statement(a, b), lambda_proof(a, b))


@dataclass
class AssumptionReport:
    unique_maximum: bool
    distinct_eigenvalues: bool
    negative_definite: bool
    min_gap: float
    maximizer: list
    eigenvalues: list
    messages: list

    @property
    def passed(self) -> bool:
        return self.unique_maximum and self.distinct_eigenvalues and self.negative_definite and self.min_gap > 0


def check_assumption_m(spec: PotentialSpec, grid_n: int = 128) -> AssumptionReport:
    if grid_n < 64:
        raise ValueError("grid_n must be >= 64")
    msgs = []
    maxima = local_maxima(spec, max(grid_n, 64), keep=4)
    x0, v0 = maxima[0]
    unique = True
    for y, vy in maxima[1:]:
        if vy >= v0 - MAX_TOL:
            unique = False
            msgs.append(f"MultipleMaxima: {y.tolist()} reaches V={vy:.3e}")
    V = spec.sample(grid_n)
    i0, j0 = (np.round(x0 * grid_n).astype(int)) % grid_n
    mask = np.ones_like(V, dtype=bool)
    mask[i0, j0] = False
    min_gap = float((v0 - V)[mask].min())
    if min_gap <= 0:
        unique = False
        msgs.append(f"grid node reaches max V (min gap {min_gap:.3e})")
    w = np.linalg.eigvalsh(spec.hessian(x0))
    negdef = bool(w[1] < -EIG_TOL)
    distinct = bool(abs(w[1] - w[0]) > EIG_TOL * max(1.0, abs(w[0])))
    if not negdef:
        msgs.append(f"DegenerateMaximum: eigenvalue {w[1]:.3e}")
    if not distinct:
        msgs.append(f"DistinctEigenvalues: {w[0]:.6g} == {w[1]:.6g}")
    return AssumptionReport(unique, distinct, negdef, min_gap, x0.tolist(), w.tolist(), msgs)


# ---------------------------------------------------------------------------
# templates
# ---------------------------------------------------------------------------

def constant(value: float = 0.0) -> PotentialSpec:
    """V == value.  Not normalised; used for solver and metric checks."""
    return PotentialSpec((), float(value), "constant", {"value": value})


def separable(amp1: float = 1.0, amp2: float = 1.0) -> PotentialSpec:
    """amp1*(cos 2 pi x1 - 1) + amp2*(cos 2 pi x2 - 1)."""
    terms = (FourierTerm(amp1, (1, 0)), FourierTerm(amp2, (0, 1)))
    return PotentialSpec(terms, -(amp1 + amp2), "separable", {"amp1": amp1, "amp2": amp2})


def perturbed_separable(eps: float = 0.3, amp1: float = 1.0, amp2: float = 1.0) -> PotentialSpec:
    """separable(amp1, amp2) + eps*(cos 2 pi (x1 + x2) - 1)."""
    terms = (FourierTerm(amp1, (1, 0)), FourierTerm(amp2, (0, 1)), FourierTerm(eps, (1, 1)))
    return normalized(terms, "perturbed-separable", {"eps": eps, "amp1": amp1, "amp2": amp2})


def two_maxima() -> PotentialSpec:
    """(cos 4 pi x1 - 1) + (cos 2 pi x2 - 1): maxima at (0,0) and (1/2,0)."""
    return PotentialSpec((FourierTerm(1.0, (2, 0)), FourierTerm(1.0, (0, 1))), -2.0, "two-maxima", {})


# trig polynomials as {k: complex coefficient of exp(2 pi i k.x)}

def _tp_mul(f: dict, g: dict) -> dict:
    out: dict = {}
    for k1, c1 in f.items():
        for k2, c2 in g.items():
            k = (k1[0] + k2[0], k1[1] + k2[1])
            out[k] = out.get(k, 0.0) + c1 * c2
    return out


def _tp_add(f: dict, g: dict, s: float = 1.0) -> dict:
    out = dict(f)
    for k, c in g.items():
        out[k] = out.get(k, 0.0) + s * c
    return out


def _tp_cos(k, amp=1.0) -> dict:
    return {tuple(k): 0.5 * amp, (-k[0], -k[1]): 0.5 * amp}


def _tp_terms(f: dict) -> tuple[FourierTerm, ...]:
    terms = []
    for k in sorted(f):
        c = f[k]
        if abs(c) < 1e-15:
            continue
        if k == (0, 0):
            terms.append(FourierTerm(float(np.real(c)), (0, 0)))
        elif k[0] > 0 or (k[0] == 0 and k[1] > 0):
            terms.append(FourierTerm(2 * abs(c), k, float(np.angle(c))))
    return tuple(terms)


def annulus_barrier(R: float = 4.0, kappa: float = 2.0) -> PotentialSpec:
    """Unique maximum at the lattice, plus a deep ring-shaped trough around it.

    With g = 2 - cos 2 pi x1 - cos 2 pi x2 (zero at the lattice, 4 at the cell
    centre), V = -g_kappa - R*(g*(4-g)/4)^2 where g_kappa is the anisotropic
    quadratic part.  This is a smooth trigonometric stand-in for the barrier
    construction, qualitative only.
    """
    one = {(0, 0): 1.0}
    g = _tp_add(_tp_add({(0, 0): 2.0}, _tp_cos((1, 0)), -1.0), _tp_cos((0, 1)), -1.0)
    g_k = _tp_add(_tp_add({(0, 0): 1.0 + kappa}, _tp_cos((1, 0)), -1.0), _tp_cos((0, 1), kappa), -1.0)
    ring = _tp_mul(g, _tp_add(_tp_mul({(0, 0): 4.0}, one), g, -1.0))
    ring = {k: c / 4.0 for k, c in ring.items()}
    V = _tp_add({k: -c for k, c in g_k.items()}, _tp_mul(ring, ring), -R)
    return normalized(_tp_terms(V), "annulus-barrier", {"R": R, "kappa": kappa})


def from_template(name: str, **params) -> PotentialSpec:
    if name == "separable":
        return separable(**params)
    if name == "isotropic":
        return separable(1.0, 1.0)
    if name == "perturbed-separable":
        return perturbed_separable(**params)
    if name == "annulus-barrier":
        return annulus_barrier(**params)
    if name == "two-maxima":
        return two_maxima()
    if name == "constant":
        return constant(**params)
    raise ValueError(f"unknown template {name!r}; choose from {TEMPLATES}")


def load_spec(path) -> PotentialSpec:
    with open(path) as fh:
        return PotentialSpec.from_json(json.load(fh))
