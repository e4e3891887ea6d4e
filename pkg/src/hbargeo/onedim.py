"""Closed-form effective Hamiltonian for 1D mechanical Hamiltonians.

For 1/2 p^2 + h(x) with max h = 0:

    Hbar(p) = 0                                 if |p| <= L = int_0^1 sqrt(-2h)
    |p| = int_0^1 sqrt(2 (Hbar - h)) dx         otherwise,

and a separable V(x) = h1(x1) + h2(x2) has Hbar(p) = Hbar1(p1) + Hbar2(p2).
These values are the ground truth the 2D engines are checked against.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .potential import FourierTerm, PotentialSpec

GL_ORDER = 32
_GL_X, _GL_W = np.polynomial.legendre.leggauss(GL_ORDER)


@dataclass(frozen=True)
class OneDimPotential:
    """h(x) = offset + sum amp*cos(2 pi k x + phase), normalised to max h = 0."""

    terms: tuple[tuple[float, int, float], ...]
    offset: float = 0.0

    def value(self, x):
        x = np.asarray(x, float)
        out = np.full(x.shape, self.offset)
        for amp, k, ph in self.terms:
            out = out + amp * np.cos(2 * math.pi * k * x + ph)
        return out

    def derivative(self, x):
        x = np.asarray(x, float)
        out = np.zeros(x.shape)
        for amp, k, ph in self.terms:
            out = out - amp * 2 * math.pi * k * np.sin(2 * math.pi * k * x + ph)
        return out

    def second_derivative(self, x):
        x = np.asarray(x, float)
        out = np.zeros(x.shape)
        for amp, k, ph in self.terms:
            out = out - amp * (2 * math.pi * k) ** 2 * np.cos(2 * math.pi * k * x + ph)
        return out

    @property
    def is_constant(self) -> bool:
        return all(amp == 0 or k == 0 for amp, k, _ in self.terms)

    @classmethod
    def from_terms(cls, terms, grid_n: int = 4096) -> "OneDimPotential":
        raw = cls(tuple((float(a), int(k), float(ph)) for a, k, ph in terms), 0.0)
        if raw.is_constant:
            return cls(raw.terms, -float(raw.value(0.0)))
        zeros = _maxima(raw, grid_n)
        top = max(float(raw.value(z)) for z in zeros)
        return cls(raw.terms, -top)

    def maxima(self, grid_n: int = 4096) -> np.ndarray:
        """Points of [0, 1) where h attains 0 (its maximum)."""
        if self.is_constant:
            return np.array([0.0])
        z = _maxima(self, grid_n)
        return np.array(sorted(x for x in z if float(self.value(x)) > -1e-12))

    def to_spec_terms(self, axis: int) -> tuple[FourierTerm, ...]:
        out = []
        for amp, k, ph in self.terms:
            kk = (k, 0) if axis == 0 else (0, k)
            out.append(FourierTerm(amp, kk, ph))
        return tuple(out)


def cosine(amp: float = 1.0, k: int = 1) -> OneDimPotential:
    """amp * (cos 2 pi k x - 1)."""
    return OneDimPotential(((float(amp), int(k), 0.0),), -float(amp))


def zero() -> OneDimPotential:
    return OneDimPotential((), 0.0)


def _maxima(h: OneDimPotential, grid_n: int) -> list[float]:
    x = np.arange(grid_n) / grid_n
    v = h.value(x)
    idx = np.nonzero((v >= np.roll(v, 1)) & (v >= np.roll(v, -1)))[0]
    out: list[float] = []
    for i in idx:
        z = x[i]
        for _ in range(60):
            d1, d2 = float(h.derivative(z)), float(h.second_derivative(z))
            if d2 >= 0 or abs(d1) < 1e-15:
                break
            z = z - d1 / d2
        z = z % 1.0
        if z > 1 - 1e-12:
            z = 0.0
        if all(min(abs(z - y), 1 - abs(z - y)) > 1e-9 for y in out):
            out.append(z)
    return out


def _gauss(f, a: float, b: float, panels: int = 4) -> float:
    edges = np.linspace(a, b, panels + 1)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        total += half * float(np.dot(_GL_W, f(mid + half * _GL_X)))
    return total


def _breakpoints(h: OneDimPotential) -> np.ndarray:
    z = h.maxima()
    return np.unique(np.concatenate([[0.0, 1.0], z]))


def action_integral(h: OneDimPotential, level: float, panels: int = 4) -> float:
    """int_0^1 sqrt(2 (level - h(x))) dx, composite Gauss split at the zeros of h."""
    f = lambda x: np.sqrt(np.maximum(2.0 * (level - h.value(x)), 0.0))
    bps = _breakpoints(h)
    return sum(_gauss(f, lo, hi, panels) for lo, hi in zip(bps[:-1], bps[1:]) if hi > lo)


def critical_momentum(h: OneDimPotential) -> float:
    if h.is_constant:
        return 0.0
    return action_integral(h, 0.0)


def hbar_1d(h: OneDimPotential, p: float, xtol: float = 1e-13) -> float:
    p = abs(float(p))
    L = critical_momentum(h)
    if p <= L:
        return 0.0
    if h.is_constant:
        return 0.5 * p * p
    hmin = float(h.value(np.linspace(0, 1, 2049)).min())
    # p = int sqrt(2(H - h)) >= sqrt(2 H) so H <= p^2/2; the -min h slack keeps the bracket strict
    hi = 0.5 * p * p - hmin
    return brentq(lambda H: action_integral(h, H) - p, 0.0, hi, xtol=xtol, rtol=4 * np.finfo(float).eps)


def hbar_separable(h1: OneDimPotential, h2: OneDimPotential, p) -> float:
    return hbar_1d(h1, p[0]) + hbar_1d(h2, p[1])


def separable_spec(h1: OneDimPotential, h2: OneDimPotential) -> PotentialSpec:
    return PotentialSpec(h1.to_spec_terms(0) + h2.to_spec_terms(1), h1.offset + h2.offset, "separable",
                         {"h1": [list(t) for t in h1.terms], "h2": [list(t) for t in h2.terms]})
