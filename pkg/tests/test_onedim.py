import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hbargeo import onedim as D


def test_critical_momentum():
    assert D.critical_momentum(D.cosine()) == pytest.approx(4 / math.pi, abs=1e-12)
    assert D.critical_momentum(D.zero()) == 0.0
    assert D.critical_momentum(D.cosine(4.0)) == pytest.approx(8 / math.pi, abs=1e-12)


def test_hbar_1d_examples():
    h = D.cosine()
    assert D.hbar_1d(h, 0.0) == 0.0
    assert D.hbar_1d(D.zero(), 1.5) == pytest.approx(1.125, abs=1e-15)
    assert D.hbar_1d(h, 4 / math.pi) == pytest.approx(0.0, abs=1e-12)


def test_hbar_1d_inverts_action():
    h = D.cosine()
    for c in (0.01, 0.3, 2.0, 10.0):
        p = D.action_integral(h, c)
        assert D.hbar_1d(h, p) == pytest.approx(c, rel=1e-10)


def test_action_integral_closed_form_large_level():
    # for c >> 1, int sqrt(2(c - h)) ~ sqrt(2(c+1)) - ...; compare with direct quadrature
    from scipy.integrate import quad
    h = D.cosine()
    for c in (0.5, 3.0):
        ref = quad(lambda x: math.sqrt(2 * (c - h.value(x))), 0, 1, epsabs=1e-13)[0]
        assert D.action_integral(h, c) == pytest.approx(ref, rel=1e-11)


def test_hbar_separable_examples():
    h = D.cosine()
    assert D.hbar_separable(h, h, (0.0, 0.0)) == 0.0
    assert D.hbar_separable(h, h, (4 / math.pi, 4 / math.pi)) == pytest.approx(0.0, abs=1e-12)
    assert D.hbar_separable(D.zero(), h, (1.0, 0.0)) == pytest.approx(0.5, abs=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.floats(-4, 4), st.floats(-4, 4))
def test_hbar_1d_even_monotone_and_bounded(p, q):
    h = D.cosine()
    assert D.hbar_1d(h, p) == D.hbar_1d(h, -p)
    if abs(p) <= abs(q):
        assert D.hbar_1d(h, p) <= D.hbar_1d(h, q) + 1e-12
    hb = D.hbar_1d(h, p)
    assert 0.5 * p * p - 2.0 - 1e-12 <= hb <= 0.5 * p * p + 1e-12


def test_separable_spec_matches_terms():
    h = D.cosine()
    V = D.separable_spec(h, D.cosine(4.0))
    x = np.random.default_rng(0).uniform(0, 1, (50, 2))
    np.testing.assert_allclose(V.value(x), h.value(x[:, 0]) + 4 * (np.cos(2 * np.pi * x[:, 1]) - 1), atol=1e-13)
