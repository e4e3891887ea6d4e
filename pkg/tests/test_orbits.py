import math

import numpy as np
import pytest

from hbargeo import metric as M
from hbargeo import orbits as O
from hbargeo.acceptance import lp_example
from hbargeo.errors import BadBeta, HbarGeoError
from hbargeo.potential import CriticalData, critical_data, lambda_proof, lambda_statement

L = 4 / math.pi


def samples(fn, T=10.0, n=4001):
    t = np.linspace(0, T, n)
    x = fn(t)
    return O.Orbit(t, x, np.gradient(x, t, axis=0), np.zeros(n))


# --- integration -------------------------------------------------------------

def test_quadratic_stable_solution():
    q = O.QuadraticModel(1.0, 2.0)
    orb = O.integrate_characteristic(q, (1.0, 0.0), (-1.0, 0.0), 5.0, 1e-3)
    exact = np.stack([np.exp(-orb.times), 0 * orb.times], axis=1)
    assert np.max(np.abs(orb.positions - exact)) <= 1e-8


def test_energy_drift(sep):
    rng = np.random.default_rng(0)
    for _ in range(3):
        orb = O.integrate_characteristic(sep, rng.uniform(0, 1, 2), rng.normal(size=2), 10.0, 1e-3)
        assert orb.energy_drift <= 1e-9
        assert np.all(np.diff(orb.times) > 0)


def test_axis_invariant(sep):
    orb = O.integrate_characteristic(sep, (0.2, 0.0), (1.3, 0.0), 5.0, 1e-3)
    assert np.max(np.abs(orb.positions[:, 1])) <= 1e-12


# --- homoclinic orbits -------------------------------------------------------

def test_homoclinic_axis(sep_homoclinic):
    rec = sep_homoclinic
    assert rec.action == pytest.approx(L, abs=1e-3)
    assert np.max(np.abs(rec.orbit.positions[:, 1])) <= 1e-8
    assert rec.homology == (1, 0)
    assert rec.terminal_gap <= 1e-2


def test_homoclinic_vertical(sep):
    assert O.shoot_homoclinic(sep, (0, 1)).action == pytest.approx(L, abs=1e-3)


def test_non_primitive_rejected(sep):
    with pytest.raises((ValueError, HbarGeoError)):
        O.shoot_homoclinic(sep, (2, 0))


@pytest.fixture(scope="module")
def pert_records(pert):
    return {w: O.shoot_homoclinic(pert, w) for w in ((1, 0), (1, 1), (1, -1))}


def test_records_consistent_with_metric(pert, pert_records):
    tab = M.support_table(pert, 256, 2)
    omega = M.min_gap_omega(pert, 0.49, 64)
    cd = critical_data(pert)
    axes = [cd.v_a, -cd.v_a, cd.v_b, -cd.v_b]
    for w, rec in pert_records.items():
        assert rec.action > omega > 0
        assert abs(rec.action - tab[w]) <= 3e-2
        E = 0.5 * np.sum(rec.orbit.velocities ** 2, axis=1) + pert.value(rec.orbit.positions)
        assert np.max(np.abs(E)) <= 1e-8
        for d in rec.limiting_dirs:
            assert min(np.linalg.norm(d - v) for v in axes) < 1e-2


def test_record_json(sep_homoclinic):
    d = sep_homoclinic.to_json()
    assert d["homology"] == [1, 0] and d["action"] > 0
    assert sep_homoclinic.orbit.to_csv().startswith("t,x1,x2,v1,v2,energy\n")


# --- limiting directions -----------------------------------------------------

CRIT = CriticalData.from_rates(1.0, 2.0)


def test_limiting_direction_slow_mode():
    orb = samples(lambda t: np.stack([np.exp(-t), 1e-4 * np.exp(-2 * t)], axis=1))
    d, tag, _ = O.limiting_direction(orb, CRIT)
    np.testing.assert_allclose(d, [1, 0])
    assert tag == "a-generic"


def test_limiting_direction_fast_axis():
    orb = samples(lambda t: np.stack([0 * t, np.exp(-2 * t)], axis=1))
    d, tag, _ = O.limiting_direction(orb, CRIT)
    np.testing.assert_allclose(d, [0, 1])
    assert tag == "b-exceptional"


def test_limiting_direction_generic_start():
    q = O.QuadraticModel(1.0, 2.0)
    x0 = np.array([-0.3, 0.4])
    orb = O.integrate_characteristic(q, x0, (-1.0 * x0[0], -2.0 * x0[1]), 6.0, 1e-3, project=False)
    d, tag, err = O.limiting_direction(orb, q.critical)
    np.testing.assert_allclose(d, [-1, 0])
    assert tag == "a-generic" and err < 1e-2


# --- Lyapunov-Perron ---------------------------------------------------------

def test_lp_example_sign_and_symmetry():
    up = O.lyapunov_perron_orbit(lp_example(0.1))
    dn = O.lyapunov_perron_orbit(lp_example(-0.1))
    t = up.times
    assert np.max(np.abs(up.positions[:, 0] + 0.01 * np.exp(-4 * t))) <= 1e-8
    assert np.max(np.abs(up.positions[:, 1] - 0.1 * np.exp(-2 * t))) <= 1e-8
    np.testing.assert_allclose(dn.positions[:, 1], -up.positions[:, 1], atol=1e-15)
    np.testing.assert_allclose(dn.positions[:, 0], up.positions[:, 0], atol=1e-15)
    assert up.info["envelope_ok"] and up.info["contraction"] <= 0.5


def test_lp_zero_theta():
    orb = O.lyapunov_perron_orbit(lp_example(0.0))
    assert np.all(orb.positions == 0.0)


def test_lp_genuinely_nonlinear():
    # coupled nonlinearity: iteration must still contract and match the ODE
    def F(x):
        return np.stack([x[0] * x[1] + x[1] ** 2, 0.5 * x[0] * x[1]])

    prob = O.LPProblem(1.0, 2.0, F, 0.05, 1.9)
    orb = O.lyapunov_perron_orbit(prob)
    assert 0 < orb.info["contraction"] <= 0.5
    # residual of the ODE along the computed orbit
    x, t = orb.positions, orb.times
    dx = np.gradient(x, t, axis=0)
    Fx = F(x.T).T
    res = dx - np.stack([-x[:, 0], -2 * x[:, 1]], axis=1) - Fx
    assert np.max(np.abs(res[5:-5])) < 1e-6


def test_lp_window_enforced():
    with pytest.raises(ValueError):
        O.LPProblem(1.0, 2.0, lambda x: 0 * x, 0.1, 2.1)
    with pytest.raises(ValueError):
        O.LPProblem(1.0, 3.0, lambda x: 0 * x, 0.1, 2.5)


# --- near-origin comparison --------------------------------------------------

def test_near_origin_values():
    assert O.near_origin_action(1, 2, 0.0, 0.0, 0.2, 0.2) == 0.0
    assert O.near_origin_action(1, 2, -1.0, 1.0, 0.2, 0.2) == pytest.approx(1.08, abs=1e-15)
    assert O.two_ray_quadrature(1, 2, -1.0, 1.0, 0.2, 0.2) == pytest.approx(1.08, abs=1e-8)
    with pytest.raises(BadBeta):
        O.near_origin_action(1, 2, -1.0, 1.0, 0.25, 0.2)


def test_near_origin_random_quadrature():
    rng = np.random.default_rng(5)
    for _ in range(10):
        a, b, s1, s2, b1, b2 = O.random_admissible_endpoints(rng)
        assert O.near_origin_action(a, b, s1, s2, b1, b2) == pytest.approx(
            O.two_ray_quadrature(a, b, s1, s2, b1, b2), abs=1e-8)


def test_hyperbolic_orbit_action_and_energy():
    rng = np.random.default_rng(6)
    for _ in range(10):
        a = rng.uniform(0.5, 2)
        orb = O.random_hyperbolic_orbit(rng, a, a * rng.uniform(1.2, 4))
        assert abs(orb.energy) < 1e-12 * max(1.0, orb.nu ** 2)
        assert orb.action_closed_form() == pytest.approx(orb.action_quadrature(), rel=1e-9)


def test_zero_energy_obstruction():
    """A zero-energy orbit through the near-origin box has beta1*beta2 >= (a/b)^2,
    which exceeds lambda^2, so admissible endpoints admit no connection."""
    rng = np.random.default_rng(7)
    for _ in range(30):
        a = rng.uniform(0.5, 2)
        b = a * rng.uniform(1.2, 4)
        orb = O.random_hyperbolic_orbit(rng, a, b)
        b1, b2 = orb.betas()
        assert b1 * b2 >= (a / b) ** 2 * (1 - 1e-9)
        assert (a / b) ** 2 > lambda_statement(a, b) ** 2 > lambda_proof(a, b) ** 2
    for _ in range(10):
        a, b, s1, s2, b1, b2 = O.random_admissible_endpoints(rng)
        assert O.connect_quadratic(a, b, (s1, -b1 * s1), (s2, b2 * s2)) == []


def test_connect_quadratic_recovers_orbit():
    rng = np.random.default_rng(8)
    orb = O.random_hyperbolic_orbit(rng, 1.0, 2.0)
    P1, P2 = orb.endpoints()
    found = O.connect_quadratic(1.0, 2.0, P1, P2)
    assert any(abs(f.action_quadrature() - orb.action_quadrature()) < 1e-6 * orb.action_quadrature()
               for f in found)


# --- decay bounds ------------------------------------------------------------

def test_decay_quadratic():
    orb = samples(lambda t: np.stack([np.exp(-t), 0 * t], axis=1), T=5.0)
    orb.velocities[:] = np.stack([-np.exp(-orb.times), 0 * orb.times], axis=1)
    rep = O.decay_check(orb, 1.0)
    assert rep.passed and rep.worst_margin >= 0


def test_decay_constant_orbit():
    t = np.linspace(0, 3, 50)
    orb = O.Orbit(t, np.zeros((50, 2)), np.zeros((50, 2)), np.zeros(50))
    rep = O.decay_check(orb, 2.0)
    assert rep.passed and rep.worst_margin == 0.0


def test_decay_homoclinic_tails(sep, sep_homoclinic):
    for seg, c, ctr in O.homoclinic_tails(sep, sep_homoclinic):
        rep = O.decay_check(seg, c, ctr)
        assert c > 0 and rep.passed and rep.worst_margin > 0


# --- direction overlap -------------------------------------------------------

def test_overlap_consecutive_axis_orbits(sep_homoclinic):
    rep = O.direction_overlap_probe(sep_homoclinic, sep_homoclinic.translate((1, 0)))
    assert rep.same_point and not rep.flagged
    assert rep.angle == pytest.approx(math.pi, abs=1e-9)


def test_overlap_synthetic_flag(sep_homoclinic):
    from dataclasses import replace
    d = np.array([1.0, 0.0])
    r1 = replace(sep_homoclinic, limiting_dirs=(d, d))
    assert O.direction_overlap_probe(r1, r1).flagged


def test_overlap_time_reversed(sep_homoclinic):
    # position directions: the reversed orbit leaves its start along the
    # ray on which the original arrived, so the two directions coincide
    rep = O.direction_overlap_probe(sep_homoclinic, sep_homoclinic.time_reverse())
    assert rep.angle == pytest.approx(0.0, abs=1e-9)
