import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ccgeo import kernels
from ccgeo.errors import DomainError, InboundRegimeError
from ccgeo.chart import energy, E_remainder
from ccgeo.checks import hamiltonian_derivative
from ccgeo.systems import (
    CotangentState,
    TauState,
    cotangent_energy_vec,
    cotangent_rhs,
    from_tau_state,
    rhs_cogeodesic,
    rhs_tau_regular,
    state_from_json,
    state_to_json,
    tau_rhs,
    to_tau_state,
    unit_cotangent,
)

from oracles import eps_geodesic_residual


@pytest.mark.parametrize("eps", [0.0, 0.5, 1.0])
def test_generic_tau_system_matches_specialized_form(eps):
    from ccgeo.examples import EpsilonFamily, make_epsilon_chart

    chart = make_epsilon_chart(EpsilonFamily(eps))
    rng = np.random.default_rng(1)
    for _ in range(50):
        tau = -10 ** rng.uniform(-8, -0.1)
        y = np.array([rng.uniform(-1.5, 1.5), rng.uniform(0.2, 1.0), rng.uniform(-3, 3)])
        generic = tau_rhs(chart, tau, y)
        special = np.array(kernels.eps_tau_rhs(tau, y[0], y[1], y[2], eps))
        # E vanishes here through a cancellation of two O(1/tau) terms, so the
        # absolute floor is roughly machine epsilon over the extrapolation cutoff
        assert generic == pytest.approx(special, rel=1e-12, abs=5e-11)


def test_rhs_at_boundary(g1, g1q):
    dx, dw0, dw = rhs_tau_regular(g1, TauState(0.0, [0.2], 0.7, [1.0]))
    assert dx == pytest.approx([0.0]) and dw0 == 0.0 and dw == pytest.approx([0.0], abs=1e-9)
    dx, dw0, dw = rhs_tau_regular(g1q, TauState(0.0, [0.2], 0.5, [1.0]))
    assert dw == pytest.approx(E_remainder(g1q, (0.0, 0.2)) / 0.5, rel=1e-12)
    assert dw[0] == pytest.approx(-math.exp(-0.2) / 0.5, rel=1e-7)


def test_tau_rhs_continuous_at_boundary(g1q):
    y = np.array([0.1, 0.8, 0.4])
    at0 = tau_rhs(g1q, 0.0, y)
    # the gap closes like |tau| log^3 |tau|
    gaps = [np.max(np.abs(tau_rhs(g1q, -(10.0 ** -k), y) - at0)) for k in (4, 6, 9, 12)]
    assert all(a > b for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 1e-7


def test_tau_rhs_domain(g1):
    with pytest.raises(InboundRegimeError):
        tau_rhs(g1, -0.1, np.array([0.0, 0.0, 1.0]))
    with pytest.raises(DomainError):
        tau_rhs(g1, 0.1, np.array([0.0, 0.5, 1.0]))


def test_to_tau_state_example(g1):
    # y = 0.1, x = 0, unit velocity with v_x = 3 in h-components: rho^2 v_x^2 = 0.09
    s = unit_cotangent(g1, (-0.1, 0.0), (math.sqrt(0.91) / 0.1, 3.0))
    t = to_tau_state(g1, s)
    w0 = math.sqrt(0.91)
    assert t.tau == -0.1
    assert t.w0 == pytest.approx(w0, rel=1e-14)
    assert t.w[0] == pytest.approx(3.0 - math.log(0.1) / w0, rel=1e-13)
    assert energy(g1, t) == pytest.approx(1.0, abs=1e-14)


def test_round_trip(g1, warped, g1q):
    rng = np.random.default_rng(2)
    for chart in (g1, warped, g1q):
        for _ in range(20):
            p = np.array([-rng.uniform(0.01, 0.8), rng.uniform(-1, 1)])
            v = np.array([rng.uniform(0.1, 1), rng.normal()])
            s = unit_cotangent(chart, p, v)
            back = from_tau_state(chart, to_tau_state(chart, s))
            assert back.x == pytest.approx(s.x, abs=0)
            assert back.xi == pytest.approx(s.xi, rel=1e-13)


def test_conversion_errors(g1):
    with pytest.raises(DomainError):
        from_tau_state(g1, TauState(0.0, [0.0], 1.0, [0.0]))
    s = unit_cotangent(g1, (-0.3, 0.0), (-1.0, 0.2))
    with pytest.raises(InboundRegimeError):
        to_tau_state(g1, s)
    with pytest.raises(DomainError):
        unit_cotangent(g1, (-0.3, 0.0), (0.0, 0.0))


def test_unit_cotangent_has_unit_energy(warped, g1):
    for chart in (warped, g1):
        s = unit_cotangent(chart, (-0.4, 0.3), (0.3, -0.7))
        assert cotangent_energy_vec(chart, s.as_vector()) == pytest.approx(1.0, rel=1e-14)


@pytest.mark.parametrize("eps", [0.0, 0.5, 1.0])
def test_arclength_flow_solves_geodesic_equations(eps):
    from ccgeo.examples import EpsilonFamily, make_epsilon_chart

    chart = make_epsilon_chart(EpsilonFamily(eps))
    rng = np.random.default_rng(3)
    for _ in range(10):
        s = unit_cotangent(chart, (-rng.uniform(0.05, 0.8), rng.uniform(-1, 1)), rng.normal(size=2))
        yv = s.as_vector()
        f = cotangent_rhs(chart, yv)

        def vel(z):
            return cotangent_rhs(chart, z)[:2]

        h = 1e-5
        acc = (vel(yv + h * f) - vel(yv - h * f)) / (2 * h)
        x, y = yv[1], -yv[0]
        xd, yd = f[1], -f[0]
        xdd, ydd = acc[1], -acc[0]
        r1, r2 = eps_geodesic_residual(eps, x, y, xd, yd, xdd, ydd)
        scale = 1 + abs(xdd) + abs(ydd)
        assert abs(r1) / scale < 1e-7 and abs(r2) / scale < 1e-7
        # momentum conjugate to x drifts at the constant rate -eps
        assert f[3] == pytest.approx(-eps, abs=1e-12)


def test_specialized_cotangent_kernel(g05):
    s = unit_cotangent(g05, (-0.3, 0.4), (0.6, 0.8))
    assert np.array(kernels.eps_cotangent_rhs(*s.as_vector(), 0.5)) == pytest.approx(cotangent_rhs(g05, s.as_vector()),
                                                                                    rel=1e-14)


def test_rhs_cogeodesic_split(g1):
    s = unit_cotangent(g1, (-0.3, 0.4), (0.6, 0.8))
    dx, dxi = rhs_cogeodesic(g1, s)
    assert np.concatenate([dx, dxi]) == pytest.approx(cotangent_rhs(g1, s.as_vector()))


def test_rhs_rejects_nonpositive_rho(g1):
    with pytest.raises(DomainError):
        cotangent_rhs(g1, np.array([0.0, 0.0, 1.0, 0.0]))


def test_hamiltonian_conserved_by_rhs(g1q, warped):
    rng = np.random.default_rng(4)
    for chart in (g1q, warped):
        for _ in range(10):
            s = unit_cotangent(chart, (-rng.uniform(0.05, 0.8), rng.uniform(-1, 1)), rng.normal(size=2))
            assert abs(hamiltonian_derivative(chart, s.as_vector())) < 1e-12


def test_tau_rhs_conserves_energy(g1q, warped):
    rng = np.random.default_rng(5)
    for chart in (g1q, warped):
        for _ in range(10):
            s = unit_cotangent(chart, (-rng.uniform(0.01, 0.8), rng.uniform(-1, 1)),
                               (rng.uniform(0.3, 1.0), rng.normal()))
            ts = to_tau_state(chart, s)
            tau, y = ts.tau, ts.as_vector()
            f = tau_rhs(chart, tau, y)
            h = 1e-6
            ep = energy(chart, TauState.from_vector(tau + h, y + h * f))
            em = energy(chart, TauState.from_vector(tau - h, y - h * f))
            assert abs(ep - em) / (2 * h) < 1e-7


@settings(max_examples=50, deadline=None)
@given(st.floats(-0.85, -1e-6), st.floats(-1.5, 1.5), st.floats(0.05, 1.0), st.floats(-1.0, 1.0))
def test_round_trip_property(x0, x, a, b):
    from ccgeo.examples import EpsilonFamily, make_epsilon_chart

    chart = make_epsilon_chart(EpsilonFamily(1.0))
    s = unit_cotangent(chart, (x0, x), (a, b))
    back = from_tau_state(chart, to_tau_state(chart, s))
    assert np.max(np.abs(back.xi - s.xi) / (1 + np.abs(s.xi))) <= 1e-13


def test_state_json_round_trip():
    c = CotangentState(1.5, [-0.2, 0.3], [1.0, -2.0])
    t = TauState(-0.1, [0.4], 0.9, [2.5])
    c2 = state_from_json(state_to_json(c))
    t2 = state_from_json(state_to_json(t))
    assert c2.t == 1.5 and np.array_equal(c2.x, c.x) and np.array_equal(c2.xi, c.xi)
    assert t2.tau == -0.1 and t2.w0 == 0.9 and np.array_equal(t2.w, t.w)
    with pytest.raises(TypeError):
        state_to_json(3)
    with pytest.raises(ValueError):
        state_from_json('{"kind": "other", "values": [0]}')
