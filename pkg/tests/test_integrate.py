import json
import math

import numpy as np
import pytest

from ccgeo.errors import DomainError, InboundRegimeError
from ccgeo.examples import direction_from_theta, hyperbolic_endpoint_oracle
from ccgeo.integrate import (
    LEFT_CHART,
    LEFT_INBOUND,
    REACHED_BOUNDARY,
    REACHED_END,
    REACHED_HANDOFF,
    IntegratorConfig,
    dp45,
    integrate_t,
    integrate_tau_from_boundary,
    integrate_tau_to_boundary,
)
from ccgeo.shoot import endpoint_map
from ccgeo.systems import CotangentState, TauState, to_tau_state, unit_cotangent


def test_dp45_exponential_with_eval_points():
    cfg = IntegratorConfig(rel_tol=1e-12, abs_tol=1e-14)
    pts = [0.1, 0.25, 0.7]
    run = dp45(lambda t, y: y, 0.0, np.array([1.0]), 1.0, cfg, h0=1e-3, eval_points=pts)
    assert run.status is None
    for p in pts + [1.0]:
        i = run.ts.index(p)
        assert run.ys[i][0] == pytest.approx(math.exp(p), rel=1e-11)


def test_dp45_backward_and_event():
    cfg = IntegratorConfig()
    run = dp45(lambda t, y: -y, 0.0, np.array([1.0]), -5.0, cfg, h0=1e-3, event=lambda t, y: y[0] - 10.0)
    assert run.status == REACHED_HANDOFF
    assert run.ts[-1] == pytest.approx(-math.log(10.0), abs=1e-10)
    assert run.ys[-1][0] == pytest.approx(10.0, abs=1e-11)


def test_dp45_observed_order():
    errs = []
    for tol in (1e-6, 1e-8, 1e-10):
        cfg = IntegratorConfig(rel_tol=tol, abs_tol=tol * 1e-2)
        run = dp45(lambda t, y: np.array([y[1], -y[0]]), 0.0, np.array([0.0, 1.0]), 10.0, cfg, h0=1e-3)
        errs.append(abs(run.ys[-1][0] - math.sin(10.0)))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-8


def test_vertical_ray(g0):
    s = unit_cotangent(g0, (-1.0, 0.0), (1.0, 0.0))
    tr = integrate_t(g0, s, 5.0, IntegratorConfig(), handoff=False)
    assert tr.termination == REACHED_END
    assert tr.params[-1] == 5.0
    assert -tr.states[-1, 0] == pytest.approx(math.exp(-5.0), abs=1e-9)
    assert tr.states[-1, 1] == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("eps", [0.5, 1.0])
def test_momentum_drift_is_linear(eps):
    from ccgeo.examples import EpsilonFamily, make_epsilon_chart

    chart = make_epsilon_chart(EpsilonFamily(eps))
    s = unit_cotangent(chart, (-0.6, 0.1), direction_from_theta(0.3))
    tr = integrate_t(chart, s, 50.0)
    assert tr.termination == REACHED_HANDOFF
    assert tr.states[:, 3] - s.xi[1] == pytest.approx(-eps * (tr.params - s.t), abs=1e-9)


def test_handoff_depth(g1):
    s = unit_cotangent(g1, (-0.6, 0.1), direction_from_theta(0.3))
    cfg = IntegratorConfig()
    tr = integrate_t(g1, s, 100.0, cfg)
    assert tr.states[-1, 0] == pytest.approx(-cfg.handoff_depth(g1), abs=1e-11)
    assert np.max(np.abs(tr.energies() - 1)) < 1e-9


def test_reversibility(g1):
    s = unit_cotangent(g1, (-0.5, 0.0), direction_from_theta(0.4))
    cfg = IntegratorConfig(rel_tol=1e-12, abs_tol=1e-14)
    fwd = integrate_t(g1, s, 1.0, cfg, handoff=False)
    end = fwd.final_state()
    back = integrate_t(g1, CotangentState(0.0, end.x, -end.xi), 1.0, cfg, handoff=False)
    assert back.states[-1, :2] == pytest.approx(s.x, abs=1e-10)
    assert -back.states[-1, 2:] == pytest.approx(s.xi, rel=1e-9)


def test_left_chart(g1):
    s = unit_cotangent(g1, (-0.5, 1.9), direction_from_theta(1.4))
    tr = integrate_t(g1, s, 100.0)
    assert tr.termination == LEFT_CHART


def test_inbound_regime(g0):
    # the circle with u = 1 tops out at y = 1/2, where w0 reaches 0
    from ccgeo.shoot import w_from_u

    tr = integrate_tau_from_boundary(g0, [0.0], w_from_u(g0, [0.0], [1.0]), -0.9)
    assert tr.termination == LEFT_INBOUND
    assert -tr.params[-1] == pytest.approx(0.5, abs=1e-3)


def test_tau_to_boundary_hits_zero(g1):
    s = unit_cotangent(g1, (-0.3, 0.0), direction_from_theta(0.2))
    tr = integrate_tau_to_boundary(g1, to_tau_state(g1, s))
    assert tr.termination == REACHED_BOUNDARY and tr.params[-1] == 0.0
    assert np.max(np.abs(tr.energies() - 1)) < 1e-9


def test_tau_min_insensitivity(g1):
    p, v = (-1.0, 0.0), direction_from_theta(math.pi / 8)
    a = endpoint_map(g1, p, v, IntegratorConfig(tau_min=1e-12)).endpoint.x_prime
    b = endpoint_map(g1, p, v, IntegratorConfig(tau_min=1e-10)).endpoint.x_prime
    assert a == pytest.approx(b, abs=1e-9)


def test_endpoint_error_decreases_with_tolerance(g0):
    p, th = (-1.0, 0.0), math.pi / 4
    exact = hyperbolic_endpoint_oracle((0.0, 1.0), th)
    errs = [abs(endpoint_map(g0, p, direction_from_theta(th), IntegratorConfig(rel_tol=t, abs_tol=t * 1e-2))
                .endpoint.x_prime[0] - exact) for t in (1e-6, 1e-9)]
    assert errs[1] < errs[0] and errs[1] < 1e-9


def test_from_boundary_validation(g1):
    with pytest.raises(DomainError):
        integrate_tau_from_boundary(g1, [0.0], [0.0], -2.0)
    with pytest.raises(DomainError):
        integrate_tau_from_boundary(g1, [3.0], [0.0], -0.1)
    with pytest.raises(DomainError):
        integrate_tau_from_boundary(g1, [0.0, 1.0], [0.0], -0.1)


def test_from_boundary_eval_points(g1):
    pts = [-0.01, -0.05, -0.1]
    tr = integrate_tau_from_boundary(g1, [0.0], [0.5], -0.2, eval_points=pts)
    assert tr.termination == REACHED_END
    for p in pts + [-0.2]:
        assert p in tr.params.tolist()
    assert np.all(np.diff(tr.params) < 0)


def test_config_validation():
    with pytest.raises(DomainError):
        IntegratorConfig(rel_tol=0)
    with pytest.raises(DomainError):
        IntegratorConfig(tau_min=1e-3, initial_step=1e-6)
    with pytest.raises(DomainError):
        IntegratorConfig(max_steps=0)
    with pytest.raises(DomainError):
        IntegratorConfig(x_stop=-1.0)
    cfg = IntegratorConfig().with_overrides(rel_tol=1e-8, abs_tol=None)
    assert cfg.rel_tol == 1e-8 and cfg.abs_tol == 1e-12


def test_energy_precheck(g1):
    with pytest.raises(DomainError):
        integrate_t(g1, CotangentState(0.0, [-0.5, 0.0], [3.0, 0.0]), 1.0)
    with pytest.raises(DomainError):
        integrate_tau_to_boundary(g1, TauState(0.0, [0.0], 1.0, [0.0]))
    with pytest.raises(InboundRegimeError):
        integrate_tau_to_boundary(g1, TauState(-0.1, [0.0], -1.0, [0.0]))


def test_max_steps(g1):
    s = unit_cotangent(g1, (-0.5, 0.0), direction_from_theta(0.3))
    tr = integrate_t(g1, s, 100.0, IntegratorConfig(max_steps=5))
    assert tr.termination == "step_failure"


def test_record_stride(g1):
    s = unit_cotangent(g1, (-0.5, 0.0), direction_from_theta(0.3))
    full = integrate_t(g1, s, 100.0)
    thin = integrate_t(g1, s, 100.0, IntegratorConfig(record_stride=5))
    assert len(thin) < len(full)
    assert thin.states[-1] == pytest.approx(full.states[-1], abs=1e-14)


def test_csv_and_json_export(g1, tmp_path):
    tr = integrate_tau_from_boundary(g1, [0.0], [0.5], -0.1)
    path = tmp_path / "t.csv"
    tr.to_csv(str(path))
    lines = path.read_text().splitlines()
    assert lines[0].startswith("#") and "termination=reached_end" in lines[0]
    assert lines[1] == "tau,x1,w0,w1,rho,energy"
    assert len(lines) == len(tr) + 2
    row = [float(v) for v in lines[-1].split(",")]
    assert row[:4] == pytest.approx(np.concatenate([[tr.params[-1]], tr.states[-1]]).tolist(), rel=1e-16)
    payload = json.loads(json.dumps(tr.to_json()))
    assert payload["columns"][0] == "tau" and len(payload["rows"]) == len(tr)
    s = unit_cotangent(g1, (-0.5, 0.0), direction_from_theta(0.3))
    t_tr = integrate_t(g1, s, 100.0)
    assert t_tr.columns() == ["t", "x0", "x1", "xi0", "xi1", "rho", "energy"]
    assert not list(tmp_path.glob(".tmp-*"))
