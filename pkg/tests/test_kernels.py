import json
import os
import subprocess
import sys

import numpy as np
import pytest

from ccgeo import kernels
from ccgeo._accel import JIT_ENABLED
from ccgeo.integrate import IntegratorConfig
from ccgeo.shoot import boundary_shoot, w_from_u


def _py(fn):
    return getattr(fn, "py_func", fn)


def test_jit_and_python_agree():
    a = np.array([[0.3, -1.2], [0.4, 0.2]])
    assert kernels.expm(a) == pytest.approx(_py(kernels.expm)(a), rel=1e-14)
    for tau in (-0.3, -1e-7, 0.0):
        assert kernels.eps_tau_rhs(tau, 0.2, 0.8, 0.4, 1.0) == pytest.approx(
            _py(kernels.eps_tau_rhs)(tau, 0.2, 0.8, 0.4, 1.0), rel=1e-14)


def test_expm_edge_cases():
    assert np.array_equal(kernels.expm(np.zeros((2, 2))), np.eye(2))
    big = np.array([[40.0, 0.0], [0.0, -40.0]])
    assert kernels.expm(big) == pytest.approx(np.diag([np.exp(40.0), np.exp(-40.0)]), rel=1e-12)


def test_specialized_integrator_matches_generic(g1):
    tr = boundary_shoot(g1, [0.0], [0.5], -0.5, IntegratorConfig())
    y0 = np.array([0.0, 1.0, w_from_u(g1, [0.0], [0.5])[0]])
    taus, ys, status = kernels.eps_tau_integrate(1.0, 0.0, y0, -0.5, 1e-10, 1e-12, 1e-12, 1e-10, 100000)
    assert status == 0 and taus[-1] == -0.5
    assert ys[-1] == pytest.approx(tr.states[-1], abs=1e-8)
    back_t, back_y, status = kernels.eps_tau_integrate(1.0, -0.5, ys[-1], 0.0, 1e-10, 1e-12, 1e-12, 1e-10, 100000)
    assert status == 0 and back_t[-1] == 0.0
    assert back_y[-1] == pytest.approx(y0, abs=1e-7)


def test_specialized_integrator_status_codes():
    y0 = np.array([0.0, 1.0, -2.0])
    taus, _, status = kernels.eps_tau_integrate(0.0, 0.0, y0, -0.9, 1e-10, 1e-12, 1e-12, 1e-10, 100000)
    # w0 vanishes like a square root at the top of the circle, so steps stall there
    assert status in (1, 2)
    assert taus[-1] == pytest.approx(-0.5, abs=1e-6)
    _, _, status = kernels.eps_tau_integrate(0.0, 0.0, y0, -0.9, 1e-10, 1e-12, 1e-12, 1e-10, 3)
    assert status == 3


def test_pure_numpy_fallback_gives_same_numbers():
    code = (
        "import json, numpy as np\n"
        "from ccgeo import kernels\n"
        "from ccgeo._accel import JIT_ENABLED\n"
        "from ccgeo.examples import EpsilonFamily, make_epsilon_chart, direction_from_theta\n"
        "from ccgeo.shoot import endpoint_map\n"
        "c = make_epsilon_chart(EpsilonFamily(1.0))\n"
        "e = endpoint_map(c, (-1.0, 0.0), direction_from_theta(0.4)).endpoint.x_prime[0]\n"
        "m = kernels.expm(np.array([[0.1, 2.0], [-1.0, 0.3]])).tolist()\n"
        "print(json.dumps({'jit': JIT_ENABLED, 'endpoint': e, 'expm': m}))\n"
    )
    out = {}
    for flag in ("0", "1"):
        env = dict(os.environ, CCGEO_DISABLE_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        out[flag] = json.loads(res.stdout)
    assert out["1"]["jit"] is False
    assert out["0"]["jit"] is JIT_ENABLED
    assert out["0"]["endpoint"] == pytest.approx(out["1"]["endpoint"], abs=1e-12)
    assert np.array(out["0"]["expm"]) == pytest.approx(np.array(out["1"]["expm"]), rel=1e-13)


def test_benchmark_runs():
    root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    res = subprocess.run([sys.executable, os.path.join(root, "benchmarks", "bench_kernels.py"), "--repeat", "1"],
                         capture_output=True, text=True, check=True, timeout=300)
    assert "speedup" in res.stdout and "eps_tau_integrate" in res.stdout
