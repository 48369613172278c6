"""Arclength cogeodesic flow, the boundary-regular tau system, and the maps between them.

State vectors used by the integrators:

* arclength: ``[x0, x1..xn, xi0, xi1..xin]``
* tau:       ``[x1..xn, w0, w1..wn]`` with tau = x0 carried as the parameter
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .chart import (
    E_CUT,
    FermiChart,
    _E,
    _mu,
    _transport,
    log_shift_coefficient,
    log_shift_coefficient_grad,
)
from .errors import ChartIntegrityError, DomainError, InboundRegimeError


@dataclass(frozen=True)
class CotangentState:
    t: float
    x: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float).ravel())
        object.__setattr__(self, "xi", np.asarray(self.xi, dtype=float).ravel())

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.x, self.xi])

    @classmethod
    def from_vector(cls, t, y):
        d = len(y) // 2
        return cls(t, y[:d], y[d:])


@dataclass(frozen=True)
class TauState:
    tau: float
    x_prime: np.ndarray
    w0: float
    w: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x_prime", np.atleast_1d(np.asarray(self.x_prime, dtype=float)))
        object.__setattr__(self, "w", np.atleast_1d(np.asarray(self.w, dtype=float)))
        object.__setattr__(self, "w0", float(self.w0))
        object.__setattr__(self, "tau", float(self.tau))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.x_prime, [self.w0], self.w])

    @classmethod
    def from_vector(cls, tau, y):
        n = (len(y) - 1) // 2
        return cls(tau, y[:n], y[n], y[n + 1 :])


def zeta0(chart: FermiChart, s: CotangentState) -> float:
    return float(chart.rho(s.x[0], s.x[1:])) * s.xi[0]


# ---------------------------------------------------------------------------
# arclength flow


def rhs_cogeodesic(chart: FermiChart, s: CotangentState):
    """d/dt of (x, xi) on the unit energy surface."""
    dy = cotangent_rhs(chart, s.as_vector())
    return dy[: chart.dim], dy[chart.dim :]


def cotangent_rhs(chart: FermiChart, y: np.ndarray) -> np.ndarray:
    d = chart.dim
    x0 = y[0]
    xp = y[1:d]
    xi0 = y[d]
    xa = y[d + 1 :]
    r = float(chart.rho(x0, xp))
    if not r > 0.0:
        raise DomainError(f"rho = {r} is not positive at x0={x0}")
    r0 = float(chart.drho0(x0, xp))
    rp = np.asarray(chart.drhop(x0, xp), dtype=float)
    h = chart.h(x0, xp)
    v = np.linalg.solve(h, xa)
    r2 = r * r
    out = np.empty(2 * d)
    out[0] = r2 * xi0
    out[1:d] = r2 * v
    if chart.flat_normal:
        out[d] = -r0 / r
    else:
        out[d] = -r0 / r + 0.5 * r2 * (v @ chart.dh0(x0, xp) @ v)
    dhp = np.asarray(chart.dhp(x0, xp)).reshape(d - 1, d - 1, d - 1)
    out[d + 1 :] = -rp / r + 0.5 * r2 * np.einsum("gab,a,b->g", dhp, v, v)
    return out


def cotangent_energy_vec(chart: FermiChart, y: np.ndarray) -> float:
    d = chart.dim
    x0, xp, xi = y[0], y[1:d], y[d:]
    r = float(chart.rho(x0, xp))
    xa = xi[1:]
    return r * r * (xi[0] ** 2 + xa @ np.linalg.solve(chart.h(x0, xp), xa))


# ---------------------------------------------------------------------------
# boundary-regular tau system


def rhs_tau_regular(chart: FermiChart, s: TauState):
    """d/dtau of (x', w0, w) for the boundary-regular system.

    At tau = 0 the log-singular products are replaced by their continuous
    extension (0), leaving (V, W0, W) = (0, 0, E / w0).
    """
    dy = tau_rhs(chart, s.tau, s.as_vector())
    n = chart.n
    return dy[:n], float(dy[n]), dy[n + 1 :]


def _dM_dxp(chart, x0, xp):
    steps = chart.fd_steps()
    out = []
    for l in range(chart.n):
        e = np.zeros(chart.n)
        e[l] = steps[l]
        Mp, _ = _transport(chart, x0, xp + e)
        Mm, _ = _transport(chart, x0, xp - e)
        out.append((Mp - Mm) / (2 * steps[l]))
    return out


def tau_rhs(chart: FermiChart, tau: float, y: np.ndarray) -> np.ndarray:
    n = chart.n
    xp = y[:n]
    w0 = y[n]
    w = y[n + 1 :]
    if not w0 > 0.0:
        raise InboundRegimeError(f"w0 = {w0} is not positive; tau no longer parametrizes the curve")
    if tau > 0.0:
        raise DomainError(f"tau = {tau} lies outside the chart (tau <= 0)")
    a = log_shift_coefficient(chart, xp)
    out = np.zeros(2 * n + 1)
    if tau == 0.0:
        out[n + 1 :] = _E(chart, 0.0, xp, a=a) / w0
        return out

    lg = math.log(-tau)
    r = float(chart.rho(tau, xp))
    if not r > 0.0:
        raise ChartIntegrityError(f"rho = {r} is not positive at tau={tau}, x'={xp}")
    r0 = float(chart.drho0(tau, xp))
    rp = np.asarray(chart.drhop(tau, xp), dtype=float)
    h = chart.h(tau, xp)
    hinv = np.linalg.inv(h)
    dhp = np.asarray(chart.dhp(tau, xp)).reshape(n, n, n)
    M, L = _transport(chart, tau, xp)

    A = a * lg / w0
    v = L @ (w + A)
    V = r * v / w0
    k = rp / r
    W0 = r * (k @ v) - r * r0 * (v @ h @ v) / w0
    if not chart.flat_normal:
        dh0 = chart.dh0(tau, xp)
        W0 += 0.5 * r * r * (v @ dh0 @ v) / w0

    if abs(tau) >= E_CUT:
        E = -(M @ (hinv @ rp)) / (r * r) - a / tau
    else:
        E = _E(chart, tau, xp, a=a)

    t1 = np.einsum("gml,l,g->m", dhp, v, v)
    t2 = np.einsum("msk,s,k->m", dhp, v, v)
    G = hinv @ (t1 - 0.5 * t2)

    da = log_shift_coefficient_grad(chart, xp)
    W = E / w0 - (r / w0) * (M @ G) + W0 * a * lg / (w0 * w0) - (V @ da) * lg / w0

    if not chart.flat_normal:
        dM = _dM_dxp(chart, tau, xp)
        for l in range(n):
            W += V[l] * (dM[l] @ v)
        if n > 1:
            # exp(mu) is an exact integrating factor only when mu and d0 mu commute
            S = hinv @ dh0
            mu = _mu(chart, tau, xp)
            _, dM0 = kernels.expm_frechet(mu, S)
            W += (dM0 - M @ S) @ v

    out[:n] = V
    out[n] = W0
    out[n + 1 :] = W
    return out


def tau_velocity(chart: FermiChart, tau: float, y: np.ndarray) -> np.ndarray:
    """v^a = L(w + A) for a tau-state vector (tau < 0)."""
    n = chart.n
    xp, w0, w = y[:n], y[n], y[n + 1 :]
    a = log_shift_coefficient(chart, xp)
    _, L = _transport(chart, tau, xp)
    return L @ (w + a * math.log(-tau) / w0)


# ---------------------------------------------------------------------------
# conversions


def to_tau_state(chart: FermiChart, s: CotangentState) -> TauState:
    """xi -> (w0, v) -> vhat = M v -> w = vhat - A, with tau = x0."""
    x0 = float(s.x[0])
    xp = s.x[1:]
    if not x0 < 0.0:
        raise DomainError("to_tau_state needs an interior point (x0 < 0)")
    r = float(chart.rho(x0, xp))
    w0 = r * s.xi[0]
    if not w0 > 0.0:
        raise InboundRegimeError(f"zeta0 = {w0} is not positive")
    v = np.linalg.solve(chart.h(x0, xp), s.xi[1:])
    M, _ = _transport(chart, x0, xp)
    A = log_shift_coefficient(chart, xp) * math.log(-x0) / w0
    return TauState(x0, xp.copy(), w0, M @ v - A)


def from_tau_state(chart: FermiChart, s: TauState) -> CotangentState:
    """Inverse of ``to_tau_state``; the arclength parameter is set to 0."""
    if s.tau == 0.0:
        raise DomainError("xi0 is undefined on the boundary (tau = 0)")
    if not s.w0 > 0.0:
        raise InboundRegimeError(f"w0 = {s.w0} is not positive")
    xp = s.x_prime
    A = log_shift_coefficient(chart, xp) * math.log(-s.tau) / s.w0
    _, L = _transport(chart, s.tau, xp)
    v = L @ (s.w + A)
    r = float(chart.rho(s.tau, xp))
    xi = np.concatenate([[s.w0 / r], chart.h(s.tau, xp) @ v])
    return CotangentState(0.0, np.concatenate([[s.tau], xp]), xi)


def unit_cotangent(chart: FermiChart, p, velocity, t: float = 0.0) -> CotangentState:
    """Cotangent state of the g-unit geodesic through p with tangent direction ``velocity``."""
    p = np.asarray(p, dtype=float).ravel()
    v = np.asarray(velocity, dtype=float).ravel()
    x0, xp = float(p[0]), p[1:]
    r = float(chart.rho(x0, xp))
    h = chart.h(x0, xp)
    hnorm2 = v[0] ** 2 + v[1:] @ h @ v[1:]
    if not hnorm2 > 0.0:
        raise DomainError("direction vector must be nonzero")
    v = v * r / math.sqrt(hnorm2)
    xi = np.concatenate([[v[0]], h @ v[1:]]) / (r * r)
    return CotangentState(t, p.copy(), xi)


# ---------------------------------------------------------------------------
# serialization


def state_to_json(state) -> str:
    if isinstance(state, CotangentState):
        payload = {"kind": "cotangent", "values": [state.t, *state.x.tolist(), *state.xi.tolist()]}
    elif isinstance(state, TauState):
        payload = {"kind": "tau", "values": [state.tau, *state.as_vector().tolist()]}
    else:
        raise TypeError(f"cannot serialize {type(state).__name__}")
    return json.dumps(payload)


def state_from_json(text: str):
    payload = json.loads(text)
    vals = np.asarray(payload["values"], dtype=float)
    if payload["kind"] == "cotangent":
        return CotangentState.from_vector(vals[0], vals[1:])
    if payload["kind"] == "tau":
        return TauState.from_vector(vals[0], vals[1:])
    raise ValueError(f"unknown state kind {payload['kind']!r}")
