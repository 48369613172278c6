"""Geodesic shooting toward and from the boundary."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .chart import BoundaryPoint, FermiChart, kappa, kappa_raised, _kappa
from .errors import DiagnosticsError, DomainError, IntegrationFailure
from .integrate import (
    REACHED_BOUNDARY,
    REACHED_HANDOFF,
    IntegratorConfig,
    Trajectory,
    integrate_t,
    integrate_tau_from_boundary,
    integrate_tau_to_boundary,
)
from .systems import TauState, to_tau_state, unit_cotangent

DEFAULT_T_MAX = 1000.0


@dataclass
class ShootResult:
    endpoint: BoundaryPoint
    trajectory: Trajectory  # tau phase, ending at tau = 0
    handoff: TauState
    diagnostics: dict
    t_trajectory: Optional[Trajectory] = field(default=None, repr=False)


def _h_norm(chart: FermiChart, p, v) -> float:
    h = chart.h(p[0], p[1:])
    return math.sqrt(v[0] ** 2 + v[1:] @ h @ v[1:])


def endpoint_map(chart: FermiChart, p, v, cfg: IntegratorConfig = IntegratorConfig(),
                 t_max: float = DEFAULT_T_MAX, tau_eval: Sequence[float] = ()) -> ShootResult:
    """Boundary endpoint of the geodesic through Fermi point p with initial direction v.

    Arclength flow up to the handoff layer, then the tau system to tau = 0
    (hitting the points ``tau_eval`` exactly on the way).
    """
    p = np.asarray(p, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    if p.shape != (chart.dim,) or v.shape != (chart.dim,):
        raise DomainError(f"p and v need {chart.dim} components")
    if not -chart.depth <= p[0] < 0:
        raise DomainError(f"p must be an interior point with -{chart.depth:g} <= x0 < 0")
    if not chart.in_box(p[1:]):
        raise DomainError(f"p = {p} lies outside the chart box")
    if not v[0] > 0:
        raise DomainError("direction must point toward the boundary (positive x0 component)")
    s0 = unit_cotangent(chart, p, v)
    t_traj = integrate_t(chart, s0, t_max, cfg)
    if t_traj.termination != REACHED_HANDOFF:
        raise IntegrationFailure(f"arclength phase ended with {t_traj.termination}: {t_traj.message}", t_traj)
    s1 = t_traj.final_state()
    try:
        handoff = to_tau_state(chart, s1)
    except DomainError as exc:
        raise IntegrationFailure(f"handoff failed: {exc}", t_traj) from None
    tau_traj = integrate_tau_to_boundary(chart, handoff, cfg, eval_points=[t for t in tau_eval if t > handoff.tau])
    if tau_traj.termination != REACHED_BOUNDARY:
        raise IntegrationFailure(f"tau phase ended with {tau_traj.termination}: {tau_traj.message}", tau_traj)
    endpoint = BoundaryPoint(tau_traj.states[-1][: chart.n].copy())
    diag = {
        "energy_drift": float(np.max(np.abs(tau_traj.energies() - 1.0))),
        "zeta0_handoff": float(handoff.w0),
        "t_handoff": float(t_traj.params[-1]),
        "kappa_endpoint": kappa(chart, endpoint.x_prime),
    }
    try:
        diag["rho_decay_slope"] = rho_decay_rate(chart, t_traj)
    except DiagnosticsError:
        diag["rho_decay_slope"] = float("nan")
    return ShootResult(endpoint, tau_traj, handoff, diag, t_traj)


def _orthonormal_complement(chart: FermiChart, p, v) -> np.ndarray:
    """h-orthonormal basis of the complement of v at p (rows), via Gram-Schmidt."""
    d = chart.dim
    G = np.eye(d)
    G[1:, 1:] = chart.h(p[0], p[1:])

    def ip(a, b):
        return a @ G @ b

    basis = [v / math.sqrt(ip(v, v))]
    for e in np.eye(d):
        u = e - sum(ip(e, b) * b for b in basis)
        nu = math.sqrt(max(ip(u, u), 0.0))
        if nu > 1e-8:
            basis.append(u / nu)
        if len(basis) == d:
            break
    return np.array(basis[1:])


def expmap_jacobian(chart: FermiChart, p, v, cfg: IntegratorConfig = IntegratorConfig(),
                    fd_step: float = 1e-4):
    """Derivative of the boundary endpoint with respect to direction angles.

    Angles are taken along an h-orthonormal basis of the complement of v;
    central differences with angular step ``fd_step``.  Returns
    ``(J, sigma_min)`` with J of shape (n, n).
    """
    p = np.asarray(p, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    vhat = v / _h_norm(chart, p, v)
    basis = _orthonormal_complement(chart, p, vhat)
    cols = []
    for e in basis:
        ends = []
        for s in (fd_step, -fd_step):
            w = math.cos(s) * vhat + math.sin(s) * e
            try:
                ends.append(endpoint_map(chart, p, w, cfg).endpoint.x_prime)
            except IntegrationFailure as exc:
                raise IntegrationFailure(f"Jacobian shot at angle {s:+g} along {e} failed: {exc}",
                                         exc.trajectory) from None
        cols.append((ends[0] - ends[1]) / (2 * fd_step))
    J = np.array(cols).T
    sigma = np.linalg.svd(J, compute_uv=False)
    return J, float(sigma.min())


def w_from_u(chart: FermiChart, q, u) -> np.ndarray:
    """Initial w on the boundary giving the tau^2 coefficient u."""
    xp = np.atleast_1d(np.asarray(q.x_prime if isinstance(q, BoundaryPoint) else q, dtype=float))
    k = _kappa(chart, xp)
    kup = kappa_raised(chart, xp)
    return kup / (2 * k * k) - 2 * np.atleast_1d(np.asarray(u, dtype=float)) / k


def u_from_w(chart: FermiChart, q, w) -> np.ndarray:
    xp = np.atleast_1d(np.asarray(q.x_prime if isinstance(q, BoundaryPoint) else q, dtype=float))
    k = _kappa(chart, xp)
    return -0.5 * k * np.asarray(w, dtype=float) + kappa_raised(chart, xp) / (4 * k)


def geometric_grid(lo: float, hi: float, per_decade: int = 50) -> np.ndarray:
    """Negative tau values with |tau| spaced geometrically in [lo, hi]."""
    num = int(math.ceil(per_decade * math.log10(hi / lo))) + 1
    return -np.geomspace(lo, hi, num)


def boundary_shoot(chart: FermiChart, q, u, tau_end: float, cfg: IntegratorConfig = IntegratorConfig(),
                   eval_points: Optional[Sequence[float]] = None) -> Trajectory:
    """Geodesic leaving the boundary point q with boundary expansion coefficient u.

    By default the trajectory is sampled exactly on a geometric tau grid
    (50 points per decade down to |tau| = 1e-6) on top of the adaptive steps.
    """
    w = w_from_u(chart, q, u)
    if eval_points is None:
        eval_points = geometric_grid(1e-6, abs(tau_end))
    return integrate_tau_from_boundary(chart, q, w, tau_end, cfg, eval_points=eval_points)


def rho_decay_rate(chart: FermiChart, traj: Trajectory, window=None) -> float:
    """Least-squares slope of log rho against t over ``window``.

    The default window is the tail of the run where rho <= 1e-2, falling back
    to the second half of the run when that tail is too short.
    """
    if traj.parameter_kind != "arclength":
        raise DiagnosticsError("rho_decay_rate needs an arclength trajectory")
    t = traj.params
    n = chart.n
    logr = np.log([float(chart.rho(y[0], y[1 : n + 1])) for y in traj.states])
    if window is None:
        deep = np.flatnonzero(logr <= math.log(1e-2))
        if deep.size >= 10:
            window = (t[deep[0]], t[-1])
        else:
            window = (t[0] + 0.5 * (t[-1] - t[0]), t[-1])
    lo, hi = window
    sel = (t >= lo) & (t <= hi)
    if np.count_nonzero(sel) < 10:
        raise DiagnosticsError(f"window [{lo}, {hi}] holds fewer than 10 samples")
    slope, _ = np.polyfit(t[sel], logr[sel], 1)
    return float(slope)
