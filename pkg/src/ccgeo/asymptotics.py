"""Boundary expansion fits, the obstruction, AH detection and flow-map regularity checks."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .chart import BoundaryPoint, FermiChart, _check_xp, _kappa, kappa_raised
from .errors import DiagnosticsError, DomainError, IllConditionedWindowError, IntegrationFailure
from .integrate import (
    IntegratorConfig,
    Trajectory,
    _heun,
    dp45,
)
from .systems import tau_rhs

DEFAULT_WINDOW = (1e-3, 1e-2)
MAX_CONDITION = 1e8


@dataclass
class ExpansionFit:
    O_fit: np.ndarray
    u_fit: np.ndarray
    window: tuple
    residual_rms: float
    condition: float
    nuisance: Optional[np.ndarray] = None
    n_samples: int = 0

    def to_json(self) -> dict:
        d = asdict(self)
        for k in ("O_fit", "u_fit", "nuisance"):
            if d[k] is not None:
                d[k] = np.asarray(d[k]).tolist()
        d["window"] = list(self.window)
        return d


def obstruction(chart: FermiChart, q) -> np.ndarray:
    """-kappa^a / (2 kappa) at q: the coefficient of x^2 log x in boundary expansions."""
    xp = _check_xp(chart, q.x_prime if isinstance(q, BoundaryPoint) else q)
    return -kappa_raised(chart, xp) / (2 * _kappa(chart, xp))


def fit_expansion(traj: Trajectory, window=DEFAULT_WINDOW, include_nuisance: bool = True) -> ExpansionFit:
    """Fit x(tau) - x(0) = O tau^2 log|tau| + u tau^2 (+ tau^3 log|tau|, tau^3) over |tau| in window.

    Rows are weighted by 1/tau^2 (squared weights 1/tau^4), which puts the
    signal on an O(1) scale.  Since |tau| is the distance to the boundary the
    coefficients read directly in the (x, y) convention of the expansion.
    """
    if traj.parameter_kind != "tau":
        raise DomainError("fit_expansion needs a tau trajectory")
    taus = traj.params
    at0 = np.flatnonzero(taus == 0.0)
    if at0.size == 0:
        raise DomainError("trajectory does not reach tau = 0")
    n = traj.n
    x_end = traj.states[at0[0], :n]
    lo, hi = sorted(abs(float(w)) for w in window)
    sel = (np.abs(taus) >= lo) & (np.abs(taus) <= hi)
    if np.count_nonzero(sel) < 30:
        raise DiagnosticsError(f"window [{lo:g}, {hi:g}] holds {np.count_nonzero(sel)} samples; need 30")
    t = taus[sel]
    lg = np.log(np.abs(t))
    cols = [lg, np.ones_like(t)]
    if include_nuisance:
        cols += [t * lg, t]
    X = np.column_stack(cols)
    Y = (traj.states[sel, :n] - x_end) / (t * t)[:, None]
    scale = np.linalg.norm(X, axis=0)
    Xs = X / scale
    cond = float(np.linalg.cond(Xs))
    if cond > MAX_CONDITION:
        raise IllConditionedWindowError(f"basis condition number {cond:.3e} exceeds {MAX_CONDITION:g}")
    coef, *_ = np.linalg.lstsq(Xs, Y, rcond=None)
    coef = coef / scale[:, None]
    resid = Y - X @ coef
    return ExpansionFit(
        O_fit=coef[0].copy(),
        u_fit=coef[1].copy(),
        window=(lo, hi),
        residual_rms=float(np.sqrt(np.mean(resid**2))),
        condition=cond,
        nuisance=coef[2:].copy() if include_nuisance else None,
        n_samples=int(t.size),
    )


def is_asymptotically_hyperbolic(chart: FermiChart, sample_points: Sequence, tol: float = 1e-8):
    """(sup |O| <= tol, sup |O|) over the given boundary points."""
    pts = list(sample_points)
    if not pts:
        raise DomainError("need at least one boundary sample point")
    sup = max(float(np.linalg.norm(obstruction(chart, q))) for q in pts)
    return sup <= tol, sup


def boundary_samples(chart: FermiChart, num: int = 9):
    axes = [np.linspace(b[0], b[1], num) for b in chart.x_box]
    mesh = np.meshgrid(*axes, indexing="ij")
    return [BoundaryPoint(p) for p in np.stack([m.ravel() for m in mesh], axis=1)]


# ---------------------------------------------------------------------------
# flow maps of the tau system


def tau_system(chart: FermiChart) -> Callable:
    return lambda t, y: tau_rhs(chart, t, y)


def flow_map(f: Callable, tau0: float, tau1: float, y0, cfg: IntegratorConfig = IntegratorConfig(),
             boundary_step: bool = True):
    """theta(tau1, tau0, y0) for y' = f(tau, y).

    When tau1 = 0 and ``boundary_step`` is set, adaptivity stops at -tau_min and
    a Heun step reaches 0.  Returns (y1, taus) where taus is the step grid used.
    """
    y0 = np.asarray(y0, dtype=float)
    stop = -cfg.tau_min if (tau1 == 0.0 and boundary_step and tau0 < -cfg.tau_min) else tau1
    run = dp45(f, tau0, y0, stop, cfg, h0=min(cfg.initial_step, abs(stop - tau0)))
    if run.status is not None:
        raise IntegrationFailure(f"flow map ended with {run.status}: {run.message}")
    ts, y = list(run.ts), run.ys[-1]
    if stop != tau1:
        y = _heun(f, stop, y, tau1 - stop)
        ts.append(tau1)
    return y, np.array(ts)


def replay(f: Callable, grid: np.ndarray, y0, heun_last: bool = False) -> np.ndarray:
    """Run Dormand-Prince steps on a frozen grid; the map y0 -> y(end) is then smooth in y0."""
    from .integrate import _dp_step

    y = np.asarray(y0, dtype=float)
    steps = len(grid) - 1
    for i in range(steps):
        t, h = grid[i], grid[i + 1] - grid[i]
        if heun_last and i == steps - 1:
            y = _heun(f, t, y, h)
        else:
            y, _, _ = _dp_step(f, t, y, h, f(t, y))
    return y


def lipschitz_estimate(f: Callable, taus: Sequence[float], lo, hi, n_pairs: int = 1000,
                       rel_sep: float = 1e-2, rng=None) -> float:
    """max of |f(t, y1) - f(t, y2)| / |y1 - y2| over random nearby pairs in the box [lo, hi]."""
    rng = np.random.default_rng(0) if rng is None else rng
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    taus = np.asarray(taus, float)
    best = 0.0
    for _ in range(n_pairs):
        t = taus[rng.integers(len(taus))] if taus.size < 3 else rng.uniform(taus.min(), taus.max())
        y1 = rng.uniform(lo, hi)
        d = rng.normal(size=y1.shape) * rel_sep * (hi - lo)
        y2 = y1 + d
        best = max(best, float(np.linalg.norm(f(t, y1) - f(t, y2)) / np.linalg.norm(d)))
    return best


def flow_lipschitz_check(f: Callable, tau0: float, interval_len: float, state_pairs,
                         cfg: IntegratorConfig = IntegratorConfig()) -> dict:
    """Largest |theta(y1) - theta(y2)| / |y1 - y2| over [tau0, tau0 + interval_len] against e."""
    tau1 = min(tau0 + interval_len, 0.0)
    ratios = []
    for y1, y2 in state_pairs:
        y1, y2 = np.asarray(y1, float), np.asarray(y2, float)
        d0 = np.linalg.norm(y1 - y2)
        if d0 == 0.0:
            ratios.append(1.0)
            continue
        z1, _ = flow_map(f, tau0, tau1, y1, cfg)
        z2, _ = flow_map(f, tau0, tau1, y2, cfg)
        ratios.append(float(np.linalg.norm(z1 - z2) / d0))
    mr = max(ratios)
    return {"max_ratio": mr, "bound": math.e, "bound_ok": mr <= math.e, "margin": math.e - mr,
            "ratios": ratios, "tau1": tau1}


def _rhs_jacobian(f, t, y, rel=1e-7):
    d = len(y)
    J = np.empty((d, d))
    for j in range(d):
        s = rel * max(1.0, abs(y[j]))
        e = np.zeros(d)
        e[j] = s
        J[:, j] = (f(t, y + e) - f(t, y - e)) / (2 * s)
    return J


def variational_jacobian(f: Callable, tau0: float, tau1: float, y0, cfg: IntegratorConfig = IntegratorConfig()):
    """Flow Jacobian from the augmented system y' = f, Y' = D_y f Y with Y(tau0) = I."""
    y0 = np.asarray(y0, dtype=float)
    d = len(y0)

    def g(t, z):
        y, Y = z[:d], z[d:].reshape(d, d)
        return np.concatenate([f(t, y), (_rhs_jacobian(f, t, y) @ Y).ravel()])

    z0 = np.concatenate([y0, np.eye(d).ravel()])
    z1, _ = flow_map(g, tau0, tau1, z0, cfg)
    return z1[d:].reshape(d, d)


def fd_flow_jacobian(f: Callable, tau0: float, tau1: float, y0, step: float,
                     cfg: IntegratorConfig = IntegratorConfig(), grid=None):
    """Central-difference flow Jacobian on a frozen step grid (computed from y0 when not given)."""
    y0 = np.asarray(y0, dtype=float)
    heun = tau1 == 0.0
    if grid is None:
        _, grid = flow_map(f, tau0, tau1, y0, cfg)
    d = len(y0)
    J = np.empty((d, d))
    for j in range(d):
        e = np.zeros(d)
        e[j] = step
        J[:, j] = (replay(f, grid, y0 + e, heun) - replay(f, grid, y0 - e, heun)) / (2 * step)
    return J


def flow_c1_check(f: Callable, tau0: float, tau1: float, base_state,
                  cfg: IntegratorConfig = IntegratorConfig(), steps=(1e-4, 5e-5, 2.5e-5)) -> dict:
    """Divided-difference flow Jacobians against the variational system.

    Divided differences replay one frozen step grid, so they measure the
    derivative of a single smooth discrete map and converge at order 2.
    """
    base_state = np.asarray(base_state, dtype=float)
    _, grid = flow_map(f, tau0, tau1, base_state, cfg)
    fds = [fd_flow_jacobian(f, tau0, tau1, base_state, h, cfg, grid) for h in steps]
    var = variational_jacobian(f, tau0, tau1, base_state, cfg)
    diffs = [float(np.max(np.abs(fds[i] - fds[i + 1]))) for i in range(len(fds) - 1)]
    order = [math.log2(diffs[i] / diffs[i + 1]) if diffs[i + 1] > 0 else math.inf for i in range(len(diffs) - 1)]
    return {
        "fd_jacobians": fds,
        "variational": var,
        "discrepancy": float(np.max(np.abs(fds[-1] - var))),
        "refinement_diffs": diffs,
        "observed_order": order,
    }
