"""Built-in charts, closed-form oracles and figure data.

The g_eps family is (dx^2 + dy^2) / (y^2 e^{2 eps x}) on the upper half
plane, put in Fermi form with x0 = -y, x1 = x, h Euclidean and
rho = y e^{eps x}.  eps = 0 is the hyperbolic half-plane.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .chart import FermiChart
from .errors import DomainError


@dataclass(frozen=True)
class EpsilonFamily:
    epsilon: float = 0.0
    delta: float = 0.9
    x_box: tuple = (-2.0, 2.0)
    # optional factor (1 - rho_quad * y) in rho; exercises a nonzero remainder E
    rho_quad: float = 0.0
    depth: float = 10.0

    def __post_init__(self):
        if self.epsilon < 0:
            raise DomainError("epsilon must be nonnegative")
        if not 0.0 < self.delta < 1.0:
            raise DomainError("delta must lie in (0, 1)")


def make_epsilon_chart(params: EpsilonFamily = EpsilonFamily()) -> FermiChart:
    eps = float(params.epsilon)
    c = float(params.rho_quad)
    depth = params.depth
    if c > 0:
        depth = min(depth, 0.5 / c)

    def rho(x0, xp):
        return -x0 * math.exp(eps * xp[0]) * (1.0 + c * x0)

    def drho0(x0, xp):
        return -math.exp(eps * xp[0]) * (1.0 + 2.0 * c * x0)

    def drhop(x0, xp):
        return np.array([eps * rho(x0, xp)])

    one = np.ones((1, 1))
    zero = np.zeros((1, 1))
    zero3 = np.zeros((1, 1, 1))
    return FermiChart(
        dim=2,
        h=lambda x0, xp: one,
        dh0=lambda x0, xp: zero,
        dhp=lambda x0, xp: zero3,
        rho=rho,
        drho0=drho0,
        drhop=drhop,
        delta=params.delta,
        x_box=np.array([params.x_box], dtype=float),
        chart_id=f"epsilon_{eps:g}" + (f"_q{c:g}" if c else ""),
        depth=depth,
        kappa_grad=lambda xp: np.array([eps * math.exp(eps * xp[0])]),
        kappa_hess=lambda xp: np.array([[eps * eps * math.exp(eps * xp[0])]]),
        flat_normal=True,
        params={"type": "epsilon_family", "epsilon": eps, "delta": params.delta,
                "x_box": list(params.x_box), "rho_quad": c},
    )


def make_hyperbolic_chart(**kwargs) -> FermiChart:
    return make_epsilon_chart(EpsilonFamily(epsilon=0.0, **kwargs))


def make_warped_ah_chart(closed_form_mu: bool = True) -> FermiChart:
    """h = dx0^2 + (1 + x0)^2 dx1^2, rho = -x0: kappa = 1 with a nontrivial integrating factor."""

    def h(x0, xp):
        return np.array([[(1.0 + x0) ** 2]])

    def dh0(x0, xp):
        return np.array([[2.0 * (1.0 + x0)]])

    mu = (lambda x0, xp: np.array([[2.0 * math.log1p(x0)]])) if closed_form_mu else None
    return FermiChart(
        dim=2,
        h=h,
        dh0=dh0,
        dhp=lambda x0, xp: np.zeros((1, 1, 1)),
        rho=lambda x0, xp: -x0,
        drho0=lambda x0, xp: -1.0,
        drhop=lambda x0, xp: np.zeros(1),
        delta=0.9,
        x_box=np.array([[-2.0, 2.0]]),
        chart_id="warped_ah",
        kappa_grad=lambda xp: np.zeros(1),
        kappa_hess=lambda xp: np.zeros((1, 1)),
        mu=mu,
        params={"type": "warped_ah"},
    )


def hyperbolic_endpoint_oracle(p, theta: float) -> float:
    """Boundary abscissa of the half-plane geodesic through p = (x, y) with tangent (sin t, -cos t)."""
    x, y = float(p[0]), float(p[1])
    if not y > 0:
        raise DomainError("the point must lie in the upper half plane")
    if not -math.pi / 2 < theta < math.pi / 2:
        raise DomainError("theta must lie in (-pi/2, pi/2)")
    return x + y * math.tan(theta / 2.0)


def direction_from_theta(theta: float) -> np.ndarray:
    """Fermi-coordinate direction (dx0, dx1) of the half-plane tangent (sin t, -cos t)."""
    return np.array([math.cos(theta), math.sin(theta)])


# ---------------------------------------------------------------------------
# figure data

FIG1_THETAS = (-math.pi / 4, -math.pi / 8, 0.0, math.pi / 8, math.pi / 4)
FIG_US = (-1.0, -0.5, 0.0, 0.5, 1.0)
DEFAULT_EPSILONS = {1: (0.0, 0.5, 1.0), 2: (0.0, 0.5, 1.0), 3: (1.0,)}


def _tag(v: float) -> str:
    return f"{v:+.4f}".replace("+", "p").replace("-", "m").replace(".", "_")


def _write_curve(path: str, meta: dict, y, x) -> None:
    from . import __version__
    from .integrate import atomic_write

    lines = [f"# {k}: {v}" for k, v in {**meta, "code_version": __version__}.items()]
    lines.append("y,x")
    lines += [f"{a:.17g},{b:.17g}" for a, b in zip(y, x)]
    atomic_write(path, "\n".join(lines) + "\n")


def figure_data(figure_id: int, epsilon_list: Optional[Sequence[float]] = None, out_dir: str = ".",
                cfg=None) -> list:
    """Write one (y, x) CSV per curve of the requested figure; returns the paths written.

    Figure 1: geodesics from (x, y) = (0, 1) with directions (sin t, -cos t).
    Figure 2: boundary shots from the origin with tau^2 coefficient u.
    Figure 3: the eps = 1 boundary shots next to -y^2 log(y) / 2 + u y^2.
    Samples are the integrator's accepted steps plus an exact geometric y-grid
    in the tau phase.
    """
    from .integrate import IntegratorConfig
    from .shoot import boundary_shoot, endpoint_map, geometric_grid

    if figure_id not in (1, 2, 3):
        raise DomainError(f"unknown figure id {figure_id}")
    cfg = IntegratorConfig() if cfg is None else cfg
    eps_list = DEFAULT_EPSILONS[figure_id] if epsilon_list is None else tuple(epsilon_list)
    if figure_id == 3:
        eps_list = (1.0,)
    os.makedirs(out_dir, exist_ok=True)
    tol_meta = {"rel_tol": cfg.rel_tol, "abs_tol": cfg.abs_tol, "tau_min": cfg.tau_min}
    written = []
    for eps in eps_list:
        chart = make_epsilon_chart(EpsilonFamily(epsilon=eps))
        if figure_id == 1:
            grid = geometric_grid(1e-4, 1.0, 20)
            for th in FIG1_THETAS:
                res = endpoint_map(chart, (-1.0, 0.0), direction_from_theta(th), cfg, tau_eval=grid)
                tt, tau = res.t_trajectory, res.trajectory
                y = np.abs(np.concatenate([tt.states[:, 0], tau.params[1:]]))
                x = np.concatenate([tt.states[:, 1], tau.states[1:, 0]])
                meta = {"figure": 1, "epsilon": eps, "theta": th, "endpoint": float(res.endpoint.x_prime[0]),
                        "termination": tau.termination, **tol_meta}
                path = os.path.join(out_dir, f"fig1_eps{_tag(eps)}_theta{_tag(th)}.csv")
                _write_curve(path, meta, y, x)
                written.append(path)
        else:
            y_hi = 0.1 if figure_id == 3 else chart.delta
            grid = geometric_grid(1e-4, y_hi, 20)
            for u in FIG_US:
                traj = boundary_shoot(chart, [0.0], [u], -y_hi, cfg, eval_points=grid)
                y, x = np.abs(traj.params), traj.states[:, 0]
                meta = {"figure": figure_id, "epsilon": eps, "u": u, "termination": traj.termination, **tol_meta}
                path = os.path.join(out_dir, f"fig{figure_id}_eps{_tag(eps)}_u{_tag(u)}.csv")
                _write_curve(path, meta, y, x)
                written.append(path)
                if figure_id == 3:
                    ya = -grid[::-1]
                    ya = np.concatenate([[0.0], ya])
                    xa = asymptote(ya, u, eps)
                    apath = os.path.join(out_dir, f"fig3_asymptote_u{_tag(u)}.csv")
                    _write_curve(apath, {"figure": 3, "epsilon": eps, "u": u, "curve": "asymptote"}, ya, xa)
                    written.append(apath)
    return written


def asymptote(y, u: float, eps: float = 1.0) -> np.ndarray:
    """-(eps/2) y^2 log y + u y^2, extended by 0 at y = 0."""
    y = np.asarray(y, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        lead = np.where(y > 0, -0.5 * eps * y * y * np.log(np.where(y > 0, y, 1.0)), 0.0)
    return lead + u * y * y
