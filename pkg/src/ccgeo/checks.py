"""Invariant battery behind the ``check`` subcommand.

Each check returns rows ``{chart, name, value, tol, passed}``; a chart that
fails its integrity scan is reported once and skipped.
"""
from __future__ import annotations

import math
from typing import Iterable, Optional

import numpy as np

from .asymptotics import (
    boundary_samples,
    fit_expansion,
    flow_c1_check,
    flow_lipschitz_check,
    is_asymptotically_hyperbolic,
    lipschitz_estimate,
    obstruction,
    tau_system,
)
from .chart import FermiChart, E_remainder, kappa, sample_grid, validate_chart
from .errors import CCGeoError, ChartIntegrityError
from .examples import EpsilonFamily, make_epsilon_chart, make_warped_ah_chart
from .integrate import REACHED_BOUNDARY, IntegratorConfig, integrate_t, integrate_tau_to_boundary
from .shoot import boundary_shoot, rho_decay_rate
from .systems import cotangent_rhs, from_tau_state, to_tau_state, unit_cotangent


def default_charts():
    return [
        make_epsilon_chart(EpsilonFamily(0.0)),
        make_epsilon_chart(EpsilonFamily(0.5)),
        make_epsilon_chart(EpsilonFamily(1.0)),
        make_epsilon_chart(EpsilonFamily(1.0, rho_quad=1.0)),
        make_warped_ah_chart(),
    ]


def _row(chart, name, value, tol, passed):
    return {"chart": chart.chart_id, "name": name, "value": float(value), "tol": float(tol), "passed": bool(passed)}


def random_states(chart: FermiChart, count: int, rng, x0_range=(0.7, 0.1)):
    """Unit cotangent states at random interior points with inbound random directions."""
    out = []
    lo, hi = chart.x_box[:, 0], chart.x_box[:, 1]
    mid, half = 0.5 * (lo + hi), 0.25 * (hi - lo)
    for _ in range(count):
        x0 = -chart.delta * rng.uniform(x0_range[1], x0_range[0])
        xp = rng.uniform(mid - half, mid + half)
        v = rng.normal(size=chart.dim)
        v[0] = abs(v[0]) + 0.2
        out.append(unit_cotangent(chart, np.concatenate([[x0], xp]), v))
    return out


def hamiltonian_derivative(chart: FermiChart, y: np.ndarray) -> float:
    """d(2H)/dt along the arclength right-hand side, from the analytic gradient of 2H."""
    d, n = chart.dim, chart.n
    x0, xp, xi0, xa = y[0], y[1:d], y[d], y[d + 1 :]
    r = float(chart.rho(x0, xp))
    r0 = float(chart.drho0(x0, xp))
    rp = np.asarray(chart.drhop(x0, xp), float)
    h = chart.h(x0, xp)
    v = np.linalg.solve(h, xa)
    Q = xi0 * xi0 + xa @ v
    dhp = np.asarray(chart.dhp(x0, xp)).reshape(n, n, n)
    grad = np.empty(2 * d)
    grad[0] = 2 * r * r0 * Q - r * r * (v @ chart.dh0(x0, xp) @ v)
    grad[1:d] = 2 * r * rp * Q - r * r * np.einsum("gab,a,b->g", dhp, v, v)
    grad[d] = 2 * r * r * xi0
    grad[d + 1 :] = 2 * r * r * v
    return float(grad @ cotangent_rhs(chart, y))


def chart_checks(chart: FermiChart, rng, cfg: IntegratorConfig, heavy: bool = True) -> list:
    rows = []
    try:
        rep = validate_chart(chart)
    except ChartIntegrityError as exc:
        return [{"chart": chart.chart_id, "name": "chart_integrity", "value": float("nan"), "tol": 0.0,
                 "passed": False, "detail": str(exc)}]
    rows.append(_row(chart, "chart_integrity_ML_minus_I", rep["max_ML_minus_I"], 1e-12, rep["max_ML_minus_I"] <= 1e-12))
    rows.append(_row(chart, "rho_over_kappa_x_deviation", rep["rho_over_kappa_x_deviation"], 1e-4,
                     rep["rho_over_kappa_x_deviation"] <= 1e-4))

    # E bounded and stable when the extrapolation cutoff is halved
    x0s, xps = sample_grid(chart, 10)
    worst, emax = 0.0, 0.0
    for x0 in list(x0s) + [-1e-6, 0.0]:
        for xp in xps[:: max(1, len(xps) // 10)]:
            e1 = E_remainder(chart, np.concatenate([[x0], xp]))
            e2 = E_remainder(chart, np.concatenate([[x0], xp]), e_cut=5e-5)
            emax = max(emax, float(np.max(np.abs(e1))))
            # E vanishing analytically leaves cancellation noise; floor the scale
            worst = max(worst, float(np.max(np.abs(e1 - e2)) / max(np.max(np.abs(e1)), 1e-6)))
    rows.append(_row(chart, "E_remainder_cutoff_stability", worst, 1e-3, math.isfinite(emax) and worst <= 1e-3))

    states = random_states(chart, 10, rng)
    rt = 0.0
    ham = 0.0
    for s in states:
        back = from_tau_state(chart, to_tau_state(chart, s))
        rt = max(rt, float(np.max(np.abs(back.xi - s.xi) / (1 + np.abs(s.xi)))))
        ham = max(ham, abs(hamiltonian_derivative(chart, s.as_vector())))
    rows.append(_row(chart, "tau_state_round_trip", rt, 1e-13, rt <= 1e-13))
    rows.append(_row(chart, "hamiltonian_conservation_rhs", ham, 1e-12, ham <= 1e-12))

    # ladder equivalence plus zeta0 -> 1 on a single geodesic
    s0 = states[0]
    t_cfg = cfg.with_overrides(x_stop=1e-5 * chart.delta)
    tt = integrate_t(chart, s0, 1000.0, t_cfg)
    d = chart.dim
    x0s_t = tt.states[:, 0]
    tau_tr = integrate_tau_to_boundary(chart, to_tau_state(chart, s0), cfg, eval_points=x0s_t[1:])
    lookup = {t: y for t, y in zip(tau_tr.params, tau_tr.states)}
    gap = max(float(np.max(np.abs(lookup[t][: chart.n] - y[1:d]))) for t, y in zip(x0s_t[1:], tt.states[1:])
              if t in lookup)
    rows.append(_row(chart, "ladder_equivalence_sup", gap, 1e-7, gap <= 1e-7))
    en = float(np.max(np.abs(tau_tr.energies() - 1.0)))
    rows.append(_row(chart, "tau_energy_drift", en, 1e-9, en <= 1e-9 and tau_tr.termination == REACHED_BOUNDARY))
    rhos = np.array([float(chart.rho(y[0], y[1:d])) for y in tt.states])
    zeta = rhos * tt.states[:, d]
    deep = zeta[rhos < 1e-4]
    zmin = float(deep.min()) if deep.size else float("nan")
    rows.append(_row(chart, "zeta0_limit", 1.0 - zmin, 1e-3, deep.size > 0 and 1.0 - zmin < 1e-3))

    # boundary shot: energy and obstruction recovery
    q = 0.5 * (chart.x_box[:, 0] + chart.x_box[:, 1])
    bs = boundary_shoot(chart, q, np.zeros(chart.n), -0.1, cfg)
    en = float(np.max(np.abs(bs.energies() - 1.0)))
    rows.append(_row(chart, "boundary_shot_energy_drift", en, 1e-9, en <= 1e-9))
    fit = fit_expansion(bs)
    obs = obstruction(chart, q)
    err = float(np.max(np.abs(fit.O_fit - obs)))
    tol = max(0.02 * float(np.max(np.abs(obs))), 5e-3)
    rows.append(_row(chart, "obstruction_fit", err, tol, err <= tol))
    ah, sup = is_asymptotically_hyperbolic(chart, boundary_samples(chart))
    rows.append(_row(chart, "sup_obstruction", sup, 0.0, True))

    # rho decay on the deep arclength run, where rho / |x0| has settled to kappa
    try:
        deep_t = tt.params[rhos <= 1e-3]
        slope = rho_decay_rate(chart, tt, window=(deep_t[0], tt.params[-1]))
        k_end = kappa(chart, tt.states[-1, 1:d])
        rel = abs(slope + k_end) / k_end
        rows.append(_row(chart, "rho_decay_rate", rel, 1e-2, rel <= 1e-2))
    except (CCGeoError, IndexError) as exc:
        rows.append({"chart": chart.chart_id, "name": "rho_decay_rate", "value": float("nan"), "tol": 1e-2,
                     "passed": False, "detail": str(exc)})

    if heavy and not ah:
        rows += appendix_checks(chart, rng, cfg)
    return rows


def appendix_checks(chart: FermiChart, rng, cfg: IntegratorConfig) -> list:
    n = chart.n
    f = tau_system(chart)
    mid = 0.5 * (chart.x_box[:, 0] + chart.x_box[:, 1])
    lo = np.concatenate([mid - 0.5, [0.8], np.zeros(n)])
    hi = np.concatenate([mid + 0.5, [1.2], np.ones(n)])
    C = lipschitz_estimate(f, [-0.5, 0.0], lo, hi, 1000, rng=rng)
    L = 0.5 / C
    pairs = [(rng.uniform(lo, hi), rng.uniform(lo, hi)) for _ in range(20)]
    rep = flow_lipschitz_check(f, -L, L, pairs, cfg)
    rows = [_row(chart, "appendix_lipschitz_ratio", rep["max_ratio"], math.e, rep["bound_ok"])]
    base = np.concatenate([mid, [1.0], 0.5 * np.ones(n)])
    c1 = flow_c1_check(f, -0.5, 0.0, base, cfg)
    rows.append(_row(chart, "appendix_c1_discrepancy", c1["discrepancy"], 1e-5, c1["discrepancy"] <= 1e-5))
    return rows


def run_battery(charts: Optional[Iterable[FermiChart]] = None, seed: int = 0,
                cfg: IntegratorConfig = IntegratorConfig(), heavy: bool = True) -> list:
    rng = np.random.default_rng(seed)
    rows = []
    for chart in default_charts() if charts is None else charts:
        rows += chart_checks(chart, rng, cfg, heavy)
    return rows


def format_table(rows) -> str:
    lines = [f"{'chart':<16} {'invariant':<32} {'value':>12} {'tol':>10}  result"]
    for r in rows:
        lines.append(f"{r['chart']:<16} {r['name']:<32} {r['value']:>12.3e} {r['tol']:>10.1e}  "
                     f"{'PASS' if r['passed'] else 'FAIL'}")
    return "\n".join(lines)
