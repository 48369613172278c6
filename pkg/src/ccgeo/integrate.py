"""Adaptive integration of the arclength flow and the boundary-regular tau system.

Both parametrizations share one Dormand-Prince 5(4) core with PI step
control, exact output points, a terminating event located by bisection,
and a post-step check that classifies how a run ended.

Trajectory CSV columns (fixed order):

* tau:       ``tau, x1..xn, w0, w1..wn, rho, energy``
* arclength: ``t, x0..xn, xi0..xin, rho, energy``
"""
from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from . import kernels as K
from .chart import BoundaryPoint, FermiChart, cotangent_energy, tau_energy
from .errors import CCGeoError, DomainError, InboundRegimeError
from .systems import CotangentState, TauState, cotangent_rhs, tau_rhs

REACHED_BOUNDARY = "reached_boundary"
LEFT_CHART = "left_chart"
LEFT_INBOUND = "left_inbound_regime"
STEP_FAILURE = "step_failure"
REACHED_HANDOFF = "reached_handoff"
REACHED_END = "reached_end"

EVENT_TOL = 1e-12


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_steps: int = 1_000_000
    tau_min: float = 1e-12
    initial_step: float = 1e-6
    record_stride: int = 1
    x_stop: Optional[float] = None  # handoff depth; None means 1e-3 * delta
    w_min: float = 1e-3
    max_step: float = math.inf

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise DomainError("tolerances must be positive")
        if not 0 < self.tau_min < self.initial_step:
            raise DomainError("need 0 < tau_min < initial_step")
        if self.max_steps < 1 or self.record_stride < 1:
            raise DomainError("max_steps and record_stride must be positive")
        if self.x_stop is not None and not self.x_stop > 0:
            raise DomainError("x_stop must be positive")

    def handoff_depth(self, chart: FermiChart) -> float:
        return 1e-3 * chart.delta if self.x_stop is None else self.x_stop

    def with_overrides(self, **kw) -> "IntegratorConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


@dataclass
class Trajectory:
    parameter_kind: str  # "arclength" or "tau"
    params: np.ndarray
    states: np.ndarray
    termination: str
    chart_id: str
    message: str = ""
    chart: Optional[FermiChart] = field(default=None, repr=False)

    def __len__(self):
        return len(self.params)

    @property
    def samples(self):
        return list(zip(self.params.tolist(), self.states))

    @property
    def n(self) -> int:
        d = self.states.shape[1]
        return (d - 1) // 2 if self.parameter_kind == "tau" else d // 2 - 1

    def final_state(self):
        if self.parameter_kind == "tau":
            return TauState.from_vector(self.params[-1], self.states[-1])
        return CotangentState.from_vector(self.params[-1], self.states[-1])

    def x_prime(self) -> np.ndarray:
        n = self.n
        if self.parameter_kind == "tau":
            return self.states[:, :n]
        return self.states[:, 1 : n + 1]

    def x0(self) -> np.ndarray:
        return self.params.copy() if self.parameter_kind == "tau" else self.states[:, 0].copy()

    def rho(self) -> np.ndarray:
        x0, xp = self.x0(), self.x_prime()
        return np.array([float(self.chart.rho(a, b)) for a, b in zip(x0, xp)])

    def energies(self) -> np.ndarray:
        c, n = self.chart, self.n
        if self.parameter_kind == "tau":
            return np.array(
                [tau_energy(c, t, y[:n], y[n], y[n + 1 :]) for t, y in zip(self.params, self.states)]
            )
        return np.array([cotangent_energy(c, y[0], y[1 : n + 1], y[n + 1 :]) for y in self.states])

    def columns(self) -> list:
        n = self.n
        if self.parameter_kind == "tau":
            return ["tau", *[f"x{i}" for i in range(1, n + 1)], "w0", *[f"w{i}" for i in range(1, n + 1)], "rho", "energy"]
        return ["t", *[f"x{i}" for i in range(n + 1)], *[f"xi{i}" for i in range(n + 1)], "rho", "energy"]

    def table(self) -> np.ndarray:
        return np.column_stack([self.params, self.states, self.rho(), self.energies()])

    def to_csv(self, path: str) -> None:
        header = ",".join(self.columns())
        meta = f"# chart={self.chart_id} kind={self.parameter_kind} termination={self.termination}\n"
        body = "\n".join(",".join(f"{v:.17g}" for v in row) for row in self.table())
        atomic_write(path, meta + header + "\n" + body + "\n")

    def to_json(self) -> dict:
        return {
            "chart_id": self.chart_id,
            "parameter_kind": self.parameter_kind,
            "termination": self.termination,
            "message": self.message,
            "columns": self.columns(),
            "rows": self.table().tolist(),
        }


def atomic_write(path: str, text: str) -> None:
    """Write via a temporary file in the target directory, then rename."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: str, payload) -> None:
    atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Dormand-Prince core


def _dp_step(f, t, y, h, k1):
    k2 = f(t + K.C2 * h, y + h * (K.A21 * k1))
    k3 = f(t + K.C3 * h, y + h * (K.A31 * k1 + K.A32 * k2))
    k4 = f(t + K.C4 * h, y + h * (K.A41 * k1 + K.A42 * k2 + K.A43 * k3))
    k5 = f(t + K.C5 * h, y + h * (K.A51 * k1 + K.A52 * k2 + K.A53 * k3 + K.A54 * k4))
    k6 = f(t + h, y + h * (K.A61 * k1 + K.A62 * k2 + K.A63 * k3 + K.A64 * k4 + K.A65 * k5))
    ynew = y + h * (K.B1 * k1 + K.B3 * k3 + K.B4 * k4 + K.B5 * k5 + K.B6 * k6)
    k7 = f(t + h, ynew)
    err = h * (K.E1 * k1 + K.E3 * k3 + K.E4 * k4 + K.E5 * k5 + K.E6 * k6 + K.E7 * k7)
    return ynew, k7, err


def _heun(f, t, y, h):
    k1 = f(t, y)
    k2 = f(t + h, y + h * k1)
    return y + 0.5 * h * (k1 + k2)


def _classify(exc: Exception) -> str:
    if isinstance(exc, InboundRegimeError):
        return LEFT_INBOUND
    if isinstance(exc, DomainError):
        return LEFT_CHART
    return STEP_FAILURE


@dataclass
class _Run:
    ts: list
    ys: list
    status: Optional[str] = None
    message: str = ""


def dp45(
    f: Callable,
    t0: float,
    y0: np.ndarray,
    t_end: float,
    cfg: IntegratorConfig,
    h0: float,
    check: Optional[Callable] = None,
    event: Optional[Callable] = None,
    eval_points: Sequence[float] = (),
) -> _Run:
    """Integrate y' = f(t, y) from t0 toward t_end.

    ``check(t, y)`` may return a termination label after each accepted step.
    ``event(t, y)`` terminates the run where it first becomes >= 0.
    Points in ``eval_points`` are hit exactly and always recorded.
    """
    y = np.array(y0, dtype=float)
    t = float(t0)
    run = _Run([t], [y.copy()])
    if t == t_end:
        return run
    direction = 1.0 if t_end > t else -1.0
    pts = sorted((p for p in eval_points if direction * (p - t) > 0 and direction * (t_end - p) > 0),
                 key=lambda p: direction * p)
    pts.append(t_end)
    ip = 0
    try:
        k1 = f(t, y)
    except CCGeoError as exc:
        run.status, run.message = _classify(exc), str(exc)
        return run
    h = direction * min(abs(h0), cfg.max_step)
    err_old = 1e-4
    accepted = 0
    attempts = 0
    rtol, atol = cfg.rel_tol, cfg.abs_tol
    while True:
        attempts += 1
        if attempts > cfg.max_steps:
            run.status, run.message = STEP_FAILURE, "max_steps exceeded"
            return run
        h = direction * min(abs(h), cfg.max_step)
        target = pts[ip]
        h_try = h
        hit = direction * (t + h - target) >= 0
        if hit:
            h = target - t
        try:
            ynew, k7, errv = _dp_step(f, t, y, h, k1)
            if not np.all(np.isfinite(ynew)):
                raise FloatingPointError
        except (CCGeoError, FloatingPointError, np.linalg.LinAlgError) as exc:
            h = 0.5 * h
            if abs(h) < 16 * np.spacing(abs(t)) + 1e-300:
                run.status, run.message = (_classify(exc) if isinstance(exc, CCGeoError) else STEP_FAILURE), str(exc)
                return run
            continue
        sc = atol + rtol * np.maximum(np.abs(y), np.abs(ynew))
        err = math.sqrt(np.mean((errv / sc) ** 2))
        if err > 1.0:
            h = h * max(0.2, 0.9 * err ** (-0.2))
            if abs(h) < 16 * np.spacing(abs(t)) + 1e-300:
                run.status, run.message = STEP_FAILURE, f"step size underflow at t={t}"
                return run
            continue

        t_new = target if hit else t + h
        if event is not None and event(t_new, ynew) >= 0:
            t_ev, y_ev = _locate_event(f, event, t, y, h, k1)
            run.ts.append(t_ev)
            run.ys.append(y_ev)
            run.status = REACHED_HANDOFF
            return run
        t, y, k1 = t_new, ynew, k7
        accepted += 1
        if hit or accepted % cfg.record_stride == 0:
            run.ts.append(t)
            run.ys.append(y.copy())
        if check is not None:
            label = check(t, y)
            if label is not None:
                if run.ts[-1] != t:
                    run.ts.append(t)
                    run.ys.append(y.copy())
                run.status = label
                return run
        if hit:
            ip += 1
            if ip == len(pts):
                return run
        fac = 0.9 * max(err, 1e-10) ** (-0.17) * err_old**0.04
        fac = min(5.0, max(0.2, fac))
        err_old = max(err, 1e-4)
        h = h * fac
        if hit and abs(h_try) > abs(h):
            h = h_try


def _locate_event(f, event, t, y, h, k1):
    lo, hi = 0.0, 1.0
    y_hi = None
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        ym, _, _ = _dp_step(f, t, y, mid * h, k1)
        g = event(t + mid * h, ym)
        if g >= 0:
            hi, y_hi = mid, ym
            if g <= EVENT_TOL:
                break
        else:
            lo = mid
            if -g <= EVENT_TOL:
                hi, y_hi = mid, ym
                break
        if (hi - lo) * abs(h) < 4 * np.spacing(abs(t) + abs(h)):
            break
    if y_hi is None:
        y_hi, _, _ = _dp_step(f, t, y, hi * h, k1)
    return t + hi * h, y_hi


# ---------------------------------------------------------------------------
# arclength flow


def integrate_t(chart: FermiChart, s0: CotangentState, t_max: float, cfg: IntegratorConfig = IntegratorConfig(),
                handoff: bool = True, eval_points: Sequence[float] = ()) -> Trajectory:
    """Arclength flow until t_max, the handoff depth x0 >= -x_stop, or chart exit."""
    y0 = s0.as_vector()
    d = chart.dim
    if not -chart.depth <= y0[0] < 0:
        raise DomainError(f"integrate_t needs an interior start with -{chart.depth:g} <= x0 < 0")
    drift = abs(cotangent_energy(chart, y0[0], y0[1:d], y0[d:]) - 1.0)
    if drift > 1e-8:
        raise DomainError(f"initial state is off the unit energy surface by {drift:.3e}")
    x_stop = cfg.handoff_depth(chart)
    if handoff and y0[0] >= -x_stop:
        raise DomainError("start point already lies inside the handoff layer")

    def check(t, y):
        if not chart.in_box(y[1:d]) or y[0] < -chart.depth:
            return LEFT_CHART
        return None

    event = (lambda t, y: y[0] + x_stop) if handoff else None
    run = dp45(lambda t, y: cotangent_rhs(chart, y), s0.t, y0, s0.t + t_max, cfg,
               h0=cfg.initial_step, check=check, event=event, eval_points=eval_points)
    status = run.status or REACHED_END
    return Trajectory("arclength", np.array(run.ts), np.array(run.ys), status, chart.chart_id, run.message, chart)


# ---------------------------------------------------------------------------
# tau system


def _tau_check(chart, cfg):
    n = chart.n

    def check(t, y):
        if not chart.in_box(y[:n]):
            return LEFT_CHART
        if y[n] <= cfg.w_min:
            return LEFT_INBOUND
        return None

    return check


def _tau_f(chart):
    return lambda t, y: tau_rhs(chart, t, y)


def integrate_tau_to_boundary(chart: FermiChart, s0: TauState, cfg: IntegratorConfig = IntegratorConfig(),
                              eval_points: Sequence[float] = ()) -> Trajectory:
    """Integrate the tau system from s0.tau < 0 up to tau = 0.

    Adaptivity stops at -tau_min; one Heun step with the continuous-extension
    right-hand side closes the gap, so the last sample has tau = 0 exactly.
    """
    if not s0.tau < 0:
        raise DomainError("integrate_tau_to_boundary needs tau < 0")
    if not s0.w0 > 0:
        raise InboundRegimeError(f"w0 = {s0.w0} is not positive")
    f = _tau_f(chart)
    y0 = s0.as_vector()
    ts, ys = [s0.tau], [y0]
    status, msg = None, ""
    if s0.tau < -cfg.tau_min:
        h0 = min(cfg.initial_step, 0.5 * abs(s0.tau))
        run = dp45(f, s0.tau, y0, -cfg.tau_min, cfg, h0=h0, check=_tau_check(chart, cfg),
                   eval_points=[p for p in eval_points if p < -cfg.tau_min])
        ts, ys, status, msg = run.ts, run.ys, run.status, run.message
    if status is None:
        try:
            y_end = _heun(f, ts[-1], ys[-1], -ts[-1])
            ts.append(0.0)
            ys.append(y_end)
            status = REACHED_BOUNDARY
            if not chart.in_box(y_end[: chart.n]):
                status = LEFT_CHART
        except CCGeoError as exc:
            status, msg = _classify(exc), str(exc)
    return Trajectory("tau", np.array(ts), np.array(ys), status, chart.chart_id, msg, chart)


def integrate_tau_from_boundary(chart: FermiChart, q, w_init, tau_end: float,
                                cfg: IntegratorConfig = IntegratorConfig(),
                                eval_points: Sequence[float] = ()) -> Trajectory:
    """Integrate the tau system from (0, q, w0=1, w_init) into the interior down to tau_end."""
    xp = np.atleast_1d(np.asarray(q.x_prime if isinstance(q, BoundaryPoint) else q, dtype=float))
    n = chart.n
    if xp.shape != (n,):
        raise DomainError(f"boundary point needs {n} coordinates")
    if not chart.in_box(xp):
        raise DomainError(f"boundary point {xp} lies outside the chart box")
    if not -chart.delta <= tau_end < 0:
        raise DomainError(f"tau_end must lie in [-delta, 0), got {tau_end}")
    w_init = np.atleast_1d(np.asarray(w_init, dtype=float))
    y0 = np.concatenate([xp, [1.0], w_init])
    f = _tau_f(chart)
    h1 = -cfg.initial_step * 1e-4
    try:
        y1 = _heun(f, 0.0, y0, max(h1, tau_end))
    except CCGeoError as exc:
        return Trajectory("tau", np.array([0.0]), y0[None, :], _classify(exc), chart.chart_id, str(exc), chart)
    t1 = max(h1, tau_end)
    if t1 == tau_end:
        return Trajectory("tau", np.array([0.0, t1]), np.array([y0, y1]), REACHED_END, chart.chart_id, "", chart)
    run = dp45(f, t1, y1, tau_end, cfg, h0=cfg.initial_step, check=_tau_check(chart, cfg),
               eval_points=[p for p in eval_points if tau_end < p < t1])
    ts = [0.0] + run.ts
    ys = [y0] + run.ys
    return Trajectory("tau", np.array(ts), np.array(ys), run.status or REACHED_END, chart.chart_id, run.message, chart)
