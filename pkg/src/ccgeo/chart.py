"""Fermi-form metric charts and the boundary quantities derived from them.

A chart describes g = rho**-2 h near the boundary in Fermi coordinates
(x0, x'), x0 <= 0, with h = dx0**2 + h_ab(x0, x') dx^a dx^b.  Providers
supply the tangential block h_ab, rho and their first partials analytically;
everything else (kappa, the integrating factor M, the log shift A, the
remainder E) is computed here.
"""
from __future__ import annotations

import math
import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import kernels
from .errors import ChartIntegrityError, DomainError, NumericError

MatrixFn = Callable[[float, np.ndarray], np.ndarray]
ScalarFn = Callable[[float, np.ndarray], float]

E_CUT = 1e-4
MU_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class FermiChart:
    """Metric provider in Fermi form.

    ``h``, ``dh0`` return the n x n tangential block and its x0-derivative;
    ``dhp`` returns an (n, n, n) array whose leading index is the tangential
    derivative direction.  ``rho``, ``drho0`` and ``drhop`` give the defining
    function and its partials.  ``x_box`` is an (n, 2) array of coordinate
    bounds for x'; the collar is ``-delta <= x0 <= 0``.  ``depth`` bounds the
    region in which arclength flows may roam (defaults to ``delta``).

    Optional hooks let a provider hand over closed forms: ``kappa_grad`` and
    ``kappa_hess`` (derivatives of kappa along the boundary) and ``mu``
    (the integrating-factor exponent).  ``flat_normal`` declares that
    ``dh0`` vanishes identically.
    """

    dim: int
    h: MatrixFn
    dh0: MatrixFn
    dhp: Callable[[float, np.ndarray], np.ndarray]
    rho: ScalarFn
    drho0: ScalarFn
    drhop: MatrixFn
    delta: float
    x_box: np.ndarray
    chart_id: str = "chart"
    depth: Optional[float] = None
    kappa_grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    kappa_hess: Optional[Callable[[np.ndarray], np.ndarray]] = None
    mu: Optional[MatrixFn] = None
    flat_normal: bool = False
    params: dict = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        if self.dim < 2:
            raise DomainError("chart dimension must be at least 2")
        if not 0.0 < self.delta < 1.0:
            raise DomainError(f"collar depth delta must lie in (0, 1), got {self.delta}")
        box = np.asarray(self.x_box, dtype=float).reshape(self.dim - 1, 2)
        object.__setattr__(self, "x_box", box)
        if self.depth is None:
            object.__setattr__(self, "depth", self.delta)
        self._cache["lock"] = threading.Lock()
        self._cache["mu"] = OrderedDict()

    @property
    def n(self) -> int:
        return self.dim - 1

    @property
    def box_width(self) -> np.ndarray:
        return self.x_box[:, 1] - self.x_box[:, 0]

    def in_box(self, xp) -> bool:
        xp = np.asarray(xp, dtype=float)
        return bool(np.all(xp >= self.x_box[:, 0]) and np.all(xp <= self.x_box[:, 1]))

    def fd_steps(self) -> np.ndarray:
        return 1e-5 * self.box_width


@dataclass(frozen=True)
class BoundaryPoint:
    x_prime: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x_prime", np.atleast_1d(np.asarray(self.x_prime, dtype=float)))


def split_point(p):
    p = np.asarray(p, dtype=float).ravel()
    return float(p[0]), p[1:].copy()


def _check_xp(chart: FermiChart, xp) -> np.ndarray:
    xp = np.atleast_1d(np.asarray(xp, dtype=float))
    if xp.shape != (chart.n,):
        raise DomainError(f"expected {chart.n} boundary coordinates, got shape {xp.shape}")
    if not chart.in_box(xp):
        raise DomainError(f"boundary coordinates {xp} outside chart box {chart.x_box.tolist()}")
    return xp


def _check_point(chart: FermiChart, x0: float, xp) -> np.ndarray:
    xp = _check_xp(chart, xp)
    if x0 > 0.0 or x0 < -chart.delta * (1 + 1e-12):
        raise DomainError(f"x0 = {x0} outside the collar [-{chart.delta}, 0]")
    return xp


# ---------------------------------------------------------------------------
# kappa and its boundary derivatives


def kappa(chart: FermiChart, x_prime) -> float:
    """kappa(x') = -d rho/d x0 at the boundary (equal to |d rho|_h there)."""
    xp = _check_xp(chart, x_prime)
    return _kappa(chart, xp)


def _kappa(chart, xp):
    return -float(chart.drho0(0.0, xp))


def kappa_gradient(chart: FermiChart, x_prime) -> np.ndarray:
    """Covector kappa_a; central differences unless the chart supplies it."""
    xp = np.atleast_1d(np.asarray(x_prime, dtype=float))
    if chart.kappa_grad is not None:
        return np.asarray(chart.kappa_grad(xp), dtype=float).reshape(chart.n)
    steps = chart.fd_steps()
    grad = np.empty(chart.n)
    for a in range(chart.n):
        e = np.zeros(chart.n)
        e[a] = steps[a]
        grad[a] = (_kappa(chart, xp + e) - _kappa(chart, xp - e)) / (2 * steps[a])
    return grad


def kappa_hessian(chart: FermiChart, x_prime) -> np.ndarray:
    xp = np.atleast_1d(np.asarray(x_prime, dtype=float))
    if chart.kappa_hess is not None:
        return np.asarray(chart.kappa_hess(xp), dtype=float).reshape(chart.n, chart.n)
    steps = chart.fd_steps()
    hess = np.empty((chart.n, chart.n))
    for a in range(chart.n):
        e = np.zeros(chart.n)
        e[a] = steps[a]
        hess[a] = (kappa_gradient(chart, xp + e) - kappa_gradient(chart, xp - e)) / (2 * steps[a])
    return 0.5 * (hess + hess.T)


def kappa_raised(chart: FermiChart, x_prime) -> np.ndarray:
    """kappa^a = h^{ab}(0, x') kappa_b."""
    xp = np.atleast_1d(np.asarray(x_prime, dtype=float))
    return np.linalg.solve(chart.h(0.0, xp), kappa_gradient(chart, xp))


def log_shift_coefficient(chart: FermiChart, xp) -> np.ndarray:
    """a^a(x') = kappa^a / kappa**2, the coefficient of log|x0| / w0 in A."""
    xp = np.atleast_1d(np.asarray(xp, dtype=float))
    k = _kappa(chart, xp)
    return kappa_raised(chart, xp) / (k * k)


def log_shift_coefficient_grad(chart: FermiChart, xp) -> np.ndarray:
    """d a^a / d x^l as an (n, n) array indexed [l, a]."""
    xp = np.atleast_1d(np.asarray(xp, dtype=float))
    n = chart.n
    if chart.kappa_grad is not None and chart.kappa_hess is not None:
        # differentiate a = h0^{-1} grad(kappa) / kappa^2 with h0 varied by FD only
        k = _kappa(chart, xp)
        g = kappa_gradient(chart, xp)
        hess = kappa_hessian(chart, xp)
        h0 = chart.h(0.0, xp)
        h0inv = np.linalg.inv(h0)
        dh = np.asarray(chart.dhp(0.0, xp)).reshape(n, n, n)
        out = np.empty((n, n))
        for l in range(n):
            dinv = -h0inv @ dh[l] @ h0inv
            up = h0inv @ g
            out[l] = (dinv @ g + h0inv @ hess[l]) / (k * k) - 2.0 * up * g[l] / k**3
        return out
    steps = chart.fd_steps()
    out = np.empty((n, n))
    for l in range(n):
        e = np.zeros(n)
        e[l] = steps[l]
        out[l] = (
            log_shift_coefficient(chart, xp + e) - log_shift_coefficient(chart, xp - e)
        ) / (2 * steps[l])
    return out


def k_covector(chart: FermiChart, p) -> np.ndarray:
    """k_a = rho_a / rho inside, kappa_a / kappa on the boundary."""
    x0, xp = split_point(p)
    xp = _check_point(chart, x0, xp)
    return _k(chart, x0, xp)


def _k(chart, x0, xp):
    if x0 == 0.0:
        return kappa_gradient(chart, xp) / _kappa(chart, xp)
    r = float(chart.rho(x0, xp))
    if not r > 0.0:
        raise ChartIntegrityError(f"rho = {r} is not positive at interior point x0={x0}, x'={xp}")
    return np.asarray(chart.drhop(x0, xp), dtype=float) / r


# ---------------------------------------------------------------------------
# integrating factor


def _normal_shape_operator(chart, x0, xp):
    # S = h^{-1} d0 h, which equals -h_{bc} d0 h^{ab}
    h = chart.h(x0, xp)
    return np.linalg.solve(h, chart.dh0(x0, xp))


def adaptive_simpson(f, a: float, b: float, rtol: float = MU_RTOL, max_depth: int = 50):
    """Adaptive Simpson quadrature of an array-valued integrand on [a, b]."""
    if a == b:
        return np.zeros_like(np.asarray(f(a), dtype=float))
    fa, fb = np.asarray(f(a), float), np.asarray(f(b), float)
    m = 0.5 * (a + b)
    fm = np.asarray(f(m), float)
    whole = (b - a) / 6.0 * (fa + 4 * fm + fb)
    scale = max(float(np.max(np.abs(whole))), 1e-300)
    floor = 1e-15 * abs(b - a)

    def rec(a, b, fa, fm, fb, whole, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = np.asarray(f(lm), float), np.asarray(f(rm), float)
        left = (m - a) / 6.0 * (fa + 4 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4 * frm + fb)
        diff = left + right - whole
        tol = max(rtol * scale, floor)
        if np.max(np.abs(diff)) <= 15.0 * tol:
            return left + right + diff / 15.0
        if depth >= max_depth:
            raise NumericError(f"adaptive Simpson failed to converge on [{a}, {b}]")
        return rec(a, m, fa, flm, fm, left, depth + 1) + rec(m, b, fm, frm, fb, right, depth + 1)

    return rec(a, b, fa, fm, fb, whole, 0)


def mu_matrix(chart: FermiChart, p) -> np.ndarray:
    """mu^a_c(x0, x') by adaptive Simpson quadrature along the normal segment."""
    x0, xp = split_point(p)
    xp = _check_point(chart, x0, xp)
    return _mu_quadrature(chart, x0, xp)


def _mu_quadrature(chart, x0, xp):
    return adaptive_simpson(lambda s: _normal_shape_operator(chart, s, xp), 0.0, x0)


def _mu(chart, x0, xp):
    n = chart.n
    if chart.flat_normal or x0 == 0.0:
        return np.zeros((n, n))
    if chart.mu is not None:
        return np.asarray(chart.mu(x0, xp), dtype=float).reshape(n, n)
    key = (x0, xp.tobytes())
    cache = chart._cache["mu"]
    with chart._cache["lock"]:
        hit = cache.get(key)
    if hit is not None:
        return hit
    val = _mu_quadrature(chart, x0, xp)
    val.setflags(write=False)
    with chart._cache["lock"]:
        cache[key] = val
        if len(cache) > 20000:
            cache.popitem(last=False)
    return val


def transport_matrices(chart: FermiChart, p):
    """(M, L) = (exp(mu), exp(-mu))."""
    x0, xp = split_point(p)
    xp = _check_point(chart, x0, xp)
    mu = _mu(chart, x0, xp)
    return kernels.expm(mu), kernels.expm(-mu)


def _transport(chart, x0, xp):
    n = chart.n
    if chart.flat_normal or x0 == 0.0:
        eye = np.eye(n)
        return eye, eye
    mu = _mu(chart, x0, xp)
    return kernels.expm(mu), kernels.expm(-mu)


# ---------------------------------------------------------------------------
# log shift, remainder, energy


def A_shift(chart: FermiChart, p, w0: float) -> np.ndarray:
    """A^a = (1/w0) (kappa^a / kappa**2) log|x0|, defined for x0 < 0."""
    x0, xp = split_point(p)
    xp = _check_point(chart, x0, xp)
    if x0 == 0.0:
        raise DomainError("A is defined only for x0 < 0")
    if not w0 > 0.0:
        raise DomainError(f"w0 must be positive, got {w0}")
    return log_shift_coefficient(chart, xp) * math.log(abs(x0)) / w0


def _E_direct(chart, x0, xp, a=None):
    r = float(chart.rho(x0, xp))
    if a is None:
        a = log_shift_coefficient(chart, xp)
    M, _ = _transport(chart, x0, xp)
    rho_up = np.linalg.solve(chart.h(x0, xp), np.asarray(chart.drhop(x0, xp), dtype=float))
    return -(M @ rho_up) / (r * r) - a / x0


def E_remainder(chart: FermiChart, p, e_cut: float = E_CUT) -> np.ndarray:
    """Smooth part E of -rho^{-1} M k once the (kappa^a/kappa^2)/x0 pole is removed."""
    x0, xp = split_point(p)
    xp = _check_point(chart, x0, xp)
    return _E(chart, x0, xp, e_cut)


def _E(chart, x0, xp, e_cut=E_CUT, a=None):
    if a is None:
        a = log_shift_coefficient(chart, xp)
    if abs(x0) >= e_cut:
        return _E_direct(chart, x0, xp, a)
    nodes = (-e_cut, -2 * e_cut, -4 * e_cut)
    vals = [_E_direct(chart, s, xp, a) for s in nodes]
    out = np.zeros(chart.n)
    for i, si in enumerate(nodes):
        li = 1.0
        for j, sj in enumerate(nodes):
            if j != i:
                li *= (x0 - sj) / (si - sj)
        out += li * vals[i]
    return out


def energy(chart: FermiChart, state) -> float:
    """2H for a CotangentState or TauState."""
    from .systems import CotangentState, TauState

    if isinstance(state, CotangentState):
        x0, xp = float(state.x[0]), np.asarray(state.x[1:], float)
        return cotangent_energy(chart, x0, xp, state.xi)
    if isinstance(state, TauState):
        return tau_energy(chart, state.tau, state.x_prime, state.w0, state.w)
    raise TypeError(f"unsupported state type {type(state).__name__}")


def cotangent_energy(chart, x0, xp, xi):
    xi = np.asarray(xi, float)
    r = float(chart.rho(x0, xp))
    xa = xi[1:]
    return r * r * (xi[0] ** 2 + xa @ np.linalg.solve(chart.h(x0, xp), xa))


def tau_energy(chart, tau, xp, w0, w):
    if tau == 0.0:
        return w0 * w0
    xp = np.asarray(xp, float)
    a = log_shift_coefficient(chart, xp)
    A = a * math.log(abs(tau)) / w0
    _, L = _transport(chart, tau, xp)
    v = L @ (np.asarray(w, float) + A)
    r = float(chart.rho(tau, xp))
    return w0 * w0 + r * r * (v @ chart.h(tau, xp) @ v)


# ---------------------------------------------------------------------------
# integrity checks


def sample_grid(chart: FermiChart, num: int = 10, x0_min: Optional[float] = None):
    """Tensor grid over the collar (x0 strictly negative) and the x' box."""
    lo = -chart.delta if x0_min is None else x0_min
    x0s = np.linspace(lo, 0.0, num + 1)[:-1]
    axes = [np.linspace(b[0], b[1], num) for b in chart.x_box]
    mesh = np.meshgrid(*axes, indexing="ij")
    xps = np.stack([m.ravel() for m in mesh], axis=1)
    return x0s, xps


def chart_report(chart: FermiChart, num: int = 10) -> dict:
    """Measured integrity quantities on a sample grid (no raising)."""
    x0s, xps = sample_grid(chart, num)
    min_eig = math.inf
    min_rho = math.inf
    max_bdry_rho = 0.0
    min_kappa = math.inf
    max_ratio_dev = 0.0
    max_ml = 0.0
    for xp in xps:
        max_bdry_rho = max(max_bdry_rho, abs(float(chart.rho(0.0, xp))))
        k = _kappa(chart, xp)
        min_kappa = min(min_kappa, k)
        r = float(chart.rho(-1e-6, xp))
        if k > 0:
            max_ratio_dev = max(max_ratio_dev, abs(r / (k * 1e-6) - 1.0))
        else:
            max_ratio_dev = math.inf
        for x0 in x0s:
            min_eig = min(min_eig, float(np.linalg.eigvalsh(chart.h(x0, xp))[0]))
            min_rho = min(min_rho, float(chart.rho(x0, xp)))
    for xp in xps[:: max(1, len(xps) // 10)]:
        for x0 in x0s[:: max(1, len(x0s) // 5)]:
            M, L = _transport(chart, x0, xp)
            max_ml = max(max_ml, float(np.max(np.abs(M @ L - np.eye(chart.n)))))
    return {
        "min_h_eigenvalue": min_eig,
        "min_interior_rho": min_rho,
        "max_boundary_rho": max_bdry_rho,
        "min_kappa": min_kappa,
        "rho_over_kappa_x_deviation": max_ratio_dev,
        "max_ML_minus_I": max_ml,
    }


def validate_chart(chart: FermiChart, num: int = 10) -> dict:
    """Raise ChartIntegrityError when any sampled chart invariant fails."""
    rep = chart_report(chart, num)
    problems = []
    if not rep["min_h_eigenvalue"] > 0:
        problems.append(f"h not positive definite (min eigenvalue {rep['min_h_eigenvalue']:.3g})")
    if not rep["min_interior_rho"] > 0:
        problems.append(f"rho not positive inside (min {rep['min_interior_rho']:.3g})")
    if rep["max_boundary_rho"] > 1e-12:
        problems.append(f"rho does not vanish on the boundary (max {rep['max_boundary_rho']:.3g})")
    if not rep["min_kappa"] > 0:
        problems.append(f"kappa not positive on the boundary (min {rep['min_kappa']:.3g})")
    if not rep["rho_over_kappa_x_deviation"] < 1e-4:
        problems.append(
            f"rho/(kappa x) deviates from 1 near the boundary ({rep['rho_over_kappa_x_deviation']:.3g})"
        )
    if rep["max_ML_minus_I"] > 1e-12:
        problems.append(f"M L differs from I by {rep['max_ML_minus_I']:.3g}")
    if problems:
        raise ChartIntegrityError(f"chart '{chart.chart_id}': " + "; ".join(problems))
    return rep
