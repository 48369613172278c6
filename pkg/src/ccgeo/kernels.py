"""Numeric kernels compiled with numba when available.

Everything here takes and returns plain floats and float64 arrays so the
same source runs under ``njit`` and under the interpreter (see ``_accel``).
"""
import math

import numpy as np

from ._accel import njit

# Dormand-Prince 5(4) tableau
C2, C3, C4, C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = (
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
)
B1, B3, B4, B5, B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
# difference between the 5th and embedded 4th order weights
E1 = 71.0 / 57600.0
E3 = -71.0 / 16695.0
E4 = 71.0 / 1920.0
E5 = -17253.0 / 339200.0
E6 = 22.0 / 525.0
E7 = -1.0 / 40.0


@njit
def expm(a):
    """Matrix exponential by scaling and squaring with a truncated Taylor series.

    The matrix is scaled by 2**-s until its 1-norm is below 0.5; the series is
    summed until the next term falls below 1e-17 relative to the partial sum,
    which keeps the truncation remainder under 1e-14 for the scaled matrix.
    """
    n = a.shape[0]
    norm = 0.0
    for j in range(n):
        col = 0.0
        for i in range(n):
            col += abs(a[i, j])
        if col > norm:
            norm = col
    s = 0
    if norm > 0.5:
        s = int(math.ceil(math.log2(norm / 0.5)))
    b = a / (2.0**s)
    result = np.eye(n)
    term = np.eye(n)
    for k in range(1, 40):
        term = term @ b / k
        result = result + term
        tn = 0.0
        for i in range(n):
            for j in range(n):
                tn = max(tn, abs(term[i, j]))
        if tn < 1e-17:
            break
    for _ in range(s):
        result = result @ result
    return result


@njit
def expm_frechet(a, e):
    """Directional derivative of ``expm`` at ``a`` along ``e`` (block-matrix identity)."""
    n = a.shape[0]
    big = np.zeros((2 * n, 2 * n))
    big[:n, :n] = a
    big[n:, n:] = a
    big[:n, n:] = e
    out = expm(big)
    return out[:n, :n].copy(), out[:n, n:].copy()


@njit
def _xlogk(y, k):
    # y * log(y)**k, continuously extended by 0 at y = 0
    if y == 0.0:
        return 0.0
    return y * math.log(y) ** k


@njit
def eps_tau_rhs(tau, x, w0, wx, eps):
    """Boundary-regular system of the g_eps family written in the (y, w_y, w_x) form.

    Returns d/dtau of (x, w0, wx) with tau = -y and w0 = -w_y.  At tau = 0
    every term carries a factor y (possibly times powers of log y) and is 0.
    """
    y = -tau
    wy = -w0
    ex = math.exp(eps * x)
    emx = math.exp(-eps * x)
    if y == 0.0:
        return 0.0, 0.0, 0.0
    ly = math.log(y)
    big_a = -(1.0 / wy) * eps * emx * ly
    da_dx = (eps * eps * emx * ly) / wy
    da_dwy = eps * emx * ly / (wy * wy)
    s = wx + big_a
    dx_dy = y * ex * s / wy
    dwy_dy = eps * y * ex * s - y * ex * ex * s * s / wy
    dwx_dy = -dx_dy * da_dx - dwy_dy * da_dwy
    return -dx_dy, dwy_dy, -dwx_dy


@njit
def eps_cotangent_rhs(x0, x1, xi0, xi1, eps):
    """Arclength cogeodesic flow for g_eps on the unit energy surface (Fermi form, h Euclidean)."""
    y = -x0
    rho = y * math.exp(eps * x1)
    r2 = rho * rho
    # rho_0 = d rho / d x0 = -exp(eps x1); rho_1 = eps * rho
    dx0 = r2 * xi0
    dx1 = r2 * xi1
    dxi0 = math.exp(eps * x1) / rho
    dxi1 = -eps
    return dx0, dx1, dxi0, dxi1


@njit
def _eps_vec(tau, y, eps):
    out = np.empty(3)
    a, b, c = eps_tau_rhs(tau, y[0], y[1], y[2], eps)
    out[0] = a
    out[1] = b
    out[2] = c
    return out


@njit
def eps_tau_integrate(eps, tau0, y0, tau_end, rtol, atol, tau_min, first_step, max_steps):
    """Adaptive Dormand-Prince integration of the g_eps boundary system.

    Integrates from ``tau0`` to ``tau_end`` (either direction).  When starting
    at tau = 0 the first step is an explicit Heun step of size ``first_step``;
    when ending at tau = 0 the adaptive phase stops at ``-tau_min`` and a Heun
    step closes the gap.  Returns ``(taus, states, status)`` where status is
    0 for success, 1 for step underflow, 2 for w0 <= 0 and 3 for max_steps.
    """
    taus = np.empty(max_steps + 2)
    ys = np.empty((max_steps + 2, 3))
    y = y0.copy()
    t = tau0
    taus[0] = t
    ys[0] = y
    count = 1
    direction = 1.0 if tau_end > tau0 else -1.0
    stop_at = tau_end
    if tau_end == 0.0:
        stop_at = -tau_min
    if tau0 == 0.0:
        h = direction * first_step
        k1 = _eps_vec(t, y, eps)
        k2 = _eps_vec(t + h, y + h * k1, eps)
        y = y + 0.5 * h * (k1 + k2)
        t = t + h
        taus[count] = t
        ys[count] = y
        count += 1
    h = direction * max(first_step * 1e4, 1e-8)
    status = 0
    err_old = 1e-4
    steps = 0
    while direction * (stop_at - t) > 0.0:
        if steps >= max_steps or count >= max_steps:
            status = 3
            break
        steps += 1
        if direction * (t + h - stop_at) > 0.0:
            h = stop_at - t
        k1 = _eps_vec(t, y, eps)
        k2 = _eps_vec(t + C2 * h, y + h * (A21 * k1), eps)
        k3 = _eps_vec(t + C3 * h, y + h * (A31 * k1 + A32 * k2), eps)
        k4 = _eps_vec(t + C4 * h, y + h * (A41 * k1 + A42 * k2 + A43 * k3), eps)
        k5 = _eps_vec(t + C5 * h, y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4), eps)
        k6 = _eps_vec(t + h, y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5), eps)
        ynew = y + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6)
        k7 = _eps_vec(t + h, ynew, eps)
        errv = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
        acc = 0.0
        for i in range(3):
            sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
            acc += (errv[i] / sc) ** 2
        err = math.sqrt(acc / 3.0)
        if err <= 1.0:
            t = t + h
            y = ynew
            taus[count] = t
            ys[count] = y
            count += 1
            if y[1] <= 0.0:
                status = 2
                break
            fac = 0.9 * max(err, 1e-10) ** (-0.17) * err_old**0.04
            fac = min(5.0, max(0.2, fac))
            err_old = max(err, 1e-4)
            h = h * fac
        else:
            h = h * max(0.2, 0.9 * err ** (-0.2))
        if abs(h) < 10.0 * np.spacing(abs(t)) + 1e-300:
            status = 1
            break
    if status == 0 and tau_end == 0.0:
        h = -t
        k1 = _eps_vec(t, y, eps)
        k2 = _eps_vec(0.0, y + h * k1, eps)
        y = y + 0.5 * h * (k1 + k2)
        t = 0.0
        taus[count] = t
        ys[count] = y
        count += 1
    return taus[:count].copy(), ys[:count].copy(), status
