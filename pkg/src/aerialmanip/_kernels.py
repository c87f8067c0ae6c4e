"""Compiled RK4 kernel for the closed-loop simulator.

Same equations as :func:`aerialmanip.dynamics._terms_accelerations` and the
numpy integrator in :mod:`aerialmanip.simulator`, written with explicit loops so
numba can compile them. The numpy path stays the reference implementation; the
test-suite checks the two against each other.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _cross(a, b):
    return np.array([a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]])


@njit(cache=True)
def _mv(A, v):
    out = np.zeros(3)
    for i in range(3):
        for k in range(3):
            out[i] += A[i, k] * v[k]
    return out


@njit(cache=True)
def _mtv(A, v):
    out = np.zeros(3)
    for i in range(3):
        for k in range(3):
            out[i] += A[k, i] * v[k]
    return out


@njit(cache=True)
def _derivative(x, j, F_t, tau, g, m_s, r, rd, rdd, I_O, I_dot, L, Ld, S, C_inv, pitch_limit):
    phi, theta, psi = x[6], x[7], x[8]
    if abs(theta) >= pitch_limit:
        return np.full(12, np.nan), False
    cf, sf = math.cos(phi), math.sin(phi)
    ct, st = math.cos(theta), math.sin(theta)
    cp, sp = math.cos(psi), math.sin(psi)
    R = np.empty((3, 3))
    R[0, 0] = ct * cp
    R[0, 1] = sf * st * cp - cf * sp
    R[0, 2] = cf * st * cp + sf * sp
    R[1, 0] = ct * sp
    R[1, 1] = sf * st * sp + cf * cp
    R[1, 2] = cf * st * sp - sf * cp
    R[2, 0] = -st
    R[2, 1] = sf * ct
    R[2, 2] = cf * ct
    w = x[9:12]
    rj, rdj = r[j], rd[j]
    wxr = _cross(w, rj)
    inner = _cross(w, wxr) + 2.0 * _cross(w, rdj) + rdd[j]
    f1 = -F_t * R[:, 2] - m_s * _mv(R, inner)
    f1[2] += m_s * g
    grav = g * R[2, :].copy()
    f2 = tau - _cross(w, _mv(I_O[j], w)) + m_s * _cross(rj, grav) - _mv(I_dot[j], w) - _cross(w, L[j]) - Ld[j]
    wd = _mv(C_inv[j], f2 - _mv(S[j], _mtv(R, f1)))
    a = f1 / m_s + _mv(R, _mv(S[j], wd))
    tt = st / ct
    out = np.empty(12)
    out[0:3] = x[3:6]
    out[3:6] = a
    out[6] = w[0] + sf * tt * w[1] + cf * tt * w[2]
    out[7] = cf * w[1] - sf * w[2]
    out[8] = (sf * w[1] + cf * w[2]) / ct
    out[9:12] = wd
    return out, True


@njit(cache=True)
def rk4_hold(x, j0, n, dt, F_t, tau, g, m_s, r, rd, rdd, I_O, I_dot, L, Ld, S, C_inv, pitch_limit):
    """``n`` RK4 steps under a held wrench; stage ``j`` samples sit at ``j * dt / 2``.

    Returns the final state and ``False`` if the pitch limit was reached.
    """
    for i in range(n):
        j = 2 * (j0 + i)
        k1, ok1 = _derivative(x, j, F_t, tau, g, m_s, r, rd, rdd, I_O, I_dot, L, Ld, S, C_inv, pitch_limit)
        k2, ok2 = _derivative(x + 0.5 * dt * k1, j + 1, F_t, tau, g, m_s, r, rd, rdd, I_O, I_dot, L, Ld, S, C_inv, pitch_limit)
        k3, ok3 = _derivative(x + 0.5 * dt * k2, j + 1, F_t, tau, g, m_s, r, rd, rdd, I_O, I_dot, L, Ld, S, C_inv, pitch_limit)
        k4, ok4 = _derivative(x + dt * k3, j + 2, F_t, tau, g, m_s, r, rd, rdd, I_O, I_dot, L, Ld, S, C_inv, pitch_limit)
        if not (ok1 and ok2 and ok3 and ok4):
            return x, False
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return x, True
