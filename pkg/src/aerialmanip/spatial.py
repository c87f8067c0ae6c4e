"""Rotation and Z-Y-X Euler-angle kinematics.

Conventions: the inertial frame is NED, ``R = rotation_from_euler(phi, theta, psi)``
maps body-frame vectors into the inertial frame, and ``R = Rz(psi) Ry(theta) Rx(phi)``.
All functions accept a trailing axis of length 3 and broadcast over leading axes.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import SingularAttitude

#: Guard band around theta = +/- pi/2 where the Euler-rate map is refused.
SINGULARITY_MARGIN = 1e-3

E1 = np.array([1.0, 0.0, 0.0])
E2 = np.array([0.0, 1.0, 0.0])
E3 = np.array([0.0, 0.0, 1.0])


def wrap_angle(a: ArrayLike) -> NDArray[np.float64]:
    """Wrap angles into (-pi, pi]."""
    a = np.asarray(a, dtype=float)
    w = np.mod(a + np.pi, 2.0 * np.pi) - np.pi
    return np.where(w == -np.pi, np.pi, w)


def rotation_from_euler(angles: ArrayLike) -> NDArray[np.float64]:
    """Body-to-inertial rotation for Z-Y-X Euler angles ``(phi, theta, psi)``."""
    angles = np.asarray(angles, dtype=float)
    phi, theta, psi = angles[..., 0], angles[..., 1], angles[..., 2]
    cf, sf = np.cos(phi), np.sin(phi)
    ct, st = np.cos(theta), np.sin(theta)
    cp, sp = np.cos(psi), np.sin(psi)
    R = np.empty(angles.shape[:-1] + (3, 3))
    R[..., 0, 0] = ct * cp
    R[..., 0, 1] = sf * st * cp - cf * sp
    R[..., 0, 2] = cf * st * cp + sf * sp
    R[..., 1, 0] = ct * sp
    R[..., 1, 1] = sf * st * sp + cf * cp
    R[..., 1, 2] = cf * st * sp - sf * cp
    R[..., 2, 0] = -st
    R[..., 2, 1] = sf * ct
    R[..., 2, 2] = cf * ct
    return R


def _check_pitch(theta: NDArray[np.float64]) -> None:
    if np.any(np.abs(theta) >= np.pi / 2 - SINGULARITY_MARGIN):
        raise SingularAttitude(f"pitch {np.max(np.abs(theta)):.6f} rad too close to pi/2")


def euler_rate_matrix(angles: ArrayLike) -> NDArray[np.float64]:
    """Matrix ``T`` with ``d(angles)/dt = T @ omega_body``.

    Raises:
        SingularAttitude: if ``|theta| >= pi/2 - SINGULARITY_MARGIN``.
    """
    angles = np.asarray(angles, dtype=float)
    phi, theta = angles[..., 0], angles[..., 1]
    _check_pitch(theta)
    cf, sf = np.cos(phi), np.sin(phi)
    ct, tt = np.cos(theta), np.tan(theta)
    T = np.zeros(angles.shape[:-1] + (3, 3))
    T[..., 0, 0] = 1.0
    T[..., 0, 1] = sf * tt
    T[..., 0, 2] = cf * tt
    T[..., 1, 1] = cf
    T[..., 1, 2] = -sf
    T[..., 2, 1] = sf / ct
    T[..., 2, 2] = cf / ct
    return T


def euler_rate_matrix_dot(angles: ArrayLike, angle_rates: ArrayLike) -> NDArray[np.float64]:
    """Time derivative of :func:`euler_rate_matrix` along ``angle_rates``."""
    angles = np.asarray(angles, dtype=float)
    rates = np.asarray(angle_rates, dtype=float)
    phi, theta = angles[..., 0], angles[..., 1]
    _check_pitch(theta)
    dphi, dtheta = rates[..., 0], rates[..., 1]
    cf, sf = np.cos(phi), np.sin(phi)
    ct, tt = np.cos(theta), np.tan(theta)
    sec = 1.0 / ct
    Td = np.zeros(angles.shape[:-1] + (3, 3))
    Td[..., 0, 1] = cf * tt * dphi + sf * sec**2 * dtheta
    Td[..., 0, 2] = -sf * tt * dphi + cf * sec**2 * dtheta
    Td[..., 1, 1] = -sf * dphi
    Td[..., 1, 2] = -cf * dphi
    Td[..., 2, 1] = cf * sec * dphi + sf * sec * tt * dtheta
    Td[..., 2, 2] = -sf * sec * dphi + cf * sec * tt * dtheta
    return Td


def skew(v: ArrayLike) -> NDArray[np.float64]:
    """Cross-product matrix: ``skew(v) @ w == cross(v, w)``."""
    v = np.asarray(v, dtype=float)
    S = np.zeros(v.shape[:-1] + (3, 3))
    S[..., 0, 1] = -v[..., 2]
    S[..., 0, 2] = v[..., 1]
    S[..., 1, 0] = v[..., 2]
    S[..., 1, 2] = -v[..., 0]
    S[..., 2, 0] = -v[..., 1]
    S[..., 2, 1] = v[..., 0]
    return S


def vee(S: ArrayLike) -> NDArray[np.float64]:
    """Inverse of :func:`skew` (uses the antisymmetric part)."""
    S = np.asarray(S, dtype=float)
    return 0.5 * np.stack(
        [S[..., 2, 1] - S[..., 1, 2], S[..., 0, 2] - S[..., 2, 0], S[..., 1, 0] - S[..., 0, 1]],
        axis=-1,
    )


def rot_z(a: float) -> NDArray[np.float64]:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_x(a: float) -> NDArray[np.float64]:
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
