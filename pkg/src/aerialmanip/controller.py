"""Hierarchical position/attitude control law with disturbance compensation.

One cycle: the outer loop turns position errors into a virtual acceleration
``nu1``; ``nu1`` is converted into total thrust and roll/pitch references; the inner
loop feedback-linearizes the attitude dynamics so that ``Phi_ddot = nu2``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .dynamics import BodyState, ControlWrench, VehicleParams
from .errors import ThrustUnderflow
from .estimator import DisturbanceEstimate
from .spatial import E3, euler_rate_matrix, euler_rate_matrix_dot, wrap_angle

log = logging.getLogger(__name__)

#: Thrust floor as a fraction of hover thrust.
THRUST_FLOOR_FRACTION = 0.1


@dataclass(frozen=True)
class Setpoint:
    p: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))
    p_dot: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))
    p_ddot: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))
    psi: float = 0.0
    psi_dot: float = 0.0
    psi_ddot: float = 0.0


def outer_loop(
    x: ArrayLike, K: ArrayLike, p_ddot_d: ArrayLike, Phi_ddot_d: ArrayLike
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Virtual inputs ``(nu1, nu2) = K x + [p_ddot_d; Phi_ddot_d]``."""
    u = np.asarray(K, dtype=float) @ np.asarray(x, dtype=float)
    return u[:3] + np.asarray(p_ddot_d, dtype=float), u[3:] + np.asarray(Phi_ddot_d, dtype=float)


def attitude_reference(
    nu1: ArrayLike, psi_d: float, F_hat: ArrayLike, m_s: float, g: float
) -> tuple[float, float, float]:
    """Thrust and roll/pitch references realizing ``nu1`` at yaw ``psi_d``.

    Inverts ``nu1 = -(F_t/m_s) R_d e3 + g e3 + F_hat/m_s`` exactly, so feeding the
    result back through that expression recovers ``nu1``.

    Raises:
        ThrustUnderflow: if the required thrust is below 10% of hover thrust.
    """
    nu1 = np.asarray(nu1, dtype=float)
    f = m_s * g * E3 + np.asarray(F_hat, dtype=float) - m_s * nu1
    F_t = float(np.linalg.norm(f))
    if F_t < THRUST_FLOOR_FRACTION * m_s * g:
        raise ThrustUnderflow(f"thrust {F_t:.4g} N below floor {THRUST_FLOOR_FRACTION * m_s * g:.4g} N")
    u = f / F_t
    cp, sp = np.cos(psi_d), np.sin(psi_d)
    s_phi = u[0] * sp - u[1] * cp
    if abs(s_phi) > 1.0:
        log.warning("roll reference arcsine argument %.17g clamped", s_phi)
        s_phi = float(np.clip(s_phi, -1.0, 1.0))
    phi_d = float(np.arcsin(s_phi))
    theta_d = float(np.arctan2(u[0] * cp + u[1] * sp, u[2]))
    return F_t, phi_d, theta_d


def inner_loop(body: BodyState, nu2: ArrayLike, tau_hat: ArrayLike, I_b: ArrayLike) -> NDArray[np.float64]:
    """Body torque giving ``Phi_ddot = nu2`` when the disturbance equals ``tau_hat``.

    Raises:
        SingularAttitude: near ``|theta| = pi/2``.
    """
    I_b = np.asarray(I_b, dtype=float)
    w = body.omega
    T = euler_rate_matrix(body.euler)
    Td = euler_rate_matrix_dot(body.euler, T @ w)
    inner = -Td @ w + T @ np.linalg.solve(I_b, np.cross(w, I_b @ w)) + np.asarray(nu2, dtype=float)
    return I_b @ np.linalg.solve(T, inner) - np.asarray(tau_hat, dtype=float)


@dataclass(frozen=True)
class AttitudeRefFilter:
    """First-order filtered differences of the roll/pitch/yaw reference.

    Immutable: :meth:`update` returns a new filter together with the rate and
    acceleration estimates.
    """

    dt: float
    tau: float = 0.05
    prev: NDArray[np.float64] | None = None
    rate: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))
    accel: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))

    def update(self, Phi_d: ArrayLike) -> "AttitudeRefFilter":
        Phi_d = np.asarray(Phi_d, dtype=float)
        if self.prev is None:
            return AttitudeRefFilter(self.dt, self.tau, Phi_d.copy(), np.zeros(3), np.zeros(3))
        alpha = self.dt / (self.tau + self.dt)
        raw_rate = wrap_angle(Phi_d - self.prev) / self.dt
        rate = self.rate + alpha * (raw_rate - self.rate)
        raw_acc = (rate - self.rate) / self.dt
        accel = self.accel + alpha * (raw_acc - self.accel)
        return AttitudeRefFilter(self.dt, self.tau, Phi_d.copy(), rate, accel)


class ControlOutput(NamedTuple):
    wrench: ControlWrench
    attitude_ref: NDArray[np.float64]
    nu1: NDArray[np.float64]
    nu2: NDArray[np.float64]
    F_hat_used: NDArray[np.float64]
    tau_hat_used: NDArray[np.float64]
    error_state: NDArray[np.float64]
    saturated: bool


def error_state(
    body: BodyState,
    setpoint: Setpoint,
    Phi_d: ArrayLike,
    Phi_dot_d: ArrayLike,
) -> NDArray[np.float64]:
    """``[e_p, e_v, e_Phi, e_Phi_dot]`` with wrapped attitude error."""
    Phi_dot = euler_rate_matrix(body.euler) @ body.omega
    return np.concatenate(
        [
            body.p - setpoint.p,
            body.v - setpoint.p_dot,
            wrap_angle(body.euler - np.asarray(Phi_d, dtype=float)),
            Phi_dot - np.asarray(Phi_dot_d, dtype=float),
        ]
    )


def control_step(
    body: BodyState,
    setpoint: Setpoint,
    K: ArrayLike,
    estimate: DisturbanceEstimate | None,
    compensation_enabled: bool,
    vehicle: VehicleParams,
    m_s: float,
    ref_filter: AttitudeRefFilter,
) -> tuple[ControlOutput, AttitudeRefFilter]:
    """One control cycle. Returns the output and the advanced reference filter.

    With compensation disabled the force and torque estimates are replaced by zero.
    The outer loop sees the attitude reference of the previous cycle (the current
    one depends on its own output); the inner loop sees the current one.
    """
    K = np.asarray(K, dtype=float)
    zero = np.zeros(3)
    if compensation_enabled and estimate is not None:
        F_hat, tau_hat = np.asarray(estimate.F_hat, float), np.asarray(estimate.tau_hat, float)
    else:
        F_hat, tau_hat = zero, zero

    yaw_rate = np.array([0.0, 0.0, setpoint.psi_dot])
    if ref_filter.prev is None:
        prev_d, prev_rate = np.array([body.euler[0], body.euler[1], setpoint.psi]), yaw_rate
    else:
        prev_d, prev_rate = ref_filter.prev, np.array([ref_filter.rate[0], ref_filter.rate[1], setpoint.psi_dot])
    x_prev = error_state(body, setpoint, prev_d, prev_rate)
    nu1, _ = outer_loop(x_prev, K, setpoint.p_ddot, zero)

    F_t, phi_d, theta_d = attitude_reference(nu1, setpoint.psi, F_hat, m_s, vehicle.g)
    Phi_d = np.array([phi_d, theta_d, setpoint.psi])
    new_filter = ref_filter.update(Phi_d)
    Phi_dot_d = np.array([new_filter.rate[0], new_filter.rate[1], setpoint.psi_dot])
    Phi_ddot_d = np.array([new_filter.accel[0], new_filter.accel[1], setpoint.psi_ddot])

    x = error_state(body, setpoint, Phi_d, Phi_dot_d)
    _, nu2 = outer_loop(x, K, setpoint.p_ddot, Phi_ddot_d)
    tau = inner_loop(body, nu2, tau_hat, vehicle.I_b)

    saturated = not (0.0 <= F_t <= vehicle.k2)
    if saturated:
        log.info("thrust %.4g N clamped to [0, %.4g]", F_t, vehicle.k2)
        F_t = float(np.clip(F_t, 0.0, vehicle.k2))
    out = ControlOutput(
        wrench=ControlWrench(F_t, tau),
        attitude_ref=np.array([phi_d, theta_d]),
        nu1=nu1,
        nu2=nu2,
        F_hat_used=F_hat,
        tau_hat_used=tau_hat,
        error_state=x,
        saturated=saturated,
    )
    return out, new_filter
