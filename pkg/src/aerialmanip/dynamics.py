"""Coupled UAV + arm dynamics, disturbance decomposition, and hex-rotor mixing.

Two views of the same physics live here:

* :func:`coupled_accelerations` is the plant. It solves the translational and
  rotational momentum balances jointly for ``(r_ddot, omega_dot)``.
* :func:`force_disturbance` / :func:`torque_disturbance` rewrite the arm's effect as
  a force and torque acting on a bare UAV of mass ``m_s`` and inertia ``I_b``.
  The torque uses the lumped (arm-CoM) angular momentum.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import nnls

from .errors import DegenerateMass, InfeasibleWrench, SingularInertia, ValidationError
from .inertia import InertiaParams
from .spatial import E3, euler_rate_matrix, rotation_from_euler, skew

Momentum = Literal["exact", "approx"]

#: Minimum accepted inverse condition number of the composite inertia.
INERTIA_RCOND = 1e-10
#: Allocation round-trip tolerance on the wrench (N, N*m).
ALLOCATION_TOL = 1e-6


@dataclass(frozen=True)
class VehicleParams:
    """Hex-rotor parameters. ``I_b`` is about the UAV CoM ``O`` in body axes."""

    m_b: float
    I_b: NDArray[np.float64]
    c_T: float
    c_tau: float
    d: float
    g: float = 9.81
    k2: float = 60.0

    def __post_init__(self) -> None:
        I_b = np.asarray(self.I_b, dtype=float).reshape(3, 3)
        object.__setattr__(self, "I_b", I_b)
        if not self.m_b > 0:
            raise ValidationError("m_b must be positive")
        if not np.allclose(I_b, I_b.T) or np.linalg.eigvalsh(I_b).min() <= 0:
            raise ValidationError("I_b must be symmetric positive definite")
        for name in ("c_T", "c_tau", "d", "k2"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")

    @property
    def mixer(self) -> NDArray[np.float64]:
        """4x6 map from squared rotor speeds to ``[F_t, tau_x, tau_y, tau_z]``."""
        cT, ct, d = self.c_T, self.c_tau, self.d
        h = np.sqrt(3.0) / 2.0
        return np.array(
            [
                [cT, cT, cT, cT, cT, cT],
                [-d * cT, d * cT, 0.5 * d * cT, -0.5 * d * cT, -0.5 * d * cT, 0.5 * d * cT],
                [0.0, 0.0, h * d * cT, -h * d * cT, h * d * cT, -h * d * cT],
                [-ct, ct, -ct, ct, ct, -ct],
            ]
        )


@dataclass
class BodyState:
    """UAV position/velocity (inertial), Z-Y-X Euler angles, body angular rate."""

    p: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))
    v: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))
    euler: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))
    omega: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self) -> None:
        for name in ("p", "v", "euler", "omega"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float).reshape(3))

    def as_vector(self) -> NDArray[np.float64]:
        return np.concatenate([self.p, self.v, self.euler, self.omega])

    @classmethod
    def from_vector(cls, x: ArrayLike) -> "BodyState":
        x = np.asarray(x, dtype=float)
        return cls(x[0:3], x[3:6], x[6:9], x[9:12])

    @property
    def R(self) -> NDArray[np.float64]:
        return rotation_from_euler(self.euler)


class ControlWrench(NamedTuple):
    F_t: float
    tau: NDArray[np.float64]

    def as_vector(self) -> NDArray[np.float64]:
        return np.concatenate([[self.F_t], self.tau])


class Disturbance(NamedTuple):
    """Force in the inertial frame, torque in the body frame."""

    F_dis: NDArray[np.float64]
    tau_dis: NDArray[np.float64]


def _cross(a, b):
    # np.cross carries heavy per-call overhead for single 3-vectors
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.ndim != 1 or b.ndim != 1:
        return np.cross(a, b)
    return np.array([a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]])


class PlantTerms(NamedTuple):
    """State-independent pieces of the plant equations at one or more instants."""

    m_s: float
    r: NDArray[np.float64]
    r_dot: NDArray[np.float64]
    r_ddot: NDArray[np.float64]
    I_O: NDArray[np.float64]
    I_dot: NDArray[np.float64]
    L: NDArray[np.float64]
    L_dot: NDArray[np.float64]
    S: NDArray[np.float64]
    C_inv: NDArray[np.float64]

    def at(self, idx) -> "PlantTerms":
        """Select instants from batched terms."""
        return PlantTerms(self.m_s, *(f[idx] for f in self[1:]))


def plant_terms(ip: InertiaParams, I_b: ArrayLike, momentum: Momentum = "exact") -> PlantTerms:
    """Precompute the plant's arm-dependent terms (batched over leading axes).

    Raises:
        SingularInertia: if the composite inertia about the system CoM is singular.
        DegenerateMass: for ``momentum="approx"`` with no arm mass.
    """
    m_s = ip.m_s
    r, rd, rdd = (np.asarray(a, dtype=float) for a in (ip.r_oc, ip.r_oc_dot, ip.r_oc_ddot))
    if momentum == "exact":
        L, Ld = np.asarray(ip.L_man, float), np.asarray(ip.L_man_dot, float)
    elif momentum == "approx":
        if not ip.m_man > 0:
            raise DegenerateMass("lumped momentum needs a positive arm mass")
        k = m_s**2 / ip.m_man
        L, Ld = k * np.cross(r, rd), k * np.cross(r, rdd)
    else:
        raise ValidationError(f"unknown momentum model {momentum!r}")
    I_O = np.asarray(I_b, dtype=float) + ip.I_man
    S = skew(r)
    # eliminating r_ddot leaves the composite inertia about the system CoM
    composite = I_O + m_s * (S @ S)
    tr = np.trace(composite, axis1=-2, axis2=-1)
    if np.any(~(tr > 0)) or np.any(np.linalg.det(composite) / (tr / 3.0) ** 3 < INERTIA_RCOND):
        raise SingularInertia("composite inertia about the system CoM is singular")
    return PlantTerms(float(m_s), r, rd, rdd, I_O, np.asarray(ip.I_man_dot, float), L, Ld, S, np.linalg.inv(composite))


def _terms_accelerations(R, omega, F_t, tau, pt: PlantTerms, g):
    m_s, r, rd, rdd, I_O, I_dot, L, Ld, S, C_inv = pt
    wxr = _cross(omega, r)
    f1 = -F_t * R[:, 2] + m_s * g * E3 - m_s * (R @ (_cross(omega, wxr) + 2.0 * _cross(omega, rd) + rdd))
    f2 = tau - _cross(omega, I_O @ omega) + m_s * _cross(r, g * R[2, :]) - I_dot @ omega - _cross(omega, L) - Ld
    # block elimination of [[m_s I, -m_s R S], [m_s S R^T, I_O]] [r_ddot; omega_dot] = [f1; f2]
    omega_dot = C_inv @ (f2 - S @ (R.T @ f1))
    r_ddot = f1 / m_s + R @ (S @ omega_dot)
    return r_ddot, omega_dot


def _accelerations(R, omega, F_t, tau, ip: InertiaParams, I_b, g, momentum: Momentum):
    return _terms_accelerations(R, omega, F_t, tau, plant_terms(ip, I_b, momentum), g)


def coupled_accelerations(
    body: BodyState,
    inertia: InertiaParams,
    wrench: ControlWrench,
    params: VehicleParams,
    momentum: Momentum = "exact",
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Translational acceleration of ``O`` (inertial) and body angular acceleration.

    With ``momentum="exact"`` the arm's angular momentum and its rate are the
    per-link sums in ``inertia``; ``"approx"`` swaps in the lumped arm-CoM form.

    Raises:
        SingularInertia: if the composite inertia about the system CoM is singular.
    """
    return _accelerations(
        body.R, body.omega, float(wrench.F_t), np.asarray(wrench.tau, float), inertia, params.I_b, params.g, momentum
    )


def force_disturbance(body: BodyState, inertia: InertiaParams, omega_dot: ArrayLike) -> NDArray[np.float64]:
    """Inertial-frame force the moving arm exerts on an equivalent bare UAV."""
    w = body.omega
    r, rd, rdd = inertia.r_oc, inertia.r_oc_dot, inertia.r_oc_ddot
    inner = _cross(w, _cross(w, r)) + _cross(omega_dot, r) + 2.0 * _cross(w, rd) + rdd
    return -inertia.m_s * (body.R @ inner)


def torque_disturbance(
    body: BodyState,
    inertia: InertiaParams,
    omega_dot: ArrayLike,
    v_dot: ArrayLike,
    g: float = 9.81,
) -> NDArray[np.float64]:
    """Body-frame torque the moving arm exerts on an equivalent bare UAV.

    Raises:
        DegenerateMass: if the arm mass is not positive.
    """
    if not inertia.m_man > 0:
        raise DegenerateMass("torque disturbance needs a positive arm mass")
    w = body.omega
    omega_dot = np.asarray(omega_dot, dtype=float)
    m_s = inertia.m_s
    k = m_s**2 / inertia.m_man
    r, rd, rdd = inertia.r_oc, inertia.r_oc_dot, inertia.r_oc_ddot
    I = inertia.I_man
    return (
        -I @ omega_dot
        - _cross(w, I @ w)
        - inertia.I_man_dot @ w
        + m_s * _cross(r, body.R.T @ (g * E3 - np.asarray(v_dot, dtype=float)))
        - k * _cross(r, rdd)
        - k * _cross(w, _cross(r, rd))
    )


def model_accelerations(
    body: BodyState,
    wrench: ControlWrench,
    disturbance: Disturbance,
    params: VehicleParams,
    m_s: float,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Bare-UAV accelerations ``(v_dot, omega_dot)`` under an explicit disturbance."""
    w = body.omega
    v_dot = -wrench.F_t / m_s * body.R[:, 2] + params.g * E3 + disturbance.F_dis / m_s
    omega_dot = np.linalg.solve(params.I_b, wrench.tau - _cross(w, params.I_b @ w) + disturbance.tau_dis)
    return v_dot, omega_dot


def plant_disturbance(
    body: BodyState,
    wrench: ControlWrench,
    accel: tuple[NDArray[np.float64], NDArray[np.float64]],
    params: VehicleParams,
    m_s: float,
) -> Disturbance:
    """Disturbance that reproduces given plant accelerations in the bare-UAV model.

    This is the simulated stand-in for a force/torque sensor between UAV and arm.
    """
    r_ddot, omega_dot = accel
    w = body.omega
    F = m_s * r_ddot + wrench.F_t * body.R[:, 2] - m_s * params.g * E3
    tau = params.I_b @ omega_dot - wrench.tau + _cross(w, params.I_b @ w)
    return Disturbance(F, tau)


def body_derivative(
    body: BodyState,
    inertia: InertiaParams,
    wrench: ControlWrench,
    params: VehicleParams,
    momentum: Momentum = "exact",
) -> NDArray[np.float64]:
    """Time derivative of the 12-vector ``[p, v, euler, omega]``."""
    r_ddot, omega_dot = coupled_accelerations(body, inertia, wrench, params, momentum)
    return np.concatenate([body.v, r_ddot, euler_rate_matrix(body.euler) @ body.omega, omega_dot])


def linear_momentum(body: BodyState, inertia: InertiaParams) -> NDArray[np.float64]:
    """Total linear momentum of UAV + arm in the inertial frame."""
    return inertia.m_s * (body.v + body.R @ (np.cross(body.omega, inertia.r_oc) + inertia.r_oc_dot))


def angular_momentum(body: BodyState, inertia: InertiaParams, params: VehicleParams) -> NDArray[np.float64]:
    """Total angular momentum about the inertial origin."""
    R = body.R
    P = linear_momentum(body, inertia)
    h = (params.I_b + inertia.I_man) @ body.omega + inertia.L_man
    return np.cross(body.p, P) + inertia.m_s * np.cross(R @ inertia.r_oc, body.v) + R @ h


def kinetic_energy_frozen(body: BodyState, inertia: InertiaParams, params: VehicleParams) -> float:
    """Kinetic energy of the system with the arm locked (rigid composite body)."""
    w = body.omega
    I_O = params.I_b + inertia.I_man
    return float(
        0.5 * inertia.m_s * body.v @ body.v
        + inertia.m_s * body.v @ (body.R @ np.cross(w, inertia.r_oc))
        + 0.5 * w @ I_O @ w
    )


def mix_rotors(speeds: ArrayLike, params: VehicleParams) -> ControlWrench:
    """Thrust and body torque from six rotor speeds (rad/s)."""
    s = np.asarray(speeds, dtype=float)
    if np.any(s < 0):
        raise ValidationError("rotor speeds must be non-negative")
    w = params.mixer @ s**2
    return ControlWrench(float(w[0]), w[1:])


def allocate_rotors(wrench: ControlWrench, params: VehicleParams) -> NDArray[np.float64]:
    """Rotor speeds producing ``wrench``.

    The minimum-norm squared-speed solution is used when it is non-negative;
    otherwise a non-negative least-squares solution is sought.

    Raises:
        InfeasibleWrench: if thrust is outside ``[0, k2]`` or no non-negative
            squared speeds reproduce the wrench within ``ALLOCATION_TOL``.
    """
    w = np.asarray(wrench.as_vector() if isinstance(wrench, ControlWrench) else wrench, dtype=float)
    if w[0] < 0 or w[0] > params.k2:
        raise InfeasibleWrench(f"thrust {w[0]:.4g} N outside [0, {params.k2}]")
    M = params.mixer
    sq = np.linalg.pinv(M) @ w
    if np.any(sq < 0):
        sq, _ = nnls(M, w)
    sq = np.clip(sq, 0.0, None)
    err = np.max(np.abs(M @ sq - w))
    if err > ALLOCATION_TOL:
        raise InfeasibleWrench(f"allocation residual {err:.3g} exceeds {ALLOCATION_TOL}")
    return np.sqrt(sq)
