"""Variable inertia parameters of the UAV + arm system.

These describe how the arm's configuration moves the system CoM away from the
UAV origin ``O`` and how it changes the inertia about ``O``; their time
derivatives carry the dynamic coupling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .arm import ArmModel, LinkKinematics
from .errors import DegenerateMass
from .spatial import skew

_I3 = np.eye(3)


def _outer(a, b):
    return a[..., :, None] * b[..., None, :]


def com_offset(arm: ArmModel, q: ArrayLike, body_mass: float) -> NDArray[np.float64]:
    """Offset of the system CoM from ``O`` in the body frame."""
    m = arm.masses
    m_s = body_mass + m.sum()
    return np.einsum("j,...jk->...k", m, arm.com_positions(q)) / m_s


def com_offset_rate(arm: ArmModel, q: ArrayLike, qdot: ArrayLike, body_mass: float) -> NDArray[np.float64]:
    m = arm.masses
    m_s = body_mass + m.sum()
    v, _ = arm.com_velocities(q, qdot)
    return np.einsum("j,...jk->...k", m, v) / m_s


def _rotated_local_inertia(arm: ArmModel, R: NDArray[np.float64]) -> NDArray[np.float64]:
    local = np.stack([link.inertia_local for link in arm.links])
    return R @ local @ np.swapaxes(R, -1, -2)


def _inertia_from(arm: ArmModel, kin: LinkKinematics) -> NDArray[np.float64]:
    m = arm.masses
    p = kin.p
    pp = np.einsum("...jk,...jk->...j", p, p)
    parallel = m[:, None, None] * (pp[..., None, None] * _I3 - _outer(p, p))
    return (_rotated_local_inertia(arm, kin.R) + parallel).sum(axis=-3)


def _inertia_rate_from(arm: ArmModel, kin: LinkKinematics) -> NDArray[np.float64]:
    m = arm.masses
    Ic = _rotated_local_inertia(arm, kin.R)
    Sw = skew(kin.w)
    rotational = Sw @ Ic - Ic @ Sw
    pv = np.einsum("...jk,...jk->...j", kin.p, kin.v)
    translational = m[:, None, None] * (
        2.0 * pv[..., None, None] * _I3 - _outer(kin.v, kin.p) - _outer(kin.p, kin.v)
    )
    return (rotational + translational).sum(axis=-3)


def manipulator_inertia(arm: ArmModel, q: ArrayLike) -> NDArray[np.float64]:
    """Inertia of the arm about ``O`` in body axes (parallel-axis sum over links)."""
    return _inertia_from(arm, arm.kinematics(q, np.zeros_like(np.asarray(q, dtype=float))))


def manipulator_inertia_rate(arm: ArmModel, q: ArrayLike, qdot: ArrayLike) -> NDArray[np.float64]:
    """Time derivative of :func:`manipulator_inertia` along ``qdot``."""
    return _inertia_rate_from(arm, arm.kinematics(q, qdot))


def angular_momentum_approx(
    r_oc: ArrayLike, r_oc_dot: ArrayLike, m_man: float, m_s: float
) -> NDArray[np.float64]:
    """Arm angular momentum about ``O`` lumped at the arm's own CoM.

    Raises:
        DegenerateMass: if ``m_man <= 0``.
    """
    if not m_man > 0:
        raise DegenerateMass(f"manipulator mass must be positive, got {m_man}")
    return (m_s**2 / m_man) * np.cross(r_oc, r_oc_dot)


def _exact_momentum_from(arm: ArmModel, kin: LinkKinematics) -> NDArray[np.float64]:
    m = arm.masses
    Ic = _rotated_local_inertia(arm, kin.R)
    spin = np.einsum("...jkl,...jl->...jk", Ic, kin.w)
    orbital = m[:, None] * np.cross(kin.p, kin.v)
    return (orbital + spin).sum(axis=-2)


def _exact_momentum_rate_from(arm: ArmModel, kin: LinkKinematics) -> NDArray[np.float64]:
    # d/dt (m p x v) = m p x a ; d/dt (Ic w) = Icdot w + Ic wdot, Icdot = [w]x Ic - Ic [w]x
    m = arm.masses
    Ic = _rotated_local_inertia(arm, kin.R)
    Sw = skew(kin.w)
    Icdot = Sw @ Ic - Ic @ Sw
    spin_rate = np.einsum("...jkl,...jl->...jk", Icdot, kin.w) + np.einsum("...jkl,...jl->...jk", Ic, kin.wdot)
    orbital_rate = m[:, None] * np.cross(kin.p, kin.a)
    return (orbital_rate + spin_rate).sum(axis=-2)


def exact_angular_momentum(arm: ArmModel, q: ArrayLike, qdot: ArrayLike) -> NDArray[np.float64]:
    """Arm angular momentum about ``O`` relative to the body, summed link by link."""
    return _exact_momentum_from(arm, arm.kinematics(q, qdot))


@dataclass(frozen=True)
class InertiaParams:
    """Variable inertia parameters at one instant (or a batch of instants).

    ``L_man``/``L_man_dot`` are the exact per-link momentum and its rate; the lumped
    approximation is available from :meth:`L_approx` and :meth:`L_approx_dot`.
    """

    r_oc: NDArray[np.float64]
    r_oc_dot: NDArray[np.float64]
    r_oc_ddot: NDArray[np.float64]
    I_man: NDArray[np.float64]
    I_man_dot: NDArray[np.float64]
    L_man: NDArray[np.float64]
    L_man_dot: NDArray[np.float64]
    m_man: float
    m_b: float

    @property
    def m_s(self) -> float:
        return self.m_b + self.m_man

    def L_approx(self) -> NDArray[np.float64]:
        return angular_momentum_approx(self.r_oc, self.r_oc_dot, self.m_man, self.m_s)

    def L_approx_dot(self) -> NDArray[np.float64]:
        return angular_momentum_approx(self.r_oc, self.r_oc_ddot, self.m_man, self.m_s)

    def __getitem__(self, idx) -> "InertiaParams":
        return InertiaParams(
            self.r_oc[idx], self.r_oc_dot[idx], self.r_oc_ddot[idx], self.I_man[idx],
            self.I_man_dot[idx], self.L_man[idx], self.L_man_dot[idx], self.m_man, self.m_b,
        )  # fmt: skip

    @classmethod
    def static(cls, r_oc: ArrayLike, I_man: ArrayLike, m_man: float, m_b: float) -> "InertiaParams":
        """Frozen arm: all rates and momenta zero."""
        z = np.zeros(3)
        return cls(np.asarray(r_oc, float), z, z, np.asarray(I_man, float), np.zeros((3, 3)), z, z, m_man, m_b)


def inertia_params(
    arm: ArmModel,
    body_mass: float,
    q: ArrayLike,
    qdot: ArrayLike,
    qddot: ArrayLike | None = None,
) -> InertiaParams:
    """All variable inertia parameters from joint states (batched over leading axes).

    ``r_oc_ddot`` and ``L_man_dot`` come from the analytic link accelerations, so
    they need ``qddot``; when it is omitted they are computed with zero joint
    acceleration.
    """
    kin = arm.kinematics(q, qdot, qddot)
    m = arm.masses
    m_s = body_mass + m.sum()
    return InertiaParams(
        r_oc=np.einsum("j,...jk->...k", m, kin.p) / m_s,
        r_oc_dot=np.einsum("j,...jk->...k", m, kin.v) / m_s,
        r_oc_ddot=np.einsum("j,...jk->...k", m, kin.a) / m_s,
        I_man=_inertia_from(arm, kin),
        I_man_dot=_inertia_rate_from(arm, kin),
        L_man=_exact_momentum_from(arm, kin),
        L_man_dot=_exact_momentum_rate_from(arm, kin),
        m_man=float(m.sum()),
        m_b=float(body_mass),
    )
