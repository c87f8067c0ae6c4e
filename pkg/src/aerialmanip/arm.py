"""Standard-DH kinematics of a revolute arm mounted under the UAV body.

Every quantity is expressed in the UAV body frame and is relative to it, i.e. the
arm velocities are those seen by an observer riding on the body. Joint vectors may
carry leading batch axes: ``q`` of shape ``(..., n)`` yields link quantities of
shape ``(..., n, 3)`` or ``(..., n, 3, 3)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import ValidationError


@dataclass(frozen=True)
class DHRow:
    """One standard Denavit-Hartenberg row of a revolute joint.

    The link transform is ``Rz(q + theta_offset) Tz(d) Tx(a) Rx(alpha)``.
    """

    a: float
    alpha: float
    d: float = 0.0
    theta_offset: float = 0.0


@dataclass(frozen=True)
class LinkProps:
    """Mass properties of one link, expressed in that link's DH frame."""

    mass: float
    com_local: NDArray[np.float64]
    inertia_local: NDArray[np.float64]

    def __post_init__(self) -> None:
        com = np.asarray(self.com_local, dtype=float).reshape(3)
        inertia = np.asarray(self.inertia_local, dtype=float).reshape(3, 3)
        if not self.mass > 0:
            raise ValidationError(f"link mass must be positive, got {self.mass}")
        if not np.allclose(inertia, inertia.T, atol=1e-12):
            raise ValidationError("link inertia must be symmetric")
        if np.linalg.eigvalsh(inertia).min() < -1e-12:
            raise ValidationError("link inertia must be positive semidefinite")
        object.__setattr__(self, "com_local", com)
        object.__setattr__(self, "inertia_local", inertia)

    @classmethod
    def rod(cls, mass: float, length: float) -> "LinkProps":
        """Thin rod along the link x-axis, CoM at mid-link.

        In standard DH the link frame sits at the distal joint, so the midpoint is
        at ``x = -length / 2``.
        """
        transverse = mass * length**2 / 12.0
        return cls(mass, np.array([-length / 2.0, 0.0, 0.0]), np.diag([0.0, transverse, transverse]))


@dataclass(frozen=True)
class ArmMount:
    """Fixed transform from the arm base frame into the body frame."""

    rotation: NDArray[np.float64] = field(default_factory=lambda: np.eye(3))
    translation: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self) -> None:
        R = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        if not np.allclose(R.T @ R, np.eye(3), atol=1e-10) or np.linalg.det(R) < 0:
            raise ValidationError("mount rotation must be a proper rotation")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=float).reshape(3))


class ArmState(NamedTuple):
    q: NDArray[np.float64]
    qdot: NDArray[np.float64]
    qddot: NDArray[np.float64]


class LinkKinematics(NamedTuple):
    """Per-link kinematic quantities, all in the body frame.

    ``R`` are link rotations, ``origin`` the DH frame origins, ``p``/``v``/``a`` the
    CoM position/velocity/acceleration and ``w``/``wdot`` the link angular velocity
    and acceleration.
    """

    R: NDArray[np.float64]
    origin: NDArray[np.float64]
    p: NDArray[np.float64]
    v: NDArray[np.float64]
    a: NDArray[np.float64]
    w: NDArray[np.float64]
    wdot: NDArray[np.float64]


def _dh_transform(row: DHRow, q: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    th = q + row.theta_offset
    ct, st = np.cos(th), np.sin(th)
    ca, sa = np.cos(row.alpha), np.sin(row.alpha)
    R = np.empty(q.shape + (3, 3))
    R[..., 0, 0] = ct
    R[..., 0, 1] = -st * ca
    R[..., 0, 2] = st * sa
    R[..., 1, 0] = st
    R[..., 1, 1] = ct * ca
    R[..., 1, 2] = -ct * sa
    R[..., 2, 0] = 0.0
    R[..., 2, 1] = sa
    R[..., 2, 2] = ca
    t = np.stack([row.a * ct, row.a * st, np.full_like(th, row.d)], axis=-1)
    return R, t


@dataclass(frozen=True)
class ArmModel:
    """A serial revolute chain: DH table, link mass properties, and mount."""

    dh: tuple[DHRow, ...]
    links: tuple[LinkProps, ...]
    mount: ArmMount = field(default_factory=ArmMount)

    def __post_init__(self) -> None:
        object.__setattr__(self, "dh", tuple(self.dh))
        object.__setattr__(self, "links", tuple(self.links))
        if len(self.dh) < 1:
            raise ValidationError("arm needs at least one joint")
        if len(self.dh) != len(self.links):
            raise ValidationError("DH table and link list must have the same length")

    @property
    def n(self) -> int:
        return len(self.dh)

    @property
    def masses(self) -> NDArray[np.float64]:
        return np.array([link.mass for link in self.links])

    @property
    def mass(self) -> float:
        return float(sum(link.mass for link in self.links))

    def _q(self, q: ArrayLike) -> NDArray[np.float64]:
        q = np.asarray(q, dtype=float)
        if q.shape[-1:] != (self.n,):
            raise ValidationError(f"expected joint vector of length {self.n}, got shape {q.shape}")
        return q

    def frames(self, q: ArrayLike) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        """Rotations and origins of base frame 0 through frame n, shape ``(..., n+1, 3[, 3])``."""
        q = self._q(q)
        batch = q.shape[:-1]
        Rs = [np.broadcast_to(self.mount.rotation, batch + (3, 3))]
        os = [np.broadcast_to(self.mount.translation, batch + (3,))]
        for j, row in enumerate(self.dh):
            Rl, tl = _dh_transform(row, q[..., j])
            os.append(os[-1] + np.einsum("...ij,...j->...i", Rs[-1], tl))
            Rs.append(Rs[-1] @ Rl)
        return np.stack(Rs, axis=-3), np.stack(os, axis=-2)

    def link_rotations(self, q: ArrayLike) -> NDArray[np.float64]:
        """Rotations from each link frame into the body frame."""
        return self.frames(q)[0][..., 1:, :, :]

    def com_positions(self, q: ArrayLike) -> NDArray[np.float64]:
        """Link CoM positions in the body frame."""
        Rs, os = self.frames(q)
        com = np.stack([link.com_local for link in self.links])
        return os[..., 1:, :] + np.einsum("...jik,jk->...ji", Rs[..., 1:, :, :], com)

    def com_jacobians(self, q: ArrayLike) -> NDArray[np.float64]:
        """Stacked ``[linear; angular]`` CoM Jacobians, shape ``(..., n, 6, n)``."""
        q = self._q(q)
        Rs, os = self.frames(q)
        p = self.com_positions(q)
        n = self.n
        J = np.zeros(q.shape[:-1] + (n, 6, n))
        for i in range(n):
            z = Rs[..., i, :, 2]
            o = os[..., i, :]
            for j in range(i, n):
                J[..., j, :3, i] = np.cross(z, p[..., j, :] - o)
                J[..., j, 3:, i] = z
        return J

    def com_velocities(self, q: ArrayLike, qdot: ArrayLike) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        """CoM linear velocities and link angular velocities, each ``(..., n, 3)``."""
        J = self.com_jacobians(q)
        tw = np.einsum("...jkl,...l->...jk", J, np.asarray(qdot, dtype=float))
        return tw[..., :3], tw[..., 3:]

    def kinematics(self, q: ArrayLike, qdot: ArrayLike, qddot: ArrayLike | None = None) -> LinkKinematics:
        """Positions, velocities and accelerations of every link by forward recursion."""
        q = self._q(q)
        qdot = np.broadcast_to(np.asarray(qdot, dtype=float), q.shape)
        qddot = np.zeros_like(q) if qddot is None else np.broadcast_to(np.asarray(qddot, dtype=float), q.shape)
        Rs, os = self.frames(q)
        batch = q.shape[:-1]
        w = np.zeros(batch + (3,))
        wd = np.zeros(batch + (3,))
        vo = np.zeros(batch + (3,))
        ao = np.zeros(batch + (3,))
        out_p, out_v, out_a, out_w, out_wd = [], [], [], [], []
        for j, link in enumerate(self.links):
            z = Rs[..., j, :, 2]
            w_prev = w
            w = w_prev + z * qdot[..., j, None]
            wd = wd + z * qddot[..., j, None] + np.cross(w_prev, z * qdot[..., j, None])
            r = os[..., j + 1, :] - os[..., j, :]
            vo = vo + np.cross(w, r)
            ao = ao + np.cross(wd, r) + np.cross(w, np.cross(w, r))
            s = np.einsum("...ik,k->...i", Rs[..., j + 1, :, :], link.com_local)
            out_p.append(os[..., j + 1, :] + s)
            out_v.append(vo + np.cross(w, s))
            out_a.append(ao + np.cross(wd, s) + np.cross(w, np.cross(w, s)))
            out_w.append(w)
            out_wd.append(wd)
        return LinkKinematics(
            R=Rs[..., 1:, :, :],
            origin=os[..., 1:, :],
            p=np.stack(out_p, axis=-2),
            v=np.stack(out_v, axis=-2),
            a=np.stack(out_a, axis=-2),
            w=np.stack(out_w, axis=-2),
            wdot=np.stack(out_wd, axis=-2),
        )


def make_arm(dh: Sequence[DHRow], links: Sequence[LinkProps], mount: ArmMount | None = None) -> ArmModel:
    return ArmModel(tuple(dh), tuple(links), mount if mount is not None else ArmMount())
