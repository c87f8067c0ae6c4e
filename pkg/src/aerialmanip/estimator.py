"""Derivative estimation and model-based disturbance estimates.

Angular acceleration and the CoM-offset acceleration are not measured; each is
recovered by a bank of independent constant-rate Kalman filters fed with the
corresponding measured rate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .dynamics import BodyState, force_disturbance, torque_disturbance
from .errors import EmptySeries, NonFiniteMeasurement, ValidationError
from .inertia import InertiaParams

#: Samples with a reference magnitude below this are excluded from MAPD (N*m).
MAPD_FLOOR = 1e-3


class DerivativeKF:
    """Independent two-state (value, rate) Kalman filters, one per axis.

    The model is a constant-rate random walk sampled every ``dt``; only the
    value is measured. Process noise is ``diag(q_value, q_rate) * dt``.
    """

    def __init__(
        self,
        dt: float,
        axes: int = 3,
        q_value: float = 1e-4,
        q_rate: float = 1e-1,
        r: float = 1e-4,
        x0: ArrayLike | None = None,
    ) -> None:
        if not dt > 0:
            raise ValidationError("dt must be positive")
        self.dt = float(dt)
        self.F = np.array([[1.0, dt], [0.0, 1.0]])
        self.Q = np.diag([q_value, q_rate]) * dt
        self.R = float(r)
        self.x = np.zeros((axes, 2))
        if x0 is not None:
            self.x[:, 0] = np.asarray(x0, dtype=float)
        self.P = np.broadcast_to(np.diag([r, 1.0]), (axes, 2, 2)).copy()
        self._primed = x0 is not None

    @property
    def value(self) -> NDArray[np.float64]:
        return self.x[:, 0].copy()

    @property
    def rate(self) -> NDArray[np.float64]:
        return self.x[:, 1].copy()

    def step(self, measurement: ArrayLike) -> NDArray[np.float64]:
        """Predict one period, fuse ``measurement``, return the rate estimate."""
        z = np.asarray(measurement, dtype=float)
        if not np.all(np.isfinite(z)):
            raise NonFiniteMeasurement(f"non-finite measurement {z}")
        if not self._primed:
            self.x[:, 0] = z
            self._primed = True
            return self.rate
        F = self.F
        x = self.x @ F.T
        P = F @ self.P @ F.T + self.Q
        S = P[:, 0, 0] + self.R
        K = P[:, :, 0] / S[:, None]
        x = x + K * (z - x[:, 0])[:, None]
        P = P - K[:, :, None] * P[:, None, 0, :]
        self.x = x
        self.P = 0.5 * (P + np.swapaxes(P, -1, -2))
        return self.rate


class DisturbanceEstimate(NamedTuple):
    F_hat: NDArray[np.float64]
    tau_hat: NDArray[np.float64]


def estimate_disturbance(
    body: BodyState,
    inertia: InertiaParams,
    omega_dot: ArrayLike,
    r_oc_ddot: ArrayLike,
    v_dot: ArrayLike,
    g: float = 9.81,
) -> DisturbanceEstimate:
    """Force and torque disturbance from measured states and estimated derivatives.

    ``inertia`` holds measured variable inertia parameters; its ``r_oc_ddot`` is
    replaced by the estimate. ``v_dot`` is the translational acceleration used in
    the gravity-moment term (the loop passes the previous cycle's model value).
    """
    est = InertiaParams(
        inertia.r_oc, inertia.r_oc_dot, np.asarray(r_oc_ddot, dtype=float), inertia.I_man,
        inertia.I_man_dot, inertia.L_man, inertia.L_man_dot, inertia.m_man, inertia.m_b,
    )  # fmt: skip
    F = force_disturbance(body, est, omega_dot)
    tau = torque_disturbance(body, est, omega_dot, v_dot, g)
    return DisturbanceEstimate(F, tau)


@dataclass
class DisturbanceEstimator:
    """Owns the two derivative filters and the one-cycle-lagged ``v_dot``."""

    dt: float
    g: float = 9.81
    q_value: float = 1e-4
    q_rate: float = 1e-1
    r: float = 1e-4

    def __post_init__(self) -> None:
        kw = dict(q_value=self.q_value, q_rate=self.q_rate, r=self.r)
        self.omega_kf = DerivativeKF(self.dt, **kw)
        self.roc_kf = DerivativeKF(self.dt, **kw)
        self.v_dot_prev = np.array([0.0, 0.0, 0.0])

    def update(self, body: BodyState, inertia: InertiaParams) -> tuple[DisturbanceEstimate, NDArray, NDArray]:
        """Advance both filters, return ``(estimate, omega_dot_hat, r_oc_ddot_hat)``."""
        omega_dot = self.omega_kf.step(body.omega)
        r_oc_ddot = self.roc_kf.step(inertia.r_oc_dot)
        est = estimate_disturbance(body, inertia, omega_dot, r_oc_ddot, self.v_dot_prev, self.g)
        return est, omega_dot, r_oc_ddot

    def record_model_acceleration(self, v_dot: ArrayLike) -> None:
        self.v_dot_prev = np.asarray(v_dot, dtype=float).copy()


def mapd(estimated: ArrayLike, measured: ArrayLike, floor: float = MAPD_FLOOR) -> NDArray[np.float64]:
    """Mean absolute percentage deviation per axis (last axis), in percent.

    Samples whose measured magnitude is below ``floor`` are skipped.

    Raises:
        EmptySeries: if the series are empty or an axis has no usable sample.
    """
    est = np.asarray(estimated, dtype=float)
    ref = np.asarray(measured, dtype=float)
    if est.shape != ref.shape:
        raise ValidationError(f"shape mismatch {est.shape} vs {ref.shape}")
    if est.size == 0:
        raise EmptySeries("no samples")
    if est.ndim == 1:
        est, ref = est[:, None], ref[:, None]
    keep = np.abs(ref) >= floor
    if np.any(keep.sum(axis=0) == 0):
        raise EmptySeries("an axis has no samples above the floor")
    ratio = np.where(keep, np.abs((est - ref) / np.where(keep, ref, 1.0)), 0.0)
    return 100.0 * ratio.sum(axis=0) / keep.sum(axis=0)
