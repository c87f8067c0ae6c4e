"""Fixed-step closed-loop simulation of the hex-rotor carrying a moving arm.

The plant is integrated with classical RK4 at ``sim_dt``; the controller runs
with zero-order hold every ``control_dt``. Arm quantities depend on time only, so
they are precomputed for every RK4 stage time in one batched pass.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import nnls

from ._kernels import rk4_hold
from .arm import ArmModel
from .controller import AttitudeRefFilter, Setpoint, control_step
from .dynamics import (
    BodyState,
    ControlWrench,
    InertiaParams,
    Momentum,
    PlantTerms,
    VehicleParams,
    _terms_accelerations,
    allocate_rotors,
    mix_rotors,
    plant_disturbance,
    plant_terms,
)
from .errors import Diverged, EmptyWindow, InfeasibleWrench, SingularAttitude, ValidationError
from .estimator import DisturbanceEstimate, DisturbanceEstimator, estimate_disturbance
from .inertia import inertia_params
from .spatial import E3, SINGULARITY_MARGIN, wrap_angle
from .trajectory import JointTrajectory

log = logging.getLogger(__name__)

DIVERGENCE_RADIUS = 100.0
PITCH_LIMIT = math.pi / 2 - SINGULARITY_MARGIN


@dataclass(frozen=True)
class NoiseSpec:
    """Standard deviations of additive Gaussian sensor noise.

    Velocity and joint-rate noise default to zero; they are available for
    sensitivity studies.
    """

    position: float = 2e-3
    velocity: float = 0.0
    attitude: float = math.radians(0.2)
    omega: float = 0.01
    joint_angle: float = math.radians(0.05)
    joint_rate: float = 0.0

    @classmethod
    def none(cls) -> "NoiseSpec":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class EstimatorConfig:
    q_value: float = 1e-4
    q_rate: float = 1e-1
    r: float = 1e-4
    exact_derivatives: bool = False


@dataclass
class Scenario:
    vehicle: VehicleParams
    arm: ArmModel
    trajectory: JointTrajectory
    K: NDArray[np.float64]
    duration: float
    sim_dt: float = 1e-3
    control_dt: float = 5e-3
    compensation: Sequence[tuple[float, bool]] = ((0.0, True),)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    setpoint: Setpoint = field(default_factory=Setpoint)
    initial: BodyState | None = None
    ref_filter_tau: float = 0.05
    use_rotors: bool = True
    seed: int = 0
    plant_momentum: Momentum = "exact"

    def __post_init__(self) -> None:
        if not self.duration > 0:
            raise ValidationError("duration must be positive")
        if not (0 < self.sim_dt <= self.control_dt):
            raise ValidationError("need 0 < sim_dt <= control_dt")
        ratio = self.control_dt / self.sim_dt
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValidationError("control_dt must be an integer multiple of sim_dt")
        if self.trajectory.n != self.arm.n:
            raise ValidationError("trajectory and arm have different joint counts")
        self.K = np.asarray(self.K, dtype=float)
        if self.K.shape != (6, 12):
            raise ValidationError(f"gain must be 6x12, got {self.K.shape}")

    @property
    def m_s(self) -> float:
        return self.vehicle.m_b + self.arm.mass

    def compensation_at(self, t: float) -> bool:
        state = True
        for t0, on in sorted(self.compensation):
            if t >= t0 - 1e-12:
                state = bool(on)
        return state


@dataclass
class RunLog:
    """Per-control-cycle samples. Arrays have one row per cycle."""

    t: NDArray[np.float64]
    state: NDArray[np.float64]
    errors: NDArray[np.float64]
    dist_true: NDArray[np.float64]
    dist_est: NDArray[np.float64]
    dist_model: NDArray[np.float64]
    wrench: NDArray[np.float64]
    q: NDArray[np.float64]
    compensation: NDArray[np.bool_]
    saturated: NDArray[np.bool_]
    allocation_clamped: NDArray[np.bool_]

    COLUMNS = (
        ["t"]
        + ["x", "y", "z", "vx", "vy", "vz", "phi", "theta", "psi", "wx", "wy", "wz"]
        + ["e_x", "e_y", "e_z", "e_psi"]
        + ["F_dis_x", "F_dis_y", "F_dis_z", "tau_dis_x", "tau_dis_y", "tau_dis_z"]
        + ["F_hat_x", "F_hat_y", "F_hat_z", "tau_hat_x", "tau_hat_y", "tau_hat_z"]
        + ["F_t", "tau_x", "tau_y", "tau_z"]
        + ["compensation", "saturated", "allocation_clamped"]
    )

    def table(self) -> NDArray[np.float64]:
        return np.column_stack(
            [
                self.t, self.state, self.errors, self.dist_true, self.dist_est, self.wrench,
                self.compensation.astype(float), self.saturated.astype(float),
                self.allocation_clamped.astype(float),
            ]
        )  # fmt: skip

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.COLUMNS)
            flags = len(self.COLUMNS) - 3
            for row in self.table():
                w.writerow([repr(float(v)) for v in row[:flags]] + [int(v) for v in row[flags:]])

    @classmethod
    def from_csv(cls, path: str | Path) -> "RunLog":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != cls.COLUMNS:
                raise ValidationError(f"{path}: unexpected CSV header")
            data = np.array([[float(v) for v in row] for row in reader])
        if data.size == 0:
            data = np.zeros((0, len(cls.COLUMNS)))
        c = np.cumsum([0, 1, 12, 4, 6, 6, 4, 1, 1, 1])
        s = [data[:, c[i] : c[i + 1]] for i in range(len(c) - 1)]
        return cls(
            t=s[0][:, 0], state=s[1], errors=s[2], dist_true=s[3], dist_est=s[4],
            dist_model=np.full_like(s[3], np.nan), wrench=s[5], q=np.zeros((len(data), 0)),
            compensation=s[6][:, 0] > 0.5, saturated=s[7][:, 0] > 0.5, allocation_clamped=s[8][:, 0] > 0.5,
        )  # fmt: skip

    def window(self, t0: float, t1: float) -> NDArray[np.bool_]:
        return (self.t >= t0) & (self.t < t1)


def _R_T(phi: float, theta: float, psi: float):
    cf, sf = math.cos(phi), math.sin(phi)
    ct, st = math.cos(theta), math.sin(theta)
    cp, sp = math.cos(psi), math.sin(psi)
    R = np.array(
        [
            [ct * cp, sf * st * cp - cf * sp, cf * st * cp + sf * sp],
            [ct * sp, sf * st * sp + cf * cp, cf * st * sp - sf * cp],
            [-st, sf * ct, cf * ct],
        ]
    )
    tt = st / ct
    T = np.array([[1.0, sf * tt, cf * tt], [0.0, cf, -sf], [0.0, sf / ct, cf / ct]])
    return R, T


def _derivative(x, pt: PlantTerms, F_t, tau, g):
    if abs(x[7]) >= PITCH_LIMIT:
        raise SingularAttitude(f"pitch {x[7]:.4f} rad")
    R, T = _R_T(x[6], x[7], x[8])
    omega = x[9:12]
    r_ddot, omega_dot = _terms_accelerations(R, omega, F_t, tau, pt, g)
    return np.concatenate([x[3:6], r_ddot, T @ omega, omega_dot])


def rk4_step(
    body: BodyState,
    stages: tuple[InertiaParams, InertiaParams, InertiaParams],
    wrench: ControlWrench,
    dt: float,
    vehicle: VehicleParams,
    momentum: Momentum = "exact",
) -> BodyState:
    """One classical RK4 step; ``stages`` are the arm parameters at t, t+dt/2, t+dt."""
    pts = tuple(plant_terms(ip, vehicle.I_b, momentum) for ip in stages)
    x = _rk4(body.as_vector(), pts, float(wrench.F_t), np.asarray(wrench.tau, float), dt, vehicle.g)
    return BodyState.from_vector(x)


def _rk4(x, stages, F_t, tau, dt, g):
    p0, ph, p1 = stages
    k1 = _derivative(x, p0, F_t, tau, g)
    k2 = _derivative(x + 0.5 * dt * k1, ph, F_t, tau, g)
    k3 = _derivative(x + 0.5 * dt * k2, ph, F_t, tau, g)
    k4 = _derivative(x + dt * k3, p1, F_t, tau, g)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def arm_samples(arm: ArmModel, trajectory: JointTrajectory, m_b: float, times: ArrayLike):
    """Variable inertia parameters (batched) and joint states at ``times``."""
    q, qd, qdd = trajectory(times)
    return inertia_params(arm, m_b, q, qd, qdd), (q, qd, qdd)


def integrate_open_loop(
    body: BodyState,
    arm: ArmModel,
    trajectory: JointTrajectory,
    vehicle: VehicleParams,
    wrench: ControlWrench,
    duration: float,
    dt: float,
    momentum: Momentum = "exact",
    record_every: int = 1,
):
    """Integrate with a constant wrench; returns ``(times, states, arm params at times)``."""
    n = int(round(duration / dt))
    ips, _ = arm_samples(arm, trajectory, vehicle.m_b, 0.5 * dt * np.arange(2 * n + 1))
    pts = plant_terms(ips, vehicle.I_b, momentum)
    x = body.as_vector()
    F_t, tau = float(wrench.F_t), np.asarray(wrench.tau, float)
    ts, xs, idx = [0.0], [x.copy()], [0]
    for i in range(n):
        x = _rk4(x, (pts.at(2 * i), pts.at(2 * i + 1), pts.at(2 * i + 2)), F_t, tau, dt, vehicle.g)
        if (i + 1) % record_every == 0:
            ts.append((i + 1) * dt)
            xs.append(x.copy())
            idx.append(2 * (i + 1))
    return np.array(ts), np.array(xs), ips[np.array(idx)]


def realize_wrench(wrench: ControlWrench, vehicle: VehicleParams) -> tuple[ControlWrench, bool]:
    """Pass a command through rotor allocation; fall back to the best non-negative fit."""
    try:
        return mix_rotors(allocate_rotors(wrench, vehicle), vehicle), False
    except InfeasibleWrench:
        w = wrench.as_vector()
        w[0] = min(max(w[0], 0.0), vehicle.k2)
        sq, _ = nnls(vehicle.mixer, w)
        return mix_rotors(np.sqrt(sq), vehicle), True


def run_scenario(sc: Scenario) -> RunLog:
    """Closed-loop run; one log row per control cycle.

    Raises:
        Diverged: position beyond 100 m, non-finite state, or singular attitude.
    """
    veh, arm = sc.vehicle, sc.arm
    m_s = sc.m_s
    n_sub = int(round(sc.control_dt / sc.sim_dt))
    n_ctrl = int(math.floor(sc.duration / sc.control_dt + 1e-9))
    n_sim = n_ctrl * n_sub
    dt = sc.sim_dt
    ips, (q_all, qd_all, _) = arm_samples(arm, sc.trajectory, veh.m_b, 0.5 * dt * np.arange(2 * n_sim + 1))
    pts = plant_terms(ips, veh.I_b, sc.plant_momentum)

    rng = np.random.default_rng(sc.seed)
    ns = sc.noise
    est = DisturbanceEstimator(sc.control_dt, veh.g, sc.estimator.q_value, sc.estimator.q_rate, sc.estimator.r)
    ref = AttitudeRefFilter(sc.control_dt, sc.ref_filter_tau)
    sp = sc.setpoint

    body0 = sc.initial if sc.initial is not None else BodyState(p=sp.p, euler=[0.0, 0.0, sp.psi])
    x = body0.as_vector()

    # all noise drawn up front so the measured arm parameters can be batched
    sigma_body = np.concatenate([[ns.position] * 3, [ns.velocity] * 3, [ns.attitude] * 3, [ns.omega] * 3])
    body_noise = rng.standard_normal((n_ctrl, 12)) * sigma_body
    ctrl_idx = 2 * n_sub * np.arange(n_ctrl)
    q_meas = q_all[ctrl_idx] + rng.standard_normal((n_ctrl, arm.n)) * ns.joint_angle
    qd_meas = qd_all[ctrl_idx] + rng.standard_normal((n_ctrl, arm.n)) * ns.joint_rate
    ips_meas = inertia_params(arm, veh.m_b, q_meas, qd_meas)

    rows = {k: [] for k in ("t", "state", "errors", "true", "est", "model", "wrench", "q", "comp", "sat", "clamp")}
    exact_prev: DisturbanceEstimate | None = None

    for k in range(n_ctrl):
        i = k * n_sub
        t = i * dt
        ip_true = ips[2 * i]
        body = BodyState.from_vector(x)

        meas = BodyState.from_vector(x + body_noise[k])
        meas.euler = wrap_angle(meas.euler)
        ip_meas = ips_meas[k]

        estimate, _, _ = est.update(meas, ip_meas)
        if sc.estimator.exact_derivatives:
            estimate = exact_prev if exact_prev is not None else estimate

        comp = sc.compensation_at(t)
        try:
            out, ref = control_step(meas, sp, sc.K, estimate, comp, veh, m_s, ref)
            applied, clamped = (realize_wrench(out.wrench, veh) if sc.use_rotors else (out.wrench, False))
            R = meas.R
            est.record_model_acceleration(-applied.F_t / m_s * R[:, 2] + veh.g * E3 + estimate.F_hat / m_s)

            R_true = body.R
            acc = _terms_accelerations(R_true, body.omega, applied.F_t, applied.tau, pts.at(2 * i), veh.g)
        except SingularAttitude as exc:
            raise Diverged(f"attitude singular at t={t:.3f}: {exc}") from exc
        true = plant_disturbance(body, applied, acc, veh, m_s)
        model = estimate_disturbance(body, ip_true, acc[1], ip_true.r_oc_ddot, acc[0], veh.g)
        exact_prev = DisturbanceEstimate(model.F_hat, model.tau_hat)

        e_out = np.concatenate([body.p - sp.p, [wrap_angle(body.euler[2] - sp.psi)]])
        rows["t"].append(t)
        rows["state"].append(x.copy())
        rows["errors"].append(e_out)
        rows["true"].append(np.concatenate([true.F_dis, true.tau_dis]))
        rows["est"].append(np.concatenate([estimate.F_hat, estimate.tau_hat]))
        rows["model"].append(np.concatenate([model.F_hat, model.tau_hat]))
        rows["wrench"].append(applied.as_vector())
        rows["q"].append(q_all[2 * i])
        rows["comp"].append(comp)
        rows["sat"].append(out.saturated)
        rows["clamp"].append(clamped)

        F_t, tau = float(applied.F_t), np.asarray(applied.tau, float)
        x, ok = rk4_hold(x, i, n_sub, dt, F_t, tau, veh.g, *pts, PITCH_LIMIT)
        if not ok:
            raise Diverged(f"attitude singular near t={t:.3f}")
        if not np.all(np.isfinite(x)) or np.linalg.norm(x[:3]) > DIVERGENCE_RADIUS:
            raise Diverged(f"state left the admissible region near t={t:.3f}")

    return RunLog(
        t=np.array(rows["t"]),
        state=np.array(rows["state"]),
        errors=np.array(rows["errors"]),
        dist_true=np.array(rows["true"]),
        dist_est=np.array(rows["est"]),
        dist_model=np.array(rows["model"]),
        wrench=np.array(rows["wrench"]),
        q=np.array(rows["q"]),
        compensation=np.array(rows["comp"], dtype=bool),
        saturated=np.array(rows["sat"], dtype=bool),
        allocation_clamped=np.array(rows["clamp"], dtype=bool),
    )


def error_metrics(log: RunLog, window: tuple[float, float]) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Mean and variance of ``|e|`` for ``(x, y, z, psi)`` over ``[t0, t1)``.

    Raises:
        EmptyWindow: if no sample falls in the window.
    """
    m = log.window(*window)
    if not np.any(m):
        raise EmptyWindow(f"window {window} selects no samples")
    a = np.abs(log.errors[m])
    return a.mean(axis=0), a.var(axis=0)
