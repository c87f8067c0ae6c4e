"""Fast invariant battery run by ``aerialmanip selftest``."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np

from .dynamics import BodyState, ControlWrench, allocate_rotors, coupled_accelerations, mix_rotors
from .errors import AerialManipError
from .fixtures import centered_arm, ref_arm, ref_hex
from .hinf import CERT_TOL, GainSolution, build_error_model, closed_loop, sigma_bound, thrust_direction_gap
from .inertia import InertiaParams, com_offset, com_offset_rate, inertia_params, manipulator_inertia, manipulator_inertia_rate
from .spatial import euler_rate_matrix, rotation_from_euler, skew

INTERCONNECTION_SAMPLES = 10_000
#: Roll/pitch of the sampled attitude references, rad.
REFERENCE_TILT = 0.3


class Check(NamedTuple):
    name: str
    ok: bool
    detail: str


def _rotations(rng) -> Check:
    e = rng.uniform(-1.4, 1.4, size=(1000, 3))
    R = rotation_from_euler(e)
    orth = np.abs(np.swapaxes(R, -1, -2) @ R - np.eye(3)).max()
    det = np.abs(np.linalg.det(R) - 1).max()
    # R_dot = R skew(omega) with euler_dot = T omega
    h = 1e-6
    w = rng.normal(size=(1000, 3))
    ed = np.einsum("...ij,...j->...i", euler_rate_matrix(e), w)
    Rd = (rotation_from_euler(e + h * ed) - rotation_from_euler(e - h * ed)) / (2 * h)
    kin = np.abs(Rd - R @ skew(w)).max()
    ok = orth < 1e-12 and det < 1e-12 and kin < 1e-6
    return Check("rotation", ok, f"orthogonality {orth:.1e}, det {det:.1e}, kinematics {kin:.1e}")


def _finite_differences(rng) -> Check:
    arm, m_b = ref_arm(), ref_hex().m_b
    h = 1e-6
    worst = 0.0
    for _ in range(50):
        q, qd = rng.uniform(-math.pi, math.pi, arm.n), rng.normal(size=arm.n)
        fd_r = (com_offset(arm, q + h * qd, m_b) - com_offset(arm, q - h * qd, m_b)) / (2 * h)
        fd_I = (manipulator_inertia(arm, q + h * qd) - manipulator_inertia(arm, q - h * qd)) / (2 * h)
        r_dot, I_dot = com_offset_rate(arm, q, qd, m_b), manipulator_inertia_rate(arm, q, qd)
        worst = max(
            worst,
            np.linalg.norm(fd_r - r_dot) / max(np.linalg.norm(r_dot), 1e-12),
            np.linalg.norm(fd_I - I_dot) / max(np.linalg.norm(I_dot), 1e-12),
        )
    return Check("finite differences", worst <= 1e-5, f"worst relative error {worst:.1e}")


def _interconnection(rng) -> Check:
    veh = ref_hex()
    m_s = veh.m_b + ref_arm().mass
    sigma = sigma_bound(veh.k2, m_s)
    n = INTERCONNECTION_SAMPLES
    e = rng.uniform(-1, 1, size=(n, 3))
    d = np.column_stack([rng.uniform(-REFERENCE_TILT, REFERENCE_TILT, (n, 2)), rng.uniform(-math.pi, math.pi, n)])
    F_t = rng.uniform(0, veh.k2, n)
    h = thrust_direction_gap(d, e)
    delta = (F_t / m_s)[:, None] * h
    a = np.abs(e)
    v_norm = int(np.sum(np.linalg.norm(delta, axis=1) > sigma * np.linalg.norm(e, axis=1) * (1 + 1e-12)))
    v_xy = int(np.sum(np.abs(h[:, :2]) > (5 / 3) * a.sum(axis=1, keepdims=True) + 1e-15))
    v_z = int(np.sum(np.abs(h[:, 2]) > 0.75 * (a[:, 0] + a[:, 1]) + 1e-15))
    ok = v_norm == v_xy == v_z == 0
    return Check("interconnection bound", ok, f"{n} samples; violations norm {v_norm}, xy {v_xy}, z {v_z}")


def _mixer(rng) -> Check:
    veh = ref_hex()
    worst = 0.0
    for _ in range(200):
        speeds = rng.uniform(200, 900, 6)
        w = mix_rotors(speeds, veh)
        back = mix_rotors(allocate_rotors(w, veh), veh)
        worst = max(worst, np.abs(back.as_vector() - w.as_vector()).max())
    return Check("mixer round trip", worst <= 1e-10, f"worst wrench error {worst:.1e}")


def _hover(rng) -> Check:
    veh, arm = ref_hex(), centered_arm()
    ip = inertia_params(arm, veh.m_b, rng.uniform(-3, 3, 1), np.zeros(1))
    ip = InertiaParams.static(ip.r_oc, ip.I_man, ip.m_man, ip.m_b)
    m_s = ip.m_s
    body = BodyState(p=rng.normal(size=3), euler=[0.0, 0.0, rng.uniform(-3, 3)])
    a, wd = coupled_accelerations(body, ip, ControlWrench(m_s * veh.g, np.zeros(3)), veh)
    worst = max(np.abs(a).max(), np.abs(wd).max())
    return Check("hover equilibrium", worst <= 1e-12, f"max acceleration {worst:.1e}")


def _gains(path: Path | None) -> Check:
    if path is None:
        return Check("gains file", True, "skipped (none given)")
    veh = ref_hex()
    try:
        sol = GainSolution.load(path)
        model = build_error_model(sol.sigma)
        res = sol.check(model)
        eig = np.linalg.eigvals(closed_loop(sol, model)).real.max()
        expected = sigma_bound(veh.k2, veh.m_b + ref_arm().mass)
    except (AerialManipError, OSError, np.linalg.LinAlgError) as exc:
        return Check("gains file", False, f"{path}: {exc}")
    ok = res <= CERT_TOL and eig < 0 and sol.sigma > 0
    note = "" if math.isclose(sol.sigma, expected, rel_tol=1e-9) else f" (sigma {sol.sigma:.4g} is not the fixture's)"
    return Check("gains file", ok, f"residual {res:.1e}, max Re(eig) {eig:.3g}{note}")


BATTERY: tuple[Callable, ...] = (_rotations, _finite_differences, _interconnection, _mixer, _hover)


def run_selftest(seed: int = 0, gains: Path | None = None) -> list[Check]:
    """Run every check with one seeded generator; the report is deterministic."""
    rng = np.random.default_rng(seed)
    out = []
    for fn in BATTERY:
        try:
            out.append(fn(rng))
        except AerialManipError as exc:
            out.append(Check(fn.__name__.strip("_"), False, f"raised {type(exc).__name__}: {exc}"))
    out.append(_gains(gains))
    return out
