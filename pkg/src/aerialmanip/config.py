"""TOML scenario configuration.

A config file has these tables (all optional except where noted)::

    [vehicle]      m_b, I_b (3 diagonal entries or 3x3), c_T, c_tau, d, g, k2
    [arm]          base_offset (m, along body z) or mount_translation / mount_rotation
    [[arm.link]]   a, alpha, d, theta_offset, mass; optional com, inertia (else a rod)
    [synthesis]    gamma_min, gamma_max, lambda, rel_tol, structure, pole_radius
    [controller]   gains (JSON path, relative to the config file), ref_filter_tau
    [simulation]   profile, duration, sim_dt, control_dt, seed, compensation,
                   schedule, plant_momentum, use_rotors
    [profile]      period, blend, switch (estimation profile only)
    [[trajectory.joint]]  segments = [{kind, start, end, ...}] for profile = "custom"
    [noise]        position, velocity, attitude_deg, omega, joint_angle_deg, joint_rate_deg
    [estimator]    q_value, q_rate, r, exact_derivatives
    [setpoint]     p, psi
    [metrics]      warmup, comparisons = [[[t0, t1], [t0, t1]], ...] (off window, on window)

Missing vehicle/arm tables fall back to the REF-HEX / REF-ARM fixture.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .arm import ArmModel, ArmMount, DHRow, LinkProps
from .controller import Setpoint
from .dynamics import VehicleParams
from .errors import ValidationError
from .fixtures import ref_arm, ref_hex
from .hinf import GainSolution, build_error_model, sigma_bound, synthesize
from .simulator import EstimatorConfig, NoiseSpec, Scenario
from .trajectory import HOVER_PHASES, HOVER_SWITCH, JointTrajectory, Segment, estimation_profile, hover_profile

PROFILES = ("estimation", "hover", "custom")


@dataclass(frozen=True)
class SynthesisConfig:
    gamma_min: float = 0.5
    gamma_max: float = 100.0
    lam: float = 1.0
    rel_tol: float = 0.01
    structure: str = "decoupled"
    pole_radius: tuple[float, float] | float | None = (8.0, 40.0)

    def run(self, vehicle: VehicleParams, m_s: float) -> GainSolution:
        model = build_error_model(sigma_bound(vehicle.k2, m_s))
        return synthesize(
            model,
            (self.gamma_min, self.gamma_max),
            self.lam,
            self.rel_tol,
            structure=self.structure,
            pole_radius=self.pole_radius,
        )


@dataclass
class Config:
    """Everything a CLI command needs; :meth:`scenario` assembles a run."""

    vehicle: VehicleParams
    arm: ArmModel
    synthesis: SynthesisConfig = field(default_factory=SynthesisConfig)
    gains_path: Path | None = None
    ref_filter_tau: float = 0.05
    profile: str = "hover"
    profile_options: dict[str, Any] = field(default_factory=dict)
    custom_joints: list[list[Segment]] | None = None
    duration: float = 110.0
    sim_dt: float = 1e-3
    control_dt: float = 5e-3
    seed: int = 0
    compensation: str = "schedule"
    schedule: tuple[tuple[float, bool], ...] = ((0.0, False), (HOVER_SWITCH, True))
    plant_momentum: str = "exact"
    use_rotors: bool = True
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    setpoint: Setpoint = field(default_factory=Setpoint)
    warmup: float = 2.0
    comparisons: tuple[tuple[tuple[float, float], tuple[float, float]], ...] = ()
    source: Path | None = None

    @property
    def m_s(self) -> float:
        return self.vehicle.m_b + self.arm.mass

    def trajectory(self) -> JointTrajectory:
        if self.profile == "estimation":
            return estimation_profile(duration=self.duration, **self.profile_options)
        if self.profile == "hover":
            return hover_profile(**self.profile_options)
        if not self.custom_joints:
            raise ValidationError("profile 'custom' needs [[trajectory.joint]] entries")
        return JointTrajectory(self.custom_joints)

    def compensation_schedule(self, mode: str | None = None) -> tuple[tuple[float, bool], ...]:
        mode = mode or self.compensation
        if mode == "on":
            return ((0.0, True),)
        if mode == "off":
            return ((0.0, False),)
        if mode == "schedule":
            return self.schedule
        raise ValidationError(f"compensation must be on, off or schedule, got {mode!r}")

    def gains(self) -> GainSolution:
        """Load the configured gains file, or synthesize when none is given."""
        if self.gains_path is not None:
            if not self.gains_path.exists():
                raise ValidationError(f"gains file {self.gains_path} does not exist")
            return GainSolution.load(self.gains_path)
        return self.synthesis.run(self.vehicle, self.m_s)

    def scenario(self, K: np.ndarray, seed: int | None = None, compensation: str | None = None) -> Scenario:
        return Scenario(
            vehicle=self.vehicle,
            arm=self.arm,
            trajectory=self.trajectory(),
            K=K,
            duration=self.duration,
            sim_dt=self.sim_dt,
            control_dt=self.control_dt,
            compensation=self.compensation_schedule(compensation),
            noise=self.noise,
            estimator=self.estimator,
            setpoint=self.setpoint,
            ref_filter_tau=self.ref_filter_tau,
            use_rotors=self.use_rotors,
            seed=self.seed if seed is None else seed,
            plant_momentum=self.plant_momentum,  # type: ignore[arg-type]
        )

    def metric_windows(self) -> tuple[tuple[tuple[float, float], tuple[float, float]], ...]:
        """Off/on window pairs; defaults to the hover A/B protocol minus ``warmup`` s."""
        if self.comparisons:
            return self.comparisons
        w = self.warmup
        (a0, a1), (b0, b1), (c0, c1), (d0, d1) = HOVER_PHASES
        return (((a0 + w, a1), (c0 + w, c1)), ((b0 + w, b1), (d0 + w, d1)))


def _table(d: dict, key: str) -> dict:
    v = d.get(key, {})
    if not isinstance(v, dict):
        raise ValidationError(f"[{key}] must be a table")
    return v


def _check_keys(table: dict, allowed: set[str], name: str) -> None:
    extra = set(table) - allowed
    if extra:
        raise ValidationError(f"unknown keys in [{name}]: {sorted(extra)}")


def _matrix3(v: Any, name: str) -> np.ndarray:
    a = np.asarray(v, dtype=float)
    if a.shape == (3,):
        return np.diag(a)
    if a.shape != (3, 3):
        raise ValidationError(f"{name} must have 3 diagonal entries or be 3x3")
    return a


def _vehicle(t: dict) -> VehicleParams:
    base = ref_hex()
    _check_keys(t, {"m_b", "I_b", "c_T", "c_tau", "d", "g", "k2"}, "vehicle")
    kw: dict[str, Any] = {k: float(v) for k, v in t.items() if k != "I_b"}
    if "I_b" in t:
        kw["I_b"] = _matrix3(t["I_b"], "vehicle.I_b")
    return replace(base, **kw)


def _arm(t: dict) -> ArmModel:
    if not t:
        return ref_arm()
    _check_keys(t, {"link", "base_offset", "mount_translation", "mount_rotation"}, "arm")
    links = t.get("link", [])
    if not links:
        raise ValidationError("[arm] needs at least one [[arm.link]]")
    dh, props = [], []
    for i, L in enumerate(links):
        _check_keys(L, {"a", "alpha", "d", "theta_offset", "mass", "com", "inertia"}, f"arm.link[{i}]")
        try:
            row = DHRow(float(L["a"]), float(L.get("alpha", 0.0)), float(L.get("d", 0.0)), float(L.get("theta_offset", 0.0)))
            mass = float(L["mass"])
        except KeyError as exc:
            raise ValidationError(f"arm.link[{i}] is missing {exc}") from exc
        if "com" in L or "inertia" in L:
            com = np.asarray(L.get("com", [-row.a / 2, 0.0, 0.0]), dtype=float)
            inertia = _matrix3(L.get("inertia", [0.0, 0.0, 0.0]), f"arm.link[{i}].inertia")
            props.append(LinkProps(mass, com, inertia))
        else:
            props.append(LinkProps.rod(mass, row.a))
        dh.append(row)
    if "mount_translation" in t:
        trans = np.asarray(t["mount_translation"], dtype=float)
    else:
        trans = np.array([0.0, 0.0, float(t.get("base_offset", 0.0))])
    rot = np.asarray(t.get("mount_rotation", np.eye(3)), dtype=float)
    return ArmModel(tuple(dh), tuple(props), ArmMount(rot, trans))


def _segments(raw: list[dict], j: int) -> list[Segment]:
    out = []
    for s in raw:
        s = dict(s)
        kind = s.pop("kind", None)
        try:
            if kind == "hold":
                out.append(Segment.hold(float(s["start"]), float(s["end"]), float(s["angle"])))
            elif kind == "swing":
                out.append(
                    Segment.swing(
                        float(s["start"]), float(s["end"]), float(s["low"]), float(s["high"]),
                        float(s.get("period", 4.0)), str(s.get("start_at", "low")),
                    )  # fmt: skip
                )
            elif kind == "move":
                out.append(Segment.move(float(s["start"]), float(s["end"])))
            else:
                raise ValidationError(f"joint {j}: unknown segment kind {kind!r}")
        except KeyError as exc:
            raise ValidationError(f"joint {j}: segment is missing {exc}") from exc
    return out


def parse_config(data: dict, source: Path | None = None) -> Config:
    """Build a :class:`Config` from a parsed TOML document."""
    known = {"vehicle", "arm", "synthesis", "controller", "simulation", "profile", "trajectory", "noise", "estimator", "setpoint", "metrics"}
    _check_keys(data, known, "top level")
    root = source.parent if source is not None else Path.cwd()
    cfg = Config(vehicle=_vehicle(_table(data, "vehicle")), arm=_arm(_table(data, "arm")), source=source)

    syn = _table(data, "synthesis")
    _check_keys(syn, {"gamma_min", "gamma_max", "lambda", "rel_tol", "structure", "pole_radius"}, "synthesis")
    pr = syn.get("pole_radius", SynthesisConfig.pole_radius)
    if isinstance(pr, str) and pr == "none":
        pr = None
    elif isinstance(pr, list):
        pr = tuple(float(v) for v in pr)
    cfg.synthesis = SynthesisConfig(
        gamma_min=float(syn.get("gamma_min", 0.5)),
        gamma_max=float(syn.get("gamma_max", 100.0)),
        lam=float(syn.get("lambda", 1.0)),
        rel_tol=float(syn.get("rel_tol", 0.01)),
        structure=str(syn.get("structure", "decoupled")),
        pole_radius=pr,
    )
    if cfg.synthesis.structure not in ("decoupled", "full"):
        raise ValidationError(f"synthesis.structure must be decoupled or full, got {cfg.synthesis.structure!r}")

    ctl = _table(data, "controller")
    _check_keys(ctl, {"gains", "ref_filter_tau"}, "controller")
    if "gains" in ctl:
        p = Path(ctl["gains"])
        cfg.gains_path = p if p.is_absolute() else root / p
    cfg.ref_filter_tau = float(ctl.get("ref_filter_tau", 0.05))

    sim = _table(data, "simulation")
    _check_keys(sim, {"profile", "duration", "sim_dt", "control_dt", "seed", "compensation", "schedule", "plant_momentum", "use_rotors"}, "simulation")
    cfg.profile = str(sim.get("profile", "hover"))
    if cfg.profile not in PROFILES:
        raise ValidationError(f"simulation.profile must be one of {PROFILES}")
    default_duration = 60.0 if cfg.profile == "estimation" else HOVER_PHASES[-1][1]
    cfg.duration = float(sim.get("duration", default_duration))
    if not cfg.duration > 0:
        raise ValidationError("simulation.duration must be positive")
    cfg.sim_dt = float(sim.get("sim_dt", 1e-3))
    cfg.control_dt = float(sim.get("control_dt", 5e-3))
    seed = sim.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ValidationError("simulation.seed must be a non-negative integer")
    cfg.seed = seed
    cfg.compensation = str(sim.get("compensation", "schedule" if cfg.profile == "hover" else "on"))
    if "schedule" in sim:
        cfg.schedule = tuple((float(t0), bool(on)) for t0, on in sim["schedule"])
    cfg.plant_momentum = str(sim.get("plant_momentum", "exact"))
    if cfg.plant_momentum not in ("exact", "approx"):
        raise ValidationError("simulation.plant_momentum must be exact or approx")
    cfg.use_rotors = bool(sim.get("use_rotors", True))
    cfg.compensation_schedule()

    prof = _table(data, "profile")
    allowed = {"period", "blend", "switch"} if cfg.profile == "estimation" else {"period", "blend"}
    _check_keys(prof, allowed, "profile")
    cfg.profile_options = {k: float(v) for k, v in prof.items()}
    if cfg.profile == "custom":
        joints = _table(data, "trajectory").get("joint", [])
        cfg.custom_joints = [_segments(j.get("segments", []), i) for i, j in enumerate(joints)]

    n = _table(data, "noise")
    _check_keys(n, {"position", "velocity", "attitude_deg", "omega", "joint_angle_deg", "joint_rate_deg"}, "noise")
    base = NoiseSpec()
    cfg.noise = NoiseSpec(
        position=float(n.get("position", base.position)),
        velocity=float(n.get("velocity", base.velocity)),
        attitude=math.radians(float(n.get("attitude_deg", math.degrees(base.attitude)))),
        omega=float(n.get("omega", base.omega)),
        joint_angle=math.radians(float(n.get("joint_angle_deg", math.degrees(base.joint_angle)))),
        joint_rate=math.radians(float(n.get("joint_rate_deg", math.degrees(base.joint_rate)))),
    )
    if min(vars(cfg.noise).values()) < 0:
        raise ValidationError("noise standard deviations must be non-negative")

    e = _table(data, "estimator")
    _check_keys(e, {"q_value", "q_rate", "r", "exact_derivatives"}, "estimator")
    cfg.estimator = EstimatorConfig(
        q_value=float(e.get("q_value", 1e-4)),
        q_rate=float(e.get("q_rate", 1e-1)),
        r=float(e.get("r", 1e-4)),
        exact_derivatives=bool(e.get("exact_derivatives", False)),
    )

    sp = _table(data, "setpoint")
    _check_keys(sp, {"p", "psi"}, "setpoint")
    cfg.setpoint = Setpoint(p=np.asarray(sp.get("p", [0.0, 0.0, 0.0]), dtype=float).reshape(3), psi=float(sp.get("psi", 0.0)))

    m = _table(data, "metrics")
    _check_keys(m, {"warmup", "comparisons"}, "metrics")
    cfg.warmup = float(m.get("warmup", 2.0))
    if "comparisons" in m:
        try:
            cfg.comparisons = tuple(
                ((float(a[0]), float(a[1])), (float(b[0]), float(b[1]))) for a, b in m["comparisons"]
            )
        except (TypeError, ValueError, IndexError) as exc:
            raise ValidationError(f"metrics.comparisons malformed: {exc}") from exc
    return cfg


def load_config(path: str | Path) -> Config:
    """Read and validate a TOML config file.

    Raises:
        ValidationError: missing file, TOML syntax error, or invalid values.
    """
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"config file {path} does not exist")
    try:
        data = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"{path}: {exc}") from exc
    return parse_config(data, path)


def default_config() -> Config:
    """REF-HEX / REF-ARM hover experiment with every default."""
    return parse_config({})
