"""Exogenous joint trajectories built from hold / swing / move segments.

``move`` segments are quintic blends whose end states (angle, rate, acceleration)
are taken from the neighbouring segments, so every profile built here is C2.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import ValidationError

CONTINUITY_TOL = 1e-9


@dataclass(frozen=True)
class Segment:
    """One time interval ``[start, end)`` of a joint profile.

    ``kind`` is ``"hold"`` (constant ``angle``), ``"swing"`` (``center + amplitude *
    sin(2 pi (t - start) / period + phase)``) or ``"move"`` (blend to the next
    segment).
    """

    kind: str
    start: float
    end: float
    angle: float = 0.0
    amplitude: float = 0.0
    center: float = 0.0
    period: float = 4.0
    phase: float = 0.0

    def __post_init__(self) -> None:
        for name in ("start", "end", "angle", "amplitude", "center", "period", "phase"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.kind not in ("hold", "swing", "move"):
            raise ValidationError(f"unknown segment kind {self.kind!r}")
        if not self.end > self.start:
            raise ValidationError(f"segment end {self.end} must exceed start {self.start}")
        if self.kind == "swing" and not self.period > 0:
            raise ValidationError("swing period must be positive")

    @classmethod
    def hold(cls, start: float, end: float, angle: float) -> "Segment":
        return cls("hold", start, end, angle=angle)

    @classmethod
    def swing(cls, start: float, end: float, low: float, high: float, period: float, start_at: str = "low") -> "Segment":
        """Swing between ``low`` and ``high``, starting at rest at one extreme."""
        phase = -np.pi / 2 if start_at == "low" else np.pi / 2
        return cls("swing", start, end, amplitude=(high - low) / 2, center=(high + low) / 2, period=period, phase=phase)

    @classmethod
    def move(cls, start: float, end: float) -> "Segment":
        return cls("move", start, end)


def _eval_basic(seg: Segment, t: NDArray[np.float64]):
    if seg.kind == "hold":
        z = np.zeros_like(t)
        return np.full_like(t, seg.angle), z, z
    w = 2 * np.pi / seg.period
    arg = w * (t - seg.start) + seg.phase
    A = seg.amplitude
    return seg.center + A * np.sin(arg), A * w * np.cos(arg), -A * w * w * np.sin(arg)


def _quintic(t0, t1, s0, s1):
    """Coefficients in ``tau = t - t0`` matching (q, qd, qdd) at both ends."""
    T = t1 - t0
    M = np.array(
        [
            [1, 0, 0, 0, 0, 0],
            [0, 1, 0, 0, 0, 0],
            [0, 0, 2, 0, 0, 0],
            [1, T, T**2, T**3, T**4, T**5],
            [0, 1, 2 * T, 3 * T**2, 4 * T**3, 5 * T**4],
            [0, 0, 2, 6 * T, 12 * T**2, 20 * T**3],
        ],
        dtype=float,
    )
    return np.linalg.solve(M, np.concatenate([s0, s1]))


class JointProfile:
    """Piecewise profile of one joint; evaluation is vectorized over time."""

    def __init__(self, segments: Sequence[Segment]):
        segs = sorted(segments, key=lambda s: s.start)
        if not segs:
            raise ValidationError("a joint profile needs at least one segment")
        for a, b in zip(segs, segs[1:]):
            if abs(a.end - b.start) > 1e-12:
                raise ValidationError(f"segments must tile time: gap/overlap at {a.end} vs {b.start}")
        if segs[0].kind == "move" or segs[-1].kind == "move":
            raise ValidationError("a move segment needs neighbours on both sides")
        self.segments = tuple(segs)
        self._coef: dict[int, NDArray[np.float64]] = {}
        for i, s in enumerate(segs):
            if s.kind == "move":
                prev, nxt = segs[i - 1], segs[i + 1]
                if nxt.kind == "move":
                    raise ValidationError("consecutive move segments are not supported")
                s0 = np.array([v[0] for v in _eval_basic(prev, np.array([s.start]))])
                s1 = np.array([v[0] for v in _eval_basic(nxt, np.array([s.end]))])
                self._coef[i] = _quintic(s.start, s.end, s0, s1)
        self._check_continuity()

    @property
    def start(self) -> float:
        return self.segments[0].start

    @property
    def end(self) -> float:
        return self.segments[-1].end

    def _eval_segment(self, i: int, t: NDArray[np.float64]):
        s = self.segments[i]
        if s.kind != "move":
            return _eval_basic(s, t)
        c = self._coef[i]
        x = t - s.start
        q = c[0] + x * (c[1] + x * (c[2] + x * (c[3] + x * (c[4] + x * c[5]))))
        qd = c[1] + x * (2 * c[2] + x * (3 * c[3] + x * (4 * c[4] + x * 5 * c[5])))
        qdd = 2 * c[2] + x * (6 * c[3] + x * (12 * c[4] + x * 20 * c[5]))
        return q, qd, qdd

    def _check_continuity(self) -> None:
        for i in range(len(self.segments) - 1):
            tb = np.array([self.segments[i].end])
            left = self._eval_segment(i, tb)[0][0]
            right = self._eval_segment(i + 1, tb)[0][0]
            if abs(left - right) > CONTINUITY_TOL:
                raise ValidationError(f"joint angle jumps from {left:.6g} to {right:.6g} at t={tb[0]:g}")

    def __call__(self, t: ArrayLike):
        t = np.asarray(t, dtype=float)
        q, qd, qdd = np.zeros_like(t), np.zeros_like(t), np.zeros_like(t)
        starts = np.array([s.start for s in self.segments])
        idx = np.clip(np.searchsorted(starts, t, side="right") - 1, 0, len(self.segments) - 1)
        for i in np.unique(idx):
            m = idx == i
            a, b, c = self._eval_segment(int(i), t[m])
            q[m], qd[m], qdd[m] = a, b, c
        return q, qd, qdd


class JointTrajectory:
    """Profiles for all joints of an arm."""

    def __init__(self, joints: Sequence[JointProfile | Sequence[Segment]], joint_limit: float = np.pi):
        self.joints = tuple(j if isinstance(j, JointProfile) else JointProfile(j) for j in joints)
        for k, j in enumerate(self.joints):
            for s in j.segments:
                extreme = max(abs(s.center) + abs(s.amplitude), abs(s.angle)) if s.kind != "move" else 0.0
                if extreme > joint_limit + 1e-12:
                    raise ValidationError(f"joint {k} segment exceeds limit {joint_limit}")

    @property
    def n(self) -> int:
        return len(self.joints)

    def __call__(self, t: ArrayLike) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
        """Joint ``(q, qdot, qddot)`` with shape ``t.shape + (n,)``."""
        t = np.asarray(t, dtype=float)
        parts = [j(t) for j in self.joints]
        return tuple(np.stack([p[k] for p in parts], axis=-1) for k in range(3))  # type: ignore[return-value]


def joint_trajectory(traj: JointTrajectory, t: ArrayLike):
    return traj(t)


def hold_profile(angles: Sequence[float], duration: float) -> JointTrajectory:
    return JointTrajectory([[Segment.hold(0.0, duration, a)] for a in angles])


def estimation_profile(duration: float = 60.0, period: float = 4.0, switch: float = 25.0, blend: float = 1.0):
    """Joint 1 swings -pi/4..pi/4 throughout; joint 2 holds -pi/2, then swings -pi/3..pi/3.

    Runs shorter than the switch still get the full segment layout, evaluated only up
    to ``duration``.
    """
    q = np.pi
    duration = max(duration, switch + blend + period)
    j1 = [Segment.swing(0.0, duration, -q / 4, q / 4, period)]
    j2 = [
        Segment.hold(0.0, switch, -q / 2),
        Segment.move(switch, switch + blend),
        Segment.swing(switch + blend, duration, -q / 3, q / 3, period),
    ]
    return JointTrajectory([j1, j2])


#: (start, end) of the four phases of the hover experiment.
HOVER_PHASES = ((0.0, 27.5), (27.5, 55.5), (55.5, 83.5), (83.5, 110.0))
HOVER_SWITCH = 55.5


def hover_profile(period: float = 4.0, blend: float = 1.0, phases=HOVER_PHASES) -> JointTrajectory:
    """Alternating phases: joint 1 fixed at pi/3, or both joints swinging.

    Joint 2 swings -pi/3..pi/3 the whole time. Joint 1 holds pi/3 in phases 1 and 3
    and swings -pi/4..pi/4 in phases 2 and 4, entering each condition through a
    ``blend``-second move.
    """
    q = np.pi
    (a0, a1), (b0, b1), (c0, c1), (d0, d1) = phases
    j1 = [
        Segment.hold(a0, a1, q / 3),
        Segment.move(b0, b0 + blend),
        Segment.swing(b0 + blend, b1, -q / 4, q / 4, period, start_at="high"),
        Segment.move(c0, c0 + blend),
        Segment.hold(c0 + blend, c1, q / 3),
        Segment.move(d0, d0 + blend),
        Segment.swing(d0 + blend, d1, -q / 4, q / 4, period, start_at="high"),
    ]
    j2 = [Segment.swing(a0, d1, -q / 3, q / 3, period)]
    return JointTrajectory([j1, j2])
