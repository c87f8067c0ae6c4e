"""Robust H-infinity state feedback for the linearized tracking-error model.

The error state is ``x = [e_p, e_v, e_Phi, e_Phi_dot]`` (12), the input
``u = [nu1 - p_dd_d, nu2 - Phi_dd_d]`` (6) and the regulated output
``y = [e_x, e_y, e_z, e_psi]``. The LMI in ``(X, W)`` is solved with cvxpy; whatever
the solver returns is only accepted after its eigenvalue certificate is
re-checked in numpy.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import cvxpy as cp
import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import Infeasible, ValidationError
from .spatial import E3, rotation_from_euler

log = logging.getLogger(__name__)

#: Interconnection constant proven for the Z-Y-X attitude error.
K1_BOUND = math.sqrt(13.0)
#: Largest eigenvalue accepted for either certificate form.
CERT_TOL = 1e-8
#: Smallest eigenvalue accepted for X.
X_MIN_EIG = 1e-8
#: Iteration budget of the fallback first-order solver.
SCS_MAX_ITERS = 2000

Structure = Literal["decoupled", "full"]


def sigma_bound(k2: float, m_s: float) -> float:
    """Gain from attitude error to the interconnection term at maximum thrust ``k2``."""
    if not (k2 > 0 and m_s > 0):
        raise ValidationError("k2 and m_s must be positive")
    return K1_BOUND * k2 / m_s


@dataclass(frozen=True)
class ErrorStateModel:
    A: NDArray[np.float64]
    B: NDArray[np.float64]
    C: NDArray[np.float64]
    D: NDArray[np.float64]
    E: NDArray[np.float64]
    F: NDArray[np.float64]
    sigma: float


def build_error_model(sigma: float) -> ErrorStateModel:
    """Two decoupled 3-axis double integrators with the interconnection input."""
    if not sigma > 0:
        raise ValidationError("sigma must be positive")
    Z, I = np.zeros((3, 3)), np.eye(3)
    A = np.block([[Z, I, Z, Z], [Z, Z, Z, Z], [Z, Z, Z, I], [Z, Z, Z, Z]])
    B = np.block([[Z, Z], [I, Z], [Z, Z], [Z, I]])
    D = B.copy()
    E = np.vstack([Z, I, Z, Z])
    C = np.zeros((4, 12))
    C[:3, :3] = I
    C[3, 8] = 1.0
    F = np.hstack([Z, Z, sigma * I, Z])
    return ErrorStateModel(A, B, C, D, E, F, float(sigma))


def lmi_matrix(model: ErrorStateModel, X: ArrayLike, W: ArrayLike, gamma: float, lam: float) -> NDArray[np.float64]:
    """The 28x28 block matrix that must be negative semidefinite."""
    X = np.asarray(X, dtype=float)
    W = np.asarray(W, dtype=float)
    m = model
    AXBW = m.A @ X + m.B @ W
    CX = m.C @ X
    FX = math.sqrt(lam) * (m.F @ X)
    nd, ne, nc, nf = m.D.shape[1], m.E.shape[1], m.C.shape[0], m.F.shape[0]
    Z = np.zeros
    top = np.hstack([AXBW + AXBW.T, m.D / gamma, m.E / math.sqrt(lam), CX.T, FX.T])
    rows = [
        top,
        np.hstack([m.D.T / gamma, -np.eye(nd), Z((nd, ne)), Z((nd, nc)), Z((nd, nf))]),
        np.hstack([m.E.T / math.sqrt(lam), Z((ne, nd)), -np.eye(ne), Z((ne, nc)), Z((ne, nf))]),
        np.hstack([CX, Z((nc, nd)), Z((nc, ne)), -np.eye(nc), Z((nc, nf))]),
        np.hstack([FX, Z((nf, nd)), Z((nf, ne)), Z((nf, nc)), -np.eye(nf)]),
    ]
    return np.vstack(rows)


def riccati_matrix(P: ArrayLike, K: ArrayLike, model: ErrorStateModel, gamma: float, lam: float) -> NDArray[np.float64]:
    """Left-hand side of the dissipation inequality in ``P = X^-1``."""
    P = np.asarray(P, dtype=float)
    m = model
    Acl = m.A + m.B @ np.asarray(K, dtype=float)
    PD = P @ m.D
    PE = P @ m.E
    return (
        P @ Acl
        + Acl.T @ P
        + PD @ PD.T / gamma**2
        + PE @ PE.T / lam
        + m.C.T @ m.C
        + lam * m.F.T @ m.F
    )


def _max_eig(M: NDArray[np.float64]) -> float:
    return float(np.linalg.eigvalsh(0.5 * (M + M.T)).max())


def verify_certificate(P: ArrayLike, K: ArrayLike, model: ErrorStateModel, gamma: float, lam: float) -> float:
    """Largest eigenvalue of :func:`riccati_matrix`; ``<= 0`` certifies gain ``gamma``."""
    return _max_eig(riccati_matrix(P, K, model, gamma, lam))


def lmi_residual(model: ErrorStateModel, X: ArrayLike, W: ArrayLike, gamma: float, lam: float) -> float:
    return _max_eig(lmi_matrix(model, X, W, gamma, lam))


def _sym(M):
    return 0.5 * (M + M.T)


def solve_lmi(
    model: ErrorStateModel,
    gamma: float,
    lam: float = 1.0,
    *,
    structure: Structure = "decoupled",
    pole_radius: float | tuple[float, float] | None = (8.0, 40.0),
    margin: float = 1e-6,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Find ``(X, W)`` satisfying the LMI at ``(gamma, lam)``.

    Args:
        structure: ``"decoupled"`` restricts ``X`` and ``W`` to translational /
            rotational blocks so that ``K`` has no cross-loop gains; ``"full"``
            leaves them unstructured.
        pole_radius: Closed-loop eigenvalue magnitude bound (rad/s), as a scalar
            or ``(translational, rotational)`` for the decoupled structure.
            ``None`` drops the constraint.
        margin: The LMI is imposed as ``<= -margin * I`` so the numpy re-check
            has slack against solver tolerance.

    Raises:
        Infeasible: solver reports infeasibility or the certificate re-check fails.
    """
    if not (gamma > 0 and lam > 0):
        raise ValidationError("gamma and lambda must be positive")
    m = model
    n, nu = m.A.shape[0], m.B.shape[1]
    h, hu = n // 2, nu // 2
    if structure == "decoupled":
        Xp = cp.Variable((h, h), symmetric=True)
        Xa = cp.Variable((h, h), symmetric=True)
        Wp = cp.Variable((hu, h))
        Wa = cp.Variable((hu, h))
        X = cp.bmat([[Xp, np.zeros((h, h))], [np.zeros((h, h)), Xa]])
        W = cp.bmat([[Wp, np.zeros((hu, h))], [np.zeros((hu, h)), Wa]])
        blocks = [(Xp, Wp, slice(0, h), slice(0, hu)), (Xa, Wa, slice(h, n), slice(hu, nu))]
    elif structure == "full":
        X = cp.Variable((n, n), symmetric=True)
        W = cp.Variable((nu, n))
        blocks = [(X, W, slice(0, n), slice(0, nu))]
    else:
        raise ValidationError(f"unknown structure {structure!r}")

    nd, ne, nc, nf = m.D.shape[1], m.E.shape[1], m.C.shape[0], m.F.shape[0]
    Z = np.zeros
    AXBW = m.A @ X + m.B @ W
    sl = math.sqrt(lam)
    M = cp.bmat(
        [
            [AXBW + AXBW.T, m.D / gamma, m.E / sl, (m.C @ X).T, sl * (m.F @ X).T],
            [m.D.T / gamma, -np.eye(nd), Z((nd, ne)), Z((nd, nc)), Z((nd, nf))],
            [m.E.T / sl, Z((ne, nd)), -np.eye(ne), Z((ne, nc)), Z((ne, nf))],
            [m.C @ X, Z((nc, nd)), Z((nc, ne)), -np.eye(nc), Z((nc, nf))],
            [sl * (m.F @ X), Z((nf, nd)), Z((nf, ne)), Z((nf, nc)), -np.eye(nf)],
        ]
    )
    N = M.shape[0]
    cons = [_sym(M) << -margin * np.eye(N)]
    radii: list[float | None]
    if pole_radius is None:
        radii = [None] * len(blocks)
    elif np.ndim(pole_radius) == 0:
        radii = [float(pole_radius)] * len(blocks)
    else:
        if structure != "decoupled":
            raise ValidationError("per-loop pole radii need the decoupled structure")
        radii = [float(r) for r in pole_radius]
    for (Xs, Ws, rs, cs), r in zip(blocks, radii):
        k = Xs.shape[0]
        cons.append(Xs >> 10 * X_MIN_EIG * np.eye(k))
        if r is not None:
            Q = m.A[rs, rs] @ Xs + m.B[rs, cs] @ Ws
            cons.append(_sym(cp.bmat([[-r * Xs, Q], [Q.T, -r * Xs]])) << 0)

    prob = cp.Problem(cp.Minimize(0), cons)
    status = None
    # SCS only backs up the interior-point solver; near the feasibility boundary it
    # rarely reaches certificate accuracy, so its budget is kept small
    for solver, opts in (("CLARABEL", {}), ("SCS", {"max_iters": SCS_MAX_ITERS})):
        try:
            prob.solve(solver=solver, **opts)
            status = prob.status
        except cp.error.SolverError:
            status = "solver_error"
            continue
        # a clean verdict either way is final; only shaky ones go to the next solver
        if status in ("optimal", "optimal_inaccurate", "infeasible", "unbounded"):
            break
    if status not in ("optimal", "optimal_inaccurate") or X.value is None:
        raise Infeasible(f"LMI infeasible at gamma={gamma:g}, lambda={lam:g} ({status})", gamma, lam)

    Xv = _sym(np.asarray(X.value, dtype=float))
    Wv = np.asarray(W.value, dtype=float)
    if np.linalg.eigvalsh(Xv).min() < X_MIN_EIG or lmi_residual(m, Xv, Wv, gamma, lam) > CERT_TOL:
        raise Infeasible(f"certificate re-check failed at gamma={gamma:g}, lambda={lam:g}", gamma, lam)
    return Xv, Wv


@dataclass(frozen=True)
class GainSolution:
    """Certified state-feedback gain ``u = K x``."""

    K: NDArray[np.float64]
    X: NDArray[np.float64]
    W: NDArray[np.float64]
    gamma: float
    lam: float
    sigma: float
    lmi_residual: float
    certificate_residual: float

    @property
    def P(self) -> NDArray[np.float64]:
        return np.linalg.inv(self.X)

    def to_dict(self) -> dict:
        def mat(a):
            a = np.asarray(a)
            return {"shape": list(a.shape), "data": [float(v) for v in a.ravel()]}

        return {
            "K": mat(self.K),
            "X": mat(self.X),
            "W": mat(self.W),
            "gamma": self.gamma,
            "lambda": self.lam,
            "sigma": self.sigma,
            "lmi_residual": self.lmi_residual,
            "certificate_residual": self.certificate_residual,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GainSolution":
        def mat(entry, shape):
            a = np.asarray(entry["data"], dtype=float)
            if tuple(entry["shape"]) != shape or a.size != math.prod(shape):
                raise ValidationError(f"matrix has shape {entry['shape']}, expected {list(shape)}")
            return a.reshape(shape)

        try:
            return cls(
                K=mat(d["K"], (6, 12)),
                X=mat(d["X"], (12, 12)),
                W=mat(d["W"], (6, 12)),
                gamma=float(d["gamma"]),
                lam=float(d["lambda"]),
                sigma=float(d["sigma"]),
                lmi_residual=float(d["lmi_residual"]),
                certificate_residual=float(d["certificate_residual"]),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed gains file: {exc}") from exc

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path: str | Path) -> "GainSolution":
        try:
            d = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"gains file {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(d)

    def check(self, model: ErrorStateModel) -> float:
        """Recompute both certificate forms; return the worse residual."""
        if not np.allclose(self.K, self.W @ np.linalg.inv(self.X), rtol=1e-8, atol=1e-8):
            raise ValidationError("K does not equal W X^-1")
        return max(
            lmi_residual(model, self.X, self.W, self.gamma, self.lam),
            verify_certificate(self.P, self.K, model, self.gamma, self.lam),
        )


def _solution(model, gamma, lam, X, W) -> GainSolution:
    K = W @ np.linalg.inv(X)
    P = np.linalg.inv(X)
    return GainSolution(
        K=K, X=X, W=W, gamma=float(gamma), lam=float(lam), sigma=model.sigma,
        lmi_residual=lmi_residual(model, X, W, gamma, lam),
        certificate_residual=verify_certificate(0.5 * (P + P.T), K, model, gamma, lam),
    )  # fmt: skip


def synthesize(
    model: ErrorStateModel,
    gamma_range: tuple[float, float] = (0.5, 100.0),
    lam: float = 1.0,
    rel_tol: float = 0.01,
    **lmi_options,
) -> GainSolution:
    """Bisect for the smallest certified ``gamma`` in ``gamma_range``.

    Raises:
        Infeasible: if ``gamma_range[1]`` itself is infeasible.
    """
    lo, hi = map(float, gamma_range)
    if not 0 < lo <= hi:
        raise ValidationError(f"bad gamma range {gamma_range}")

    def attempt(g):
        try:
            X, W = solve_lmi(model, g, lam, **lmi_options)
        except Infeasible:
            return None
        sol = _solution(model, g, lam, X, W)
        if sol.certificate_residual > CERT_TOL:
            log.debug("gamma=%g: LMI ok but Riccati residual %g", g, sol.certificate_residual)
            return None
        return sol

    best = attempt(hi)
    if best is None:
        raise Infeasible(f"no certified gain for gamma in [{lo:g}, {hi:g}]", hi, lam)
    low_sol = attempt(lo)
    if low_sol is not None:
        return low_sol
    while (hi - lo) > rel_tol * hi:
        mid = math.sqrt(lo * hi) if hi / lo > 4 else 0.5 * (lo + hi)
        sol = attempt(mid)
        if sol is None:
            lo = mid
        else:
            hi, best = mid, sol
    log.info("synthesized gamma=%.4g lambda=%.3g residual=%.3g", best.gamma, lam, best.certificate_residual)
    return best


def interconnection(
    desired_euler: ArrayLike, attitude_error: ArrayLike, F_t: ArrayLike, m_s: float
) -> NDArray[np.float64]:
    """Translational acceleration left over when the attitude lags its reference.

    ``(F_t / m_s) (R_d - R) e3`` with ``R = R(desired + error)``; broadcasts.
    """
    d = np.asarray(desired_euler, dtype=float)
    e = np.asarray(attitude_error, dtype=float)
    return (np.asarray(F_t, dtype=float)[..., None] / m_s) * thrust_direction_gap(d, e)


def thrust_direction_gap(desired_euler: ArrayLike, attitude_error: ArrayLike) -> NDArray[np.float64]:
    """``(R_d - R) e3`` for ``R = R(desired + error)``."""
    d = np.asarray(desired_euler, dtype=float)
    e = np.asarray(attitude_error, dtype=float)
    return rotation_from_euler(d) @ E3 - rotation_from_euler(d + e) @ E3


def closed_loop(sol: GainSolution, model: ErrorStateModel) -> NDArray[np.float64]:
    return model.A + model.B @ sol.K
