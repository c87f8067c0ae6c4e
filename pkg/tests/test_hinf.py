import json
import math

import numpy as np
import pytest
from scipy.integrate import trapezoid
from scipy.linalg import expm

from aerialmanip.errors import Infeasible, ValidationError
from aerialmanip.hinf import (
    CERT_TOL,
    X_MIN_EIG,
    GainSolution,
    build_error_model,
    closed_loop,
    interconnection,
    lmi_matrix,
    lmi_residual,
    sigma_bound,
    solve_lmi,
    synthesize,
    thrust_direction_gap,
    verify_certificate,
)


def test_sigma_examples():
    assert sigma_bound(3.0, 3.0) == pytest.approx(math.sqrt(13), rel=1e-15)
    assert sigma_bound(60.0, 2.55) == pytest.approx(math.sqrt(13) * 60 / 2.55, rel=1e-15)
    assert sigma_bound(60.0, 2.35) == pytest.approx(92.0566, rel=1e-5)
    assert sigma_bound(60.0, 1e12) < 1e-9
    with pytest.raises(ValidationError):
        sigma_bound(0.0, 1.0)


def test_model_block_structure(model):
    x = np.zeros(12)
    x[0:3] = [1.0, -2.0, 0.5]
    x[6:9] = [0.3, 0.1, -0.2]
    assert np.all(model.A @ x == 0)
    assert model.A.shape == (12, 12) and model.B.shape == (12, 6) and model.C.shape == (4, 12)
    assert model.D.shape == (12, 6) and model.E.shape == (12, 3) and model.F.shape == (3, 12)
    np.testing.assert_array_equal(model.B, model.D)
    x = np.arange(12.0)
    np.testing.assert_array_equal(model.C @ x, [0.0, 1.0, 2.0, 8.0])
    np.testing.assert_array_equal(model.F @ x, model.sigma * x[6:9])
    np.testing.assert_array_equal(model.E @ np.ones(3), np.r_[np.zeros(3), np.ones(3), np.zeros(6)])
    with pytest.raises(ValidationError):
        build_error_model(0.0)


def test_model_is_controllable(model):
    A, B = model.A, model.B
    ctrb = np.hstack([np.linalg.matrix_power(A, k) @ B for k in range(12)])
    assert np.linalg.matrix_rank(ctrb) == 12


@pytest.fixture(scope="module")
def lmi10(model):
    return solve_lmi(model, 10.0, 1.0)


def test_feasible_at_gamma_ten(model, lmi10):
    X, W = lmi10
    assert np.linalg.eigvalsh(X).min() >= X_MIN_EIG
    assert lmi_residual(model, X, W, 10.0, 1.0) <= CERT_TOL


def test_tiny_gamma_is_infeasible(model):
    with pytest.raises(Infeasible) as info:
        solve_lmi(model, 1e-6, 1.0)
    assert info.value.gamma == 1e-6


@pytest.mark.parametrize("alpha", [0.9, 1.1])
def test_scaling_keeps_gain_and_feasibility(model, lmi10, alpha):
    X, W = lmi10
    K = W @ np.linalg.inv(X)
    Xs, Ws = alpha * X, alpha * W
    np.testing.assert_allclose(Ws @ np.linalg.inv(Xs), K, rtol=1e-10, atol=1e-10)
    assert lmi_residual(model, Xs, Ws, 10.0, 1.0) <= CERT_TOL


def test_scaling_is_not_free_for_large_alpha(model, lmi10):
    """The constant blocks break homogeneity; record how far scaling can go."""
    X, W = lmi10
    res = {a: lmi_residual(model, a * X, a * W, 10.0, 1.0) for a in (0.5, 1.0, 2.0, 10.0)}
    assert res[1.0] <= CERT_TOL
    # the quadratic C X and F X blocks grow faster than the linear A X + B W block
    assert res[10.0] > 0


def test_synthesized_gain_is_certified(model, gains):
    assert gains.certificate_residual <= CERT_TOL
    assert gains.lmi_residual <= CERT_TOL
    assert np.linalg.eigvalsh(gains.X).min() >= X_MIN_EIG
    assert np.linalg.eigvals(closed_loop(gains, model)).real.max() < 0
    np.testing.assert_allclose(gains.K, gains.W @ np.linalg.inv(gains.X), rtol=1e-12, atol=1e-12)
    assert 0.5 <= gains.gamma <= 100


def test_decoupled_gain_has_no_cross_terms(gains):
    assert np.all(gains.K[:3, 6:] == 0)
    assert np.all(gains.K[3:, :6] == 0)


@pytest.mark.parametrize("lam", [0.1, 1.0, 10.0])
def test_lambda_sweep(model, lam):
    sol = synthesize(model, lam=lam)
    assert sol.lam == lam
    assert max(sol.certificate_residual, sol.lmi_residual) <= CERT_TOL
    assert sol.check(model) <= CERT_TOL


def test_bisection_narrows_to_tolerance(model):
    sol = synthesize(model, gamma_range=(1e-3, 100.0), rel_tol=0.05)
    assert sol.certificate_residual <= CERT_TOL
    with pytest.raises(Infeasible):
        solve_lmi(model, sol.gamma / 1.06, 1.0)


def test_infeasible_bracket(model):
    with pytest.raises(Infeasible):
        synthesize(model, gamma_range=(1e-7, 1e-6))
    with pytest.raises(ValidationError):
        synthesize(model, gamma_range=(2.0, 1.0))


def test_open_loop_identity_cannot_certify(model):
    assert verify_certificate(np.eye(12), np.zeros((6, 12)), model, 10.0, 1.0) > 0


def test_residual_monotone_in_gamma(model, gains, rng):
    P, K = gains.P, gains.K
    for g in (0.3, 1.0, 3.0, 10.0):
        assert verify_certificate(P, K, model, 2 * g, 1.0) <= verify_certificate(P, K, model, g, 1.0) + 1e-12
    Q = rng.normal(size=(12, 12))
    P2 = Q @ Q.T + np.eye(12)
    assert verify_certificate(P2, K, model, 20.0, 1.0) <= verify_certificate(P2, K, model, 10.0, 1.0) + 1e-12


def test_schur_forms_agree(model, gains, lmi10):
    X, W = lmi10
    P, K = np.linalg.inv(X), W @ np.linalg.inv(X)
    assert lmi_residual(model, X, W, 10.0, 1.0) <= CERT_TOL
    assert verify_certificate(0.5 * (P + P.T), K, model, 10.0, 1.0) <= CERT_TOL
    assert lmi_matrix(model, X, W, 10.0, 1.0).shape == (28, 28)
    # and both reject the same infeasible point
    I, Z = np.eye(12), np.zeros((6, 12))
    assert lmi_residual(model, I, Z, 10.0, 1.0) > 0
    assert verify_certificate(I, Z, model, 10.0, 1.0) > 0


def test_interconnection_norm_bound(veh, m_s, rng):
    n = 100_000
    sigma = sigma_bound(veh.k2, m_s)
    e = rng.uniform(-1, 1, (n, 3))
    d = np.column_stack([rng.uniform(-1, 1, (n, 2)), rng.uniform(-math.pi, math.pi, n)])
    F_t = rng.uniform(0, veh.k2, n)
    delta = interconnection(d, e, F_t, m_s)
    assert np.sum(np.linalg.norm(delta, axis=1) > sigma * np.linalg.norm(e, axis=1) * (1 + 1e-12)) == 0


def test_component_bounds_in_hover_regime(rng):
    n = 100_000
    e = rng.uniform(-1, 1, (n, 3))
    d = np.column_stack([rng.uniform(-0.3, 0.3, (n, 2)), rng.uniform(-math.pi, math.pi, n)])
    h, a = thrust_direction_gap(d, e), np.abs(e)
    assert np.sum(np.abs(h[:, :2]) > (5 / 3) * a.sum(axis=1, keepdims=True) + 1e-15) == 0
    assert np.sum(np.abs(h[:, 2]) > 0.75 * (a[:, 0] + a[:, 1]) + 1e-15) == 0


def test_vertical_component_bound_fails_at_large_tilt():
    """Closed-form counterexample: |cos(1.1) - cos(1.0)| exceeds 0.75 * 0.1."""
    h = thrust_direction_gap([0.0, 1.0, 0.0], [0.0, 0.1, 0.0])
    assert abs(h[2]) == pytest.approx(abs(math.cos(1.1) - math.cos(1.0)), rel=1e-12)
    assert abs(h[2]) > 0.75 * 0.1


def l2_battery(model, gains, coupled, n_pulses=20, seed=7, dt=1e-3, tail=12.0):
    """Worst ``sqrt(int |y|^2 / int |Delta|^2)`` over random square pulses.

    The pulses are piecewise constant on the grid, so the zero-order-hold
    discretization is exact; the output integral uses the trapezoid rule.
    """
    rng = np.random.default_rng(seed)
    Acl = closed_loop(gains, model) + (model.E @ model.F if coupled else 0.0)
    n, m = Acl.shape[0], model.D.shape[1]
    Md = expm(np.block([[Acl, model.D], [np.zeros((m, n + m))]]) * dt)
    Ad, Bd = Md[:n, :n], Md[:n, n:]
    ratios = []
    for _ in range(n_pulses):
        amp = rng.normal(size=m)
        k0, width = int(rng.integers(0, 500)), int(rng.integers(20, 2000))
        steps = k0 + width + int(tail / dt)
        x = np.zeros(n)
        ys = np.empty((steps + 1, model.C.shape[0]))
        ys[0] = 0.0
        for k in range(steps):
            x = Ad @ x + (Bd @ amp if k0 <= k < k0 + width else 0.0)
            ys[k + 1] = model.C @ x
        yy = trapezoid(np.sum(ys**2, axis=1), dx=dt)
        dd = float(amp @ amp) * width * dt
        ratios.append(math.sqrt(yy / dd))
    return max(ratios)


@pytest.mark.parametrize("coupled", [False, True], ids=["no-coupling", "worst-coupling"])
def test_l2_gain_battery(model, gains, coupled):
    assert l2_battery(model, gains, coupled) <= gains.gamma


def test_gain_file_round_trip(tmp_path, gains, model):
    path = tmp_path / "gains.json"
    gains.save(path)
    back = GainSolution.load(path)
    np.testing.assert_array_equal(back.K, gains.K)
    np.testing.assert_array_equal(back.X, gains.X)
    assert back.gamma == gains.gamma and back.lam == gains.lam and back.sigma == gains.sigma
    assert back.check(model) <= CERT_TOL


def test_gain_file_validation(tmp_path, gains):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ValidationError):
        GainSolution.load(bad)
    d = gains.to_dict()
    d["K"]["shape"] = [12, 6]
    bad.write_text(json.dumps(d))
    with pytest.raises(ValidationError):
        GainSolution.load(bad)
    d = gains.to_dict()
    del d["gamma"]
    with pytest.raises(ValidationError):
        GainSolution.from_dict(d)
    d = gains.to_dict()
    d["K"]["data"][0] += 1.0
    with pytest.raises(ValidationError):
        GainSolution.from_dict(d).check(build_error_model(gains.sigma))
