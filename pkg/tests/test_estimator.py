import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aerialmanip.dynamics import BodyState, force_disturbance, torque_disturbance
from aerialmanip.errors import EmptySeries, NonFiniteMeasurement, ValidationError
from aerialmanip.estimator import (
    MAPD_FLOOR,
    DerivativeKF,
    DisturbanceEstimator,
    estimate_disturbance,
    mapd,
)
from aerialmanip.inertia import inertia_params
from aerialmanip.spatial import E3

DT = 0.005


def _feed(kf, zs):
    return np.array([kf.step(z) for z in zs])


def test_constant_signal_has_zero_rate():
    kf = DerivativeKF(DT)
    rates = _feed(kf, np.tile([0.3, -1.0, 2.0], (100, 1)))
    assert np.abs(rates[-1]).max() <= 1e-3


def test_ramp_slope_is_recovered():
    kf = DerivativeKF(DT)
    s = np.array([0.5, -2.0, 4.0])
    t = np.arange(2000) * DT
    rates = _feed(kf, t[:, None] * s)
    np.testing.assert_allclose(rates[-1], s, rtol=0.01)


def _amplitude(t, y, w):
    """Least-squares amplitude of the ``w`` harmonic in ``y``."""
    A = np.column_stack([np.sin(w * t), np.cos(w * t), np.ones_like(t)])
    c, *_ = np.linalg.lstsq(A, y, rcond=None)
    return math.hypot(c[0], c[1])


def test_sinusoid_derivative_amplitude():
    a, w = 0.8, 2 * math.pi * 0.5
    kf = DerivativeKF(DT, axes=1)
    t = np.arange(4000) * DT
    rates = _feed(kf, (a * np.sin(w * t))[:, None])[:, 0]
    tail = t > 5.0
    amp = _amplitude(t[tail], rates[tail], w)
    assert abs(amp - a * w) / (a * w) <= 0.10


def test_non_finite_measurement_raises():
    kf = DerivativeKF(DT)
    kf.step([0.0, 0.0, 0.0])
    for bad in ([np.nan, 0, 0], [0, np.inf, 0]):
        with pytest.raises(NonFiniteMeasurement):
            kf.step(bad)


def test_filter_validation():
    with pytest.raises(ValidationError):
        DerivativeKF(0.0)


def test_covariance_stays_symmetric_psd(rng):
    kf = DerivativeKF(DT)
    z = rng.normal(size=(100_000, 3))
    worst_asym, worst_eig = 0.0, np.inf
    for k in range(z.shape[0]):
        kf.step(z[k])
        if k % 97 == 0:
            worst_asym = max(worst_asym, np.abs(kf.P - np.swapaxes(kf.P, -1, -2)).max())
            worst_eig = min(worst_eig, np.linalg.eigvalsh(kf.P).min())
    assert worst_asym == 0.0
    assert worst_eig >= 0.0


def test_rest_estimate_is_gravity_moment(arm):
    ip = inertia_params(arm, 2.0, [0.5, -0.4], [0.0, 0.0])
    body = BodyState()
    est = estimate_disturbance(body, ip, np.zeros(3), np.zeros(3), np.zeros(3))
    assert np.all(est.F_hat == 0)
    np.testing.assert_allclose(est.tau_hat, ip.m_s * np.cross(ip.r_oc, 9.81 * E3), atol=1e-15)


def test_exact_derivatives_reproduce_model_disturbance(arm, rng):
    for _ in range(200):
        body = BodyState(rng.normal(size=3), rng.normal(size=3), rng.uniform(-1, 1, 3), rng.normal(size=3))
        ip = inertia_params(arm, 2.0, rng.uniform(-3, 3, 2), rng.normal(size=2), rng.normal(size=2))
        wd, vd = rng.normal(size=3), rng.normal(size=3)
        est = estimate_disturbance(body, ip, wd, ip.r_oc_ddot, vd)
        np.testing.assert_allclose(est.F_hat, force_disturbance(body, ip, wd), atol=1e-12)
        np.testing.assert_allclose(est.tau_hat, torque_disturbance(body, ip, wd, vd), atol=1e-12)


def test_estimate_uses_supplied_offset_acceleration(arm):
    ip = inertia_params(arm, 2.0, [0.5, -0.4], [0.0, 0.0])
    rdd = np.array([0.2, -0.1, 0.0])
    est = estimate_disturbance(BodyState(), ip, np.zeros(3), rdd, np.zeros(3))
    np.testing.assert_allclose(est.F_hat, -ip.m_s * rdd, atol=1e-15)


def test_disturbance_estimator_lags_model_acceleration(arm):
    est = DisturbanceEstimator(DT)
    ip = inertia_params(arm, 2.0, [0.5, -0.4], [0.0, 0.0])
    body = BodyState()
    first, _, _ = est.update(body, ip)
    est.record_model_acceleration([0.0, 0.0, 9.81])
    second, _, _ = est.update(body, ip)
    # with v_dot = g e3 the gravity moment cancels
    np.testing.assert_allclose(first.tau_hat, ip.m_s * np.cross(ip.r_oc, 9.81 * E3), atol=1e-15)
    np.testing.assert_allclose(second.tau_hat, 0.0, atol=1e-15)


def test_mapd_examples():
    x = np.array([[1.0, -2.0, 0.5], [2.0, 1.0, -0.3]])
    np.testing.assert_array_equal(mapd(x, x), [0.0, 0.0, 0.0])
    np.testing.assert_allclose(mapd(1.1 * x, x), [10.0, 10.0, 10.0], rtol=1e-12)


def test_mapd_floor_and_errors():
    ref = np.array([1.0, 0.5 * MAPD_FLOOR, 2.0])
    est = np.array([1.5, 100.0, 2.0])
    assert mapd(est, ref)[0] == pytest.approx(25.0)
    with pytest.raises(EmptySeries):
        mapd([], [])
    with pytest.raises(EmptySeries):
        mapd([1.0], [0.0])
    with pytest.raises(ValidationError):
        mapd([1.0, 2.0], [1.0])


@settings(max_examples=50)
@given(st.floats(0.1, 10), st.lists(st.floats(0.01, 5), min_size=1, max_size=20))
def test_mapd_constant_ratio_property(k, vals):
    ref = np.array(vals)
    assert mapd(k * ref, ref)[0] == pytest.approx(100 * abs(k - 1), rel=1e-9, abs=1e-9)
