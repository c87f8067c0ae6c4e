from __future__ import annotations

import time

import numpy as np
import pytest

from aerialmanip.fixtures import centered_arm, ref_arm, ref_hex
from aerialmanip.hinf import build_error_model, sigma_bound, synthesize
from aerialmanip.simulator import Scenario, run_scenario
from aerialmanip.trajectory import HOVER_SWITCH, estimation_profile, hover_profile

#: (criterion, passed, detail) rows recorded by the acceptance tests.
ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def veh():
    return ref_hex()


@pytest.fixture(scope="session")
def arm():
    return ref_arm()


@pytest.fixture(scope="session")
def carm():
    return centered_arm()


@pytest.fixture(scope="session")
def m_s(veh, arm):
    return veh.m_b + arm.mass


@pytest.fixture(scope="session")
def model(veh, m_s):
    return build_error_model(sigma_bound(veh.k2, m_s))


@pytest.fixture(scope="session")
def gains(model):
    return synthesize(model)


@pytest.fixture(scope="session")
def estimation_run(veh, arm, gains):
    """60 s estimation profile with default noise; returns ``(log, wall seconds)``."""
    # compile the integrator kernel outside the timed region
    run_scenario(Scenario(veh, arm, estimation_profile(), gains.K, 0.01))
    t0 = time.perf_counter()
    log = run_scenario(Scenario(veh, arm, estimation_profile(), gains.K, 60.0))
    return log, time.perf_counter() - t0


@pytest.fixture(scope="session")
def hover_run(veh, arm, gains):
    sc = Scenario(veh, arm, hover_profile(), gains.K, 110.0, compensation=((0.0, False), (HOVER_SWITCH, True)))
    return run_scenario(sc)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in sorted(ACCEPTANCE, key=lambda r: int(r[0].split(".")[0])):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
