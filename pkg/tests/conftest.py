import numpy as np
import pytest

from attitude_consensus.lie import exp_so3, from_euler_zyx

J_BENCH = np.diag([0.23, 0.28, 0.35])
EULER_DEG = (20.0, 30.0, 50.0, 70.0)
RATES_DEGPS = ((1.0, 1.0, 1.0), (2.0, 2.0, 2.0), (2.0, 2.0, 2.0), (2.0, 2.0, 2.0))


def bench_initial_state():
    """Four agents with equal roll/pitch/yaw and small body rates."""
    R0 = np.array([from_euler_zyx(*np.deg2rad([a] * 3)) for a in EULER_DEG])
    W0 = np.deg2rad(np.array(RATES_DEGPS))
    return R0, W0


def random_rotations(rng, size):
    v = rng.normal(size=(size, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return exp_so3(v * rng.uniform(0, np.pi, size=(size, 1)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# criterion number -> (passed, detail), filled by test_acceptance.py
ACCEPTANCE = {}


def record_criterion(number, passed, detail):
    ACCEPTANCE[number] = (bool(passed), detail)
    print(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
