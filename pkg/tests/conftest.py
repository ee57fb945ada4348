import numpy as np
import pytest
from hypothesis import settings

from spinrotor.constants import HBAR
from spinrotor.rotor import ellipsoid_inertia

# first calls compile numba kernels, so wall-clock deadlines are meaningless
settings.register_profile("spinrotor", deadline=None)
settings.load_profile("spinrotor")

# criterion number -> (passed, detail), filled by tests/test_acceptance.py
ACCEPTANCE = {}


@pytest.fixture(scope="session")
def prolate_10_11():
    """10/10/11 nm diamond ellipsoid spinning at 23.7 MHz about n2."""
    inertia = ellipsoid_inertia(10e-9, 10e-9, 11e-9)
    J = inertia.I2 * 2 * np.pi * 23.7e6
    return inertia, J


@pytest.fixture(scope="session")
def prolate_67():
    return ellipsoid_inertia(6e-9, 6e-9, 7e-9)


@pytest.fixture(scope="session")
def oblate_681():
    return ellipsoid_inertia(6.81e-9, 6.81e-9, 5.44e-9)


@pytest.fixture
def record_criterion():
    def record(number, passed, detail):
        ACCEPTANCE[number] = (bool(passed), detail)
        status = "PASS" if passed else "FAIL"
        print(f"criterion {number:2d}: {status}  {detail}")
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {detail}")


__all__ = ["HBAR"]
