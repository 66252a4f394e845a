import numpy as np
import pytest

from markedgibbs.model import (BilinearSpin, ConstantCoupling, ModelSpec, PolynomialSpinEnergy, PowerLawPotential,
                               ZeroCoupling, ZeroPotential)


def certification_model(z=0.5, J0=0.1, beta=1.0):
    """delta = 0.5, quartic V: the oracle-gate model (fails the growth condition)."""
    return ModelSpec(1, 1, beta, z, 1.0, PowerLawPotential(1.0, 0.5, 1, 1.0), ConstantCoupling(J0, 1.0),
                     BilinearSpin(), PolynomialSpinEnergy(4))


def worked_model(z=0.5, J0=0.1, beta=1.0):
    """delta = 2 (P = 4), V = s^6: passes every assumption check."""
    return ModelSpec(1, 1, beta, z, 1.0, PowerLawPotential(1.0, 2.0, 1, 1.0), ConstantCoupling(J0, 1.0),
                     BilinearSpin(), PolynomialSpinEnergy(6))


def ideal_model(z=0.5, m=1, q_V=4):
    return ModelSpec(1, m, 1.0, z, 1.0, ZeroPotential(), ZeroCoupling(), BilinearSpin(), PolynomialSpinEnergy(q_V))


@pytest.fixture
def worked():
    return worked_model()


@pytest.fixture
def cert():
    return certification_model()


@pytest.fixture
def ideal():
    return ideal_model()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance lines, filled by test_acceptance.report and printed after the run
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for ac in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[ac])
