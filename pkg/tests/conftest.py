import pytest

from branchimm.model import ModelSpec


def subcritical(theta=1.0, gamma=1.0):
    return ModelSpec.build([0.75, 0, 0.25], {1: 1.0}, gamma, theta=theta)


def critical(gamma, theta=1.0):
    return ModelSpec.build([0.5, 0, 0.5], {1: 1.0}, gamma, theta=theta)


def supercritical(theta, gamma=0.5):
    return ModelSpec.build([0.25, 0, 0.75], {1: 1.0}, gamma, theta=theta)


def pure_death(theta=1.0):
    return ModelSpec.build([1.0], {1: 1.0}, 0.0, theta=theta)


def immigration_death(gamma=2.0, alpha=1.0):
    return ModelSpec.build([1.0], {1: 1.0}, gamma, alpha=alpha)


@pytest.fixture
def sub():
    return subcritical()


def rich_spec():
    """Wider offspring and batch supports, non-integer theta."""
    return ModelSpec.build([0.3, 0, 0.2, 0.5], {1: 0.5, 3: 0.5}, 2.0, theta=1.5)


@pytest.fixture
def rich():
    return rich_spec()
