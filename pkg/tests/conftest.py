import pytest

from rfuniform.activation import ActivationProfile, activation_by_name, centered
from rfuniform.asymptotics import ModelParams


@pytest.fixture(scope="session")
def relu_centered():
    return centered(activation_by_name("relu"))


@pytest.fixture(scope="session")
def shifted_relu():
    return activation_by_name("shifted_relu")


@pytest.fixture(scope="session")
def fig2_params(relu_centered):
    """The finite-size protocol parameters: psi1=2.5, psi2=1.5, noiseless."""
    return ModelParams(2.5, 1.5, 1.0, 0.0, relu_centered)


def synthetic_profile(mu1, mustar_sq, name="synthetic"):
    """Profile with prescribed moments, for solver-level tests."""
    return ActivationProfile(name=name, evaluator=None, mu0=0.0, mu1=mu1,
                             mustar_sq=mustar_sq, quad_order=0)
