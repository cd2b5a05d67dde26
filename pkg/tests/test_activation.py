import math

import numpy as np
import pytest

from rfuniform.activation import (activation_by_name, centered, hermite_coeffs,
                                  residual_projection_variance)
from rfuniform.errors import DegenerateActivation, NonFiniteActivation

SQRT_2PI = math.sqrt(2 * math.pi)

# closed-form Gaussian integrals for the ReLU family (independent oracle):
#   E[relu(G)] = 1/sqrt(2 pi),  E[G relu(G)] = 1/2,  E[relu(G)^2] = 1/2
RELU_MU0 = 1 / SQRT_2PI
RELU_MU1 = 0.5
RELU_MUSTAR_SQ = 0.25 - 1 / (2 * math.pi)


def test_shifted_relu_matches_closed_forms():
    prof = activation_by_name("shifted_relu")
    assert abs(prof.mu0) < 1e-12
    assert abs(prof.mu1 - RELU_MU1) < 1e-12
    assert abs(prof.mustar_sq - RELU_MUSTAR_SQ) < 1e-12


def test_plain_relu_mean_and_centering():
    prof = activation_by_name("relu")
    assert abs(prof.mu0 - RELU_MU0) < 1e-12
    assert abs(prof.mu1 - RELU_MU1) < 1e-12
    assert abs(prof.mustar_sq - RELU_MUSTAR_SQ) < 1e-12
    with pytest.raises(DegenerateActivation):
        prof.require_centered()
    c = centered(prof)
    c.require_centered()
    assert c.mu0 == 0.0
    assert c.mu1 == prof.mu1
    assert c.mustar_sq == prof.mustar_sq
    x = np.linspace(-2, 2, 7)
    assert np.allclose(c.evaluator(x), np.maximum(x, 0) - RELU_MU0)


def test_linear_activation_is_degenerate():
    with pytest.raises(DegenerateActivation):
        hermite_coeffs(lambda x: x, name="identity")


def test_even_activation_is_degenerate():
    # odd-moment symmetry forces mu1 = 0 for x^2 - 1
    with pytest.raises(DegenerateActivation):
        hermite_coeffs(lambda x: x * x - 1.0, name="square")


def test_nonfinite_activation_rejected():
    with np.errstate(over="ignore"), pytest.raises(NonFiniteActivation):
        hermite_coeffs(lambda x: np.exp(x * x), name="blowup")


def test_quad_order_minimum():
    with pytest.raises(ValueError):
        hermite_coeffs(np.tanh, quad_order=10)


@pytest.mark.parametrize("name", ["relu", "shifted_relu"])
def test_quadrature_order_doubling_stability(name):
    p1 = activation_by_name(name, quad_order=200)
    p2 = activation_by_name(name, quad_order=400)
    assert abs(p1.mu0 - p2.mu0) < 1e-10
    assert abs(p1.mu1 - p2.mu1) < 1e-10
    assert abs(p1.mustar_sq - p2.mustar_sq) < 1e-10


def test_smooth_activation_order_doubling():
    p1 = hermite_coeffs(np.tanh, quad_order=200, name="tanh")
    p2 = hermite_coeffs(np.tanh, quad_order=400, name="tanh")
    assert abs(p1.mu1 - p2.mu1) < 1e-10
    assert abs(p1.mustar_sq - p2.mustar_sq) < 1e-10


@pytest.mark.parametrize("name", ["relu", "shifted_relu"])
def test_residual_projection_agrees(name):
    # mustar_sq both as E[s^2]-mu0^2-mu1^2 and as E[(s - mu0 - mu1 G)^2]
    prof = activation_by_name(name)
    assert abs(residual_projection_variance(prof) - prof.mustar_sq) < 1e-10


def test_residual_projection_agrees_smooth():
    prof = hermite_coeffs(np.tanh, name="tanh")
    assert abs(residual_projection_variance(prof) - prof.mustar_sq) < 1e-10


def test_determinism():
    a = activation_by_name("shifted_relu", quad_order=160)
    b = activation_by_name("shifted_relu", quad_order=160)
    assert (a.mu0, a.mu1, a.mustar_sq) == (b.mu0, b.mu1, b.mustar_sq)


def test_zeta_value():
    prof = activation_by_name("shifted_relu")
    assert abs(prof.zeta - RELU_MU1 ** 2 / RELU_MUSTAR_SQ) < 1e-12
