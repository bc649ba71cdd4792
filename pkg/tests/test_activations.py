import numpy as np
import pytest

from grouplab.activations import Activation, activation_from_spec

KINDS = ["quadratic", "linear_quadratic", "silu", "tanh", "sigmoid", "linear", "relu"]


@pytest.mark.parametrize("kind", KINDS)
def test_derivative(kind):
    act = Activation(kind)
    x = np.array([-1.3, -0.4, 0.25, 0.9, 2.0])
    numeric = (act(x + 1e-6) - act(x - 1e-6)) / 2e-6
    assert np.allclose(act.deriv(x), numeric, atol=1e-6)


def test_linear_quadratic_coefficients():
    act = activation_from_spec("linear_quadratic", a=0.0, b=0.5)
    assert np.allclose(act(np.array([2.0])), [2.0])
    assert np.allclose(act.deriv(np.array([2.0])), [2.0])


def test_relu_kink_uses_zero():
    assert Activation("relu").deriv(np.array([0.0]))[0] == 0.0


def test_phi():
    assert np.allclose(Activation("quadratic").phi(np.array([0.5, 3.0])), [2.0, 2.0])
    assert np.allclose(Activation("relu").phi(np.array([0.5, 2.0])), [2.0, 0.5])


def test_unknown_kind():
    with pytest.raises(ValueError):
        Activation("cubic")(np.zeros(2))
