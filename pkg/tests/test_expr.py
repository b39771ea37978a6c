import numpy as np
import pytest

from centract import spaces as sp
from centract.errors import InvalidSpec
from centract.expr import Expression, compile_expression, coordinate_names


def test_plane_expression():
    e = compile_expression("0.5*(p**2 + q**2) - sin(t)", "plane")
    m = np.array([[1.0, 2.0], [0.0, 0.0]])
    assert np.allclose(e(m, 0.3), [2.5 - np.sin(0.3), -np.sin(0.3)])
    assert e.uses_time


def test_sphere_coordinates():
    e = Expression("-cos(theta) + 0*phi + x*y - z", "sphere")
    m = sp.SPHERE.from_chart(np.array([0.4, 1.3]), np.array([0.2, 2.0]))
    assert np.allclose(e(m), -2 * m[:, 2] + m[:, 0] * m[:, 1])
    assert not e.uses_time


def test_hyperbolic_coordinates():
    e = Expression("cosh(rho) - z", "hyperbolic")
    m = sp.HYPERBOLIC.from_chart(np.array([0.3, 1.2]), np.array([0.0, 1.0]))
    assert np.max(np.abs(e(m))) < 1e-12


def test_constant_broadcasts():
    assert Expression("pi", "torus")(np.zeros((4, 2))).shape == (4,)


def test_coordinate_names():
    assert coordinate_names("plane") == ("p", "q")
    assert "theta" in coordinate_names("sphere")
    assert "rho" in coordinate_names("hyperbolic")


@pytest.mark.parametrize("text", [
    "__import__('os')",
    "p.real",
    "p[0]",
    "lambda: 1",
    "theta",
    "foo(p)",
    "sin(p, q)",
    "p if q else 1",
    "'abc'",
    "p +",
    "p // q",
    "True",
])
def test_rejected(text):
    with pytest.raises(InvalidSpec):
        Expression(text, "plane")
