import numpy as np
import pytest

from randeq.expr import Affine, ExpressionError, Formula, VectorField, compile_field


@pytest.mark.parametrize("text, x, expected", [
    ("-x - x**3", 2.0, -10.0),
    ("0.25*sin(x)", np.pi / 2, 0.25),
    ("exp(x) - cos(x) + tanh(0*x)", 0.0, 0.0),
    ("1 - x / 4", 2.0, 0.5),
    ("x**0.5", 4.0, 2.0),
    ("-(x)", 3.0, -3.0),
])
def test_scalar_formulas(text, x, expected):
    f = compile_field([text], 1)
    assert f(np.array([x]))[0] == pytest.approx(expected, rel=1e-15)


def test_vector_field_on_batch():
    f = compile_field(["x1", "-x0 - x1"], 2)
    X = np.array([[1.0, 2.0], [3.0, -1.0]])
    np.testing.assert_array_equal(f(X), [[2.0, -3.0], [-1.0, -2.0]])
    np.testing.assert_array_equal(f(X[0]), [2.0, -3.0])


def test_integer_power_exact():
    f = Formula("x**3", 1)
    assert f(np.array([1.1])) == 1.1 * 1.1 * 1.1


def test_affine():
    f = compile_field({"affine": {"matrix": [[0, -2], [3, -1]], "offset": [1, 0]}}, 2)
    assert isinstance(f, Affine)
    np.testing.assert_array_equal(f(np.array([1.0, 1.0])), [-1.0, 2.0])


@pytest.mark.parametrize("text", [
    "__import__('os')",
    "x.real",
    "open(x)",
    "x ** x",
    "x2",
    "y",
    "sin(x, x)",
    "x if x else 1",
    "lambda: 1",
    "x +",
])
def test_rejected(text):
    with pytest.raises(ExpressionError):
        compile_field([text], 2 if text == "x2" else 1)


def test_component_count_checked():
    with pytest.raises(ExpressionError, match="components"):
        compile_field(["x0"], 2)
    with pytest.raises(ExpressionError):
        compile_field({"affine": {"matrix": [[1.0]]}}, 2)


def test_describe():
    assert VectorField(("-x",)).describe() == "[-x]"
