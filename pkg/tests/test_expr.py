import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from gapbounds.errors import ConfigError, ExpressionError
from gapbounds.expr import coordinate_names, parse, parse_component, parse_potential


def test_precedence_and_associativity():
    e = parse_potential("1 + 2*x1^2 - x2/4", 2)
    assert e(3.0, 2.0) == pytest.approx(1 + 18 - 0.5)
    assert parse_component("2^3^2")(0.0) == 512.0
    assert parse_component("-y^2")(3.0) == -9.0
    assert parse_component("(-y)^2")(3.0) == 9.0
    assert parse_component("y - -y")(2.0) == 4.0


def test_functions_and_pi():
    e = parse_component("sqrt(abs(y)) + exp(log(2)) + pi")
    assert e(-4.0) == pytest.approx(2 + 2 + np.pi)


def test_vectorized_at_points():
    e = parse_potential("x1^2/2 + x2^4/4", 2)
    x = np.array([[1.0, 2.0], [0.0, -1.0], [3.0, 0.5]])
    assert_allclose(e.at_points(x), x[:, 0] ** 2 / 2 + x[:, 1] ** 4 / 4)


def test_coordinate_names():
    assert coordinate_names(3) == ("x1", "x2", "x3")


def test_wrong_argument_count():
    with pytest.raises(TypeError):
        parse_potential("x1 + x2", 2)(1.0)


@pytest.mark.parametrize("text, pos", [
    ("x1 + z", 5),
    ("x1 $ 2", 3),
    ("x1 ** 2", 3),
    ("x1 + ", None),
    ("sin(x1)", 0),
    ("exp(x1, 2)", 6),
    ("exp + 1", 0),
])
def test_errors_carry_positions(text, pos):
    with pytest.raises(ExpressionError) as info:
        parse_potential(text, 1)
    if pos is not None:
        assert info.value.position == pos
    assert "^" in str(info.value)


@pytest.mark.parametrize("text", [
    "__import__('os')",
    "x1.real",
    "[x1]",
    "x1 if x1 else 0",
    "lambda: 1",
    "x1 < 2",
    "True",
    "x1 % 2",
    "'a'",
])
def test_rejects_unsafe_syntax(text):
    with pytest.raises(ExpressionError):
        parse_potential(text, 1)


def test_empty_is_config_error():
    with pytest.raises(ConfigError):
        parse_component("   ")


def test_unknown_name_lists_allowed():
    with pytest.raises(ExpressionError, match="allowed: x1, x2, pi"):
        parse_potential("x3", 2)


_term = st.sampled_from(["y", "2", "0.5", "(y+1)", "abs(y)", "exp(y/4)"])
_op = st.sampled_from(["+", "-", "*"])


@settings(max_examples=80, deadline=None)
@given(st.lists(st.tuples(_op, _term), min_size=1, max_size=5), _term, st.floats(-3, 3))
def test_matches_numpy_evaluation(pairs, first, y):
    text = first + "".join(f" {op} {t}" for op, t in pairs)
    env = {"y": y, "abs": np.abs, "exp": np.exp}
    ref = eval(text, {"__builtins__": {}}, env)  # the test builds text from a fixed safe alphabet
    assert parse_component(text)(y) == pytest.approx(ref, rel=1e-12, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.1, 3), st.integers(1, 3), st.integers(1, 3))
def test_caret_matches_power(y, p, q):
    assert parse_component(f"y^{p}^{q}")(y) == pytest.approx(y ** (p ** q))
    assert parse("-a^2", ("a",))(y) == pytest.approx(-(y**2))
