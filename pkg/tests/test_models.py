import numpy as np
import pytest
import sympy

from musielak_parabolic.errors import ConfigError
from musielak_parabolic.models import (
    accumulation_from_config,
    convection_from_config,
    expression_from_config,
    parse_expression,
    stress_from_config,
)


@pytest.mark.parametrize(
    "cfg, x, expected",
    [
        ({"kind": "zero"}, [0.3], 0.0),
        ({"kind": "constant", "params": {"value": 2.5}}, [0.3], 2.5),
        ({"kind": "sine", "amplitude": 2.0}, [0.5], 2.0),
        ({"kind": "bubble"}, [0.5], 0.25),
        ({"kind": "hat"}, [0.25], 0.5),
        ({"kind": "expr", "params": {"expr": "x*(1 - x)*t"}}, [0.5], 0.5),
    ],
)
def test_expression_kinds(cfg, x, expected):
    e = expression_from_config(cfg, 1)
    assert e(np.array([x]), 2.0 if cfg["kind"] == "expr" else 0.0)[0] == pytest.approx(expected)


def test_expression_2d_product():
    e = expression_from_config({"kind": "bubble"}, 2)
    assert e(np.array([[0.5, 0.5]]))[0] == pytest.approx(0.0625)
    assert parse_expression("x*y", 2).free_symbols == set(sympy.symbols("x0:2", real=True))


@pytest.mark.parametrize("bad", [{"kind": "mystery"}, {"kind": "expr"}, {"kind": "expr", "expr": "(("}])
def test_expression_errors(bad):
    with pytest.raises(ConfigError):
        expression_from_config(bad, 1)


def test_accumulation_symbolic_matches_numeric():
    b = accumulation_from_config({"kind": "linear-sine", "params": {"slope": 1.5, "amplitude": 0.2}})
    s = sympy.Symbol("s")
    f = sympy.lambdify(s, b.symbolic(s))
    df = sympy.lambdify(s, sympy.diff(b.symbolic(s), s))
    grid = np.linspace(-4, 4, 9)
    np.testing.assert_allclose(f(grid), b(grid), rtol=1e-14)
    np.testing.assert_allclose(df(grid), b.deriv(grid), rtol=1e-14)


def test_p_laplacian_stress_and_regularised_jacobian():
    a = stress_from_config({"kind": "p-laplacian", "params": {"exponent_expr": [3.0]}})
    xi = np.array([[3.0, 4.0]])
    x = np.zeros((1, 2))
    np.testing.assert_allclose(a(x, xi), 5.0 * xi)
    D = a.jacobian(x, xi, eps=0.0)[0]
    np.testing.assert_allclose(D, 5.0 * np.eye(2) + np.outer(xi[0], xi[0]) / 5.0)
    assert np.all(np.isfinite(a.jacobian(x, np.zeros((1, 2)))))
    assert not a(x, np.zeros((1, 2))).any()


def test_convection_direction_and_kinds():
    K = convection_from_config({"kind": "sine", "params": {"c": 0.2, "direction": [0.0, 1.0]}}, 2)
    np.testing.assert_allclose(K(np.array([np.pi / 2])), [[0.0, 0.2]])
    np.testing.assert_allclose(K.deriv(np.array([0.0])), [[0.0, 0.2]])
    with pytest.raises(ConfigError):
        convection_from_config({"kind": "cubic"}, 1)
    with pytest.raises(ConfigError):
        accumulation_from_config({"kind": "cubic"})
    with pytest.raises(ConfigError):
        stress_from_config({"kind": "cubic"})
