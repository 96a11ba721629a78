import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, optimize

from musielak_parabolic.errors import ConjugateInfiniteError, DivergentModularError
from musielak_parabolic.fem import FemFunction, FemSpace, build_mesh, quadrature_rule, restrict
from musielak_parabolic.musielak import (
    MusielakFunction,
    SampledField,
    delta2_probe,
    exponent_bounds,
    from_config,
    luxemburg_norm,
    modular,
    orlicz_dual_bound,
    power,
    variable_power,
    young_conjugate,
    young_inequality_check,
)


def constant_field(m, value):
    space = FemSpace(build_mesh(1, m))
    # constant data is not in the Dirichlet space; sample it directly
    u = space.zero().sampled()
    return SampledField(u.points, np.full_like(u.values, value), u.weights, u.cells)


def exp_minus_one():
    return MusielakFunction(lambda x, t: np.expm1(np.abs(t)), lambda x, t: np.exp(np.abs(t)))


# modular -------------------------------------------------------------------


def test_modular_constant_square():
    assert modular(power(2), constant_field(4, 3.0)) == pytest.approx(9.0, rel=1e-14)


def test_modular_zero():
    assert modular(power(2), constant_field(4, 0.0)) == 0.0


def test_modular_variable_exponent_closed_form():
    phi = variable_power([2.0, 1.0])
    got = modular(phi, constant_field(8, 2.0))
    ref, _ = integrate.quad(lambda x: 2.0 ** (2.0 + x), 0.0, 1.0, epsabs=1e-14)
    assert ref == pytest.approx(4.0 / np.log(2.0), rel=1e-13)
    assert got == pytest.approx(ref, rel=1e-12)


def test_modular_divergence_names_cell():
    space = FemSpace(build_mesh(1, 4))
    u = FemFunction(space, np.array([1.0, 1e300, 1.0]))
    with pytest.raises(DivergentModularError) as info:
        modular(power(3), u)
    assert info.value.cell in (1, 2)


# Luxemburg norm ------------------------------------------------------------


def test_luxemburg_homogeneous_square():
    assert luxemburg_norm(power(2), constant_field(4, 2.0)) == pytest.approx(2.0, rel=1e-9)


def test_luxemburg_variable_exponent_unit():
    assert luxemburg_norm(variable_power([2.0, 1.0]), constant_field(4, 1.0)) == pytest.approx(1.0, rel=1e-9)


def test_luxemburg_variable_exponent_bisection_oracle():
    def g(lam):
        return integrate.quad(lambda x: (2.0 / lam) ** (2.0 + x), 0.0, 1.0, epsabs=1e-15)[0] - 1.0

    ref = optimize.brentq(g, 1.0, 4.0, xtol=1e-15)
    got = luxemburg_norm(variable_power([2.0, 1.0]), constant_field(8, 2.0), tol=1e-12)
    assert got == pytest.approx(ref, rel=1e-9)


def test_luxemburg_zero_field():
    assert luxemburg_norm(power(2), constant_field(2, 0.0)) == 0.0


@settings(max_examples=40, deadline=None)
@given(
    coeffs=st.lists(st.floats(-5, 5), min_size=3, max_size=3).filter(lambda c: max(map(abs, c)) > 1e-3),
    c=st.floats(0.1, 10.0),
    p=st.sampled_from([1.5, 2.0, 3.0]),
)
def test_luxemburg_homogeneity_and_threshold(coeffs, c, p):
    space = FemSpace(build_mesh(1, 4))
    u = FemFunction(space, np.array(coeffs))
    phi = power(p)
    n1 = luxemburg_norm(phi, u, tol=1e-12)
    assert luxemburg_norm(phi, u * c, tol=1e-12) == pytest.approx(c * n1, rel=1e-9)
    # the modular is exactly one at the norm
    assert modular(phi, u.sampled().scaled(1.0 / n1)) == pytest.approx(1.0, rel=1e-9)


@settings(max_examples=25, deadline=None)
@given(
    a=st.lists(st.floats(-3, 3), min_size=3, max_size=3).filter(lambda c: max(map(abs, c)) > 1e-2),
    b=st.lists(st.floats(-3, 3), min_size=3, max_size=3).filter(lambda c: max(map(abs, c)) > 1e-2),
)
def test_holder_inequality(a, b):
    space = FemSpace(build_mesh(1, 4))
    u, v = FemFunction(space, np.array(a)), FemFunction(space, np.array(b))
    phi = power(2.0, 0.5)
    lhs = abs(space.integrate(u.at_quadrature() * v.at_quadrature()))
    rhs = luxemburg_norm(phi, u) * orlicz_dual_bound(phi, v)
    assert lhs <= rhs * (1 + 1e-8)


# Young conjugate -----------------------------------------------------------


def test_conjugate_quadratic_self_dual():
    assert young_conjugate(power(2, 0.5), [0.5], 3.0) == pytest.approx(4.5, rel=1e-12)


def test_conjugate_linear_below_slope():
    assert young_conjugate(power(1), [0.5], 0.5) == pytest.approx(0.0, abs=1e-14)


def test_conjugate_cubic():
    assert young_conjugate(power(3, 1.0 / 3.0), [0.5], 2.0) == pytest.approx(2.0 / 3.0 * 2.0**1.5, rel=1e-10)


def test_conjugate_linear_above_slope_is_infinite():
    with pytest.raises(ConjugateInfiniteError):
        young_conjugate(power(1), [0.5], 2.0)


def test_conjugate_without_derivative():
    phi = power(2, 0.5)
    bare = MusielakFunction(phi.evaluate)
    assert young_conjugate(bare, [0.5], 3.0) == pytest.approx(4.5, rel=1e-10)


@settings(max_examples=30, deadline=None)
@given(s=st.floats(0.05, 20.0), p=st.sampled_from([1.5, 2.0, 3.0]))
def test_double_conjugate_recovers_phi(s, p):
    phi = power(p)
    psi = phi.conjugate()
    # phi** (s) = sup_r (s r - phi*(r)); the sup sits at r = phi'(s)
    r = phi.derivative([0.5], s)
    assert s * r - young_conjugate(phi, [0.5], float(r)) == pytest.approx(float(phi([0.5], s)), rel=1e-8)
    assert float(psi([0.5], r)) >= 0.0


def test_young_equality_at_derivative_point():
    assert float(young_inequality_check(power(2, 0.5), [0.5], 1.0, 1.0)) == pytest.approx(0.0, abs=1e-14)


def test_young_residual_example():
    assert float(young_inequality_check(power(2, 0.5), [0.5], 1.0, 3.0)) == pytest.approx(2.0, rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(t=st.floats(0.0, 50.0), p=st.floats(1.5, 4.0))
def test_young_residual_at_zero_s(t, p):
    phi = power(p)
    assert float(young_inequality_check(phi, [0.3], 0.0, t)) >= 0.0


@settings(max_examples=80, deadline=None)
@given(s=st.floats(0.0, 30.0), t=st.floats(0.0, 30.0), x=st.floats(0.0, 1.0))
def test_young_residual_non_negative(s, t, x):
    phi = variable_power([2.0, 0.5])
    assert float(young_inequality_check(phi, [x], s, t)) >= -1e-9


# Delta_2 and exponents -----------------------------------------------------


def test_delta2_power_three():
    rep = delta2_probe(power(3))
    assert rep.satisfied
    assert rep.C_estimate == pytest.approx(8.0, rel=1e-3)


def test_delta2_square():
    rep = delta2_probe(power(2))
    assert rep.satisfied
    assert rep.C_estimate == pytest.approx(4.0, rel=1e-3)


def test_delta2_exponential_fails():
    rep = delta2_probe(exp_minus_one())
    assert not rep.satisfied
    finite = rep.ratios[np.isfinite(rep.ratios)]
    assert np.all(np.diff(finite[finite > 10]) > 0)


def test_delta2_short_grid_rejected():
    with pytest.raises(ValueError):
        delta2_probe(power(2), t_grid=2.0 ** np.arange(0, 5))


def test_exponent_bounds_affine():
    lo, hi = exponent_bounds(variable_power([2.0, 0.5]), np.linspace(0, 1, 11)[:, None])
    assert (lo, hi) == pytest.approx((2.0, 2.5))


def test_from_config_kinds():
    assert from_config({"kind": "power", "params": {"exponent": 3}})([0.1], 2.0) == pytest.approx(8.0)
    phi = from_config({"kind": "variable-power", "exponent_expr": [2.0, 1.0]})
    assert phi([1.0], 2.0) == pytest.approx(8.0)
    with pytest.raises(ValueError):
        from_config({"kind": "exp"})


def test_restrict_field_norm_matches_l2():
    space = FemSpace(build_mesh(1, 16))
    u = restrict(lambda x: np.sin(np.pi * x[:, 0]), space)
    fine = quadrature_rule(1, 8)
    assert luxemburg_norm(power(2), u, quad=fine, tol=1e-13) == pytest.approx(u.l2_norm(), rel=1e-10)
