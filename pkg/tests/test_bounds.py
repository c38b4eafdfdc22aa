import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gapbounds import bounds as bd
from gapbounds.errors import DomainError, UnsupportedWeight
from gapbounds.intertwine import MatrixField
from gapbounds.model import (custom_component, identity_weight, make_gaussian, make_power_product,
                             make_product, make_weight, quadratic_component)
from gapbounds.oracle import Grid, default_grid, spectrum

from oracles import brute_min_1d, power_closed_form, power_U

QUARTIC = custom_component(lambda y: y**2 / 2 + y**4 / 4, lambda y: y + y**3, lambda y: 1 + 3 * y**2)


def test_first_order_examples():
    r = bd.first_order_bound(make_gaussian(2))
    assert r.applicable and r.value == 1.0
    Vp = make_power_product(1, 1.5, 0.0, 0.01)
    assert bd.first_order_bound(Vp, make_weight(Vp, "exp_eps_U", 0.25)).value == pytest.approx(0.5625)
    Vg = make_gaussian(1)
    assert bd.first_order_bound(Vg, make_weight(Vg, "exp_eps_U", 0.25)).value == pytest.approx(0.75)


def test_first_order_not_applicable_for_pure_power():
    r = bd.first_order_bound(make_power_product(1, 1.5, 0.0, 0.01))
    assert not r.applicable
    assert r.value is None
    assert {c.name for c in r.checks if not c.passed} >= {"hessian_floor_positive"}


def test_first_order_rejects_non_diagonal():
    with pytest.raises(UnsupportedWeight):
        bd.first_order_bound(make_gaussian(2), MatrixField(2, lambda x: np.eye(2)))


def test_cordero_examples():
    r = bd.cordero_bound(make_gaussian(2), 1.0)
    assert r.value == pytest.approx(2.0)
    assert r.constituents["lambda_1"].provenance == bd.ORACLE
    V = make_product([QUARTIC, quadratic_component(1.0)])
    lam1 = spectrum(V, Grid(2, 7.0, 101), k=2).gap()
    assert bd.cordero_bound(V, lam1).value == pytest.approx(lam1 + 1.0, abs=1e-9)
    assert not bd.cordero_bound(make_power_product(2, 1.5, 0.0, 0.01), 0.5).applicable


def test_second_order_examples():
    V = make_gaussian(2)
    lam1A = bd.lambda_1_A(V, identity_weight(2), grid=Grid(2, 7.0, 101))
    r = bd.second_order_bound(V, None, lam1A)
    assert r.value == pytest.approx(2.0, abs=1e-3)
    assert any("lambda_1^A" in n for n in r.notes)
    assert not bd.second_order_bound(V, None, 0.0).applicable


def test_second_order_power_against_prop41_and_oracle():
    V = make_power_product(2, 1.5, 0.1, 0.01)
    W = make_weight(V, "exp_eps_U", 0.25)
    lam1A = bd.lambda_1_A(V, W)
    so = bd.second_order_bound(V, W, lam1A)
    _, p2 = bd.prop41(V, 0.25)
    oracle = spectrum(V, default_grid(2), k=4).eigenvalues
    assert so.applicable and p2.applicable
    assert so.value > p2.value  # the oracle-fed route is sharper here
    assert oracle[3] >= so.value - 2e-2
    assert oracle[3] >= p2.value - 2e-2


def test_weighted_potential_spec():
    V = make_power_product(2, 1.5, 0.1, 0.05)
    W = make_weight(V, "exp_eps_U", [0.25, 0.1])
    spec = bd.weighted_potential(V, W, 1)
    x = np.array([[0.4, 1.5]])
    expected = V.components[0].value(x[:, 0]) + 0.8 * V.components[1].value(x[:, 1]) + V.interaction.value(x)
    assert spec.potential.value(x) == pytest.approx(expected)
    assert spec.index == 1 and spec.weight_family == "exp_eps_U"
    with pytest.raises(IndexError):
        bd.weighted_potential(V, W, 2)


def test_weighted_gap_gaussian():
    V = make_gaussian(1)
    W = make_weight(V, "exp_eps_U", 0.25)
    assert bd.weighted_gap(V, W, 0, grid=Grid(1, 8.0, 4001)) == pytest.approx(0.5, abs=1e-3)


def test_weighted_gap_identity_is_gap():
    V = make_product([QUARTIC])
    g = Grid(1, 8.0, 2001)
    assert bd.weighted_gap(V, identity_weight(1), 0, grid=g) == spectrum(V, g, k=2).gap()


def test_weighted_gap_analytic_below_oracle():
    V = make_power_product(2, 1.5, 0.0, 0.01)
    W = make_weight(V, "exp_eps_U", 0.25)
    ab = bd.alpha_beta(V, 0.25)
    for i in range(2):
        analytic = bd.weighted_gap(V, W, i, "analytic")
        assert analytic == pytest.approx(min(ab.alpha[1 - i], ab.beta[i]))
        assert bd.weighted_gap(V, W, i, "oracle") >= analytic - 2e-2


def test_lambda_1_A_min_and_ties():
    V = make_gaussian(2)
    W = make_weight(V, "exp_eps_U", [0.25, 0.1])
    g = Grid(2, 7.0, 101)
    gaps = bd.weighted_gaps(V, W, grid=g)
    assert gaps[0] == pytest.approx(0.5, abs=1e-3)
    assert gaps[1] == pytest.approx(0.8, abs=1e-3)
    assert bd.lambda_1_A(V, W, grid=g) == min(gaps)


def test_lambda_1_A_symmetric_equal_eps():
    V = make_power_product(2, 1.5, 0.1, 0.05)
    W = make_weight(V, "exp_eps_U", 0.2)
    g = Grid(2, 7.0, 81)
    gaps = bd.weighted_gaps(V, W, grid=g)
    assert gaps[0] == pytest.approx(gaps[1], abs=1e-9)


def test_alpha_example_and_beta_oracle():
    a, eps = 1.5, 0.25
    V = make_power_product(1, a, 0.0, 0.01)
    ab = bd.alpha_beta(V, eps)
    _, U1, U2 = power_U(a)
    ref_a, y_a = brute_min_1d(lambda y: 0.75 * U2(y) + 0.15625 * U1(y) ** 2, 1e-6, 8.0)
    ref_b, _ = brute_min_1d(lambda y: 0.375 * U2(y) + 0.15625 * 0.25 * U1(y) ** 2, 1e-6, 8.0)
    assert ab.alpha[0] == pytest.approx(ref_a, abs=1e-9)
    assert ab.alpha[0] == pytest.approx(0.5293, abs=1e-4)
    assert y_a == pytest.approx(1.129, abs=1e-3)
    assert ab.beta[0] == pytest.approx(ref_b, abs=1e-9)
    assert ab.provenance[0]["alpha"] == bd.ANALYTIC


def test_alpha_shift_by_coupling():
    base = bd.alpha_beta(make_power_product(2, 1.5, 0.0, 0.01), 0.25)
    coupled = bd.alpha_beta(make_power_product(2, 1.5, 0.1, 0.01), 0.25)
    assert coupled.c2 == pytest.approx(0.2)
    np.testing.assert_allclose(base.alpha - coupled.alpha, 0.02, atol=1e-12)
    np.testing.assert_allclose(base.beta - coupled.beta, 0.02, atol=1e-12)


def test_alpha_joint_route_not_below_separated():
    V = make_power_product(2, 1.5, 0.1, 0.01)
    sep = bd.alpha_beta(V, 0.25)
    joint = bd.alpha_beta(V, 0.25, route="joint", grid_n=101)
    assert np.all(joint.alpha >= sep.alpha - 1e-9)
    assert np.all(joint.beta >= sep.beta - 1e-9)


def test_alpha_numeric_route_for_custom_components():
    V = make_product([QUARTIC, QUARTIC])
    ab = bd.alpha_beta(V, 0.2)
    ref, _ = brute_min_1d(lambda y: 0.8 * (1 + 3 * y**2) + 0.2 * 0.7 * (y + y**3) ** 2, -8, 8)
    assert ab.alpha[0] == pytest.approx(ref, abs=1e-8)
    assert ab.provenance[0]["alpha"] == bd.GRID


def test_prop41_power_example():
    V = make_power_product(2, 1.5, 0.1, 0.01)
    b1, b2 = bd.prop41(V, 0.25)
    a = 1.5
    gamma = (3 * a - 2) * (a - 1) ** 2 * a / 8
    assert gamma == 0.1171875
    assert b1.value == pytest.approx(gamma - 2 * 0.1**2, abs=1e-12)
    assert b2.value == pytest.approx(2 * gamma - 2 * 0.1**2, abs=1e-12)
    assert b1.value == pytest.approx(0.0971875, abs=1e-12)
    assert b2.value == pytest.approx(0.214375, abs=1e-12)
    assert b1.constituents["gamma"].provenance == bd.ANALYTIC


def test_prop41_gamma_composition():
    V = make_power_product(3, 1.7, 0.05, 0.01)
    eps = np.array([0.1, 0.2, 0.3])
    gamma, per, _ = bd.gamma_constant(V, eps)
    expected = [(1 - 1.5 * e) * (1 - 2 * e) ** 2 * power_closed_form(1.7, e) for e in eps]
    np.testing.assert_allclose(per, expected, rtol=1e-10)
    assert gamma == pytest.approx(min(expected), rel=1e-10)


def test_prop41_monotone_in_coupling():
    vals = [bd.prop41(make_power_product(2, 1.5, c, 0.01), 0.25)[0].raw_value for c in (0, 0.05, 0.1, 0.2, 0.3)]
    assert np.all(np.diff(vals) <= 0)


def test_prop41_not_applicable_for_strong_coupling():
    b1, _ = bd.prop41(make_power_product(2, 1.5, 0.5, 0.01), 0.25)
    assert not b1.applicable


def test_prop41_rejects_bad_eps_and_gaussian_exponent():
    with pytest.raises(DomainError):
        bd.prop41(make_power_product(2, 1.5, 0.1, 0.01), 0.5)
    with pytest.raises(DomainError):
        make_power_product(2, 2.0, 0.1, 0.01)


def test_closed_form_examples():
    assert bd.closed_form_inf_power(1.5, 0.25) == pytest.approx(0.75, abs=1e-15)
    assert bd.closed_form_inf_power(1.5, 0.1) == pytest.approx(0.5526, abs=1e-4)
    # vanishes like eps^(1/3) for a = 1.5
    small = [bd.closed_form_inf_power(1.5, e) for e in (1e-4, 1e-6, 1e-8, 1e-12)]
    assert np.all(np.diff(small) < 0) and small[-1] < 2e-4
    assert small[2] / small[1] == pytest.approx(100 ** (-1 / 3), rel=1e-2)
    for bad in [(1.0, 0.2), (2.0, 0.2), (1.5, 0.0), (1.5, 0.5)]:
        with pytest.raises(DomainError):
            bd.closed_form_inf_power(*bad)


@settings(max_examples=25, deadline=None)
@given(st.floats(1.05, 1.95), st.floats(0.01, 0.49))
def test_closed_form_matches_brute_force(a, eps):
    _, U1, U2 = power_U(a)
    ref, _ = brute_min_1d(lambda y: U2(y) + eps * U1(y) ** 2, 1e-4, 60.0, n=200_001)
    assert bd.closed_form_inf_power(a, eps) == pytest.approx(ref, rel=1e-7)


def test_optimize_eps_dominates_fixed_choice():
    V = make_power_product(2, 1.5, 0.1, 0.01)
    eps, val = bd.optimize_eps(V, "gamma")
    assert val >= 0.1171875
    assert bd.gamma_constant(V, eps)[0] == pytest.approx(val)


def test_optimize_eps_quadratic_goes_to_small_eps():
    V = make_product([custom_component(lambda y: y**2 / 2, lambda y: y, lambda y: np.ones_like(y))])
    eps, _ = bd.optimize_eps(V, "gamma")
    assert eps[0] < 0.01


def test_optimize_eps_single_coordinate_matches_golden():
    from scipy import optimize
    V = make_power_product(1, 1.6, 0.0, 0.01)
    eps, val = bd.optimize_eps(V, "gamma")
    res = optimize.minimize_scalar(lambda e: -(1 - 1.5 * e) * (1 - 2 * e) ** 2 * power_closed_form(1.6, e),
                                   bounds=(1e-3, 0.5 - 1e-3), method="bounded", options={"xatol": 1e-10})
    assert val == pytest.approx(-res.fun, rel=1e-8)
    assert eps[0] == pytest.approx(res.x, abs=1e-4)


def test_optimize_eps_lambda1_objective():
    V = make_power_product(2, 1.5, 0.1, 0.01)
    eps, val = bd.optimize_eps(V, "lambda1_bound")
    fixed = bd.alpha_beta(V, 0.25).alpha.min()
    assert val >= fixed
    assert bd.alpha_beta(V, eps).alpha.min() == pytest.approx(val)


def test_bound_result_serialization():
    r = bd.first_order_bound(make_power_product(1, 1.5, 0.0, 0.01))
    d = r.as_dict()
    assert d["value"] is None and d["applicable"] is False
    assert isinstance(d["raw_value"], float)
    assert all(set(c) == {"name", "passed", "margin"} for c in d["checks"])


def test_applicable_bounds_below_oracle_corpus():
    cases = [
        (make_gaussian(1), None), (make_gaussian(2), None),
        (make_product([QUARTIC]), None),
        (make_power_product(1, 1.5, 0.0, 0.01), 0.25),
        (make_power_product(2, 1.5, 0.1, 0.01), 0.25),
        (make_power_product(2, 1.7, 0.05, 0.05), 0.15),
    ]
    for V, eps in cases:
        ev = spectrum(V, default_grid(V.dim), k=V.dim + 2).eigenvalues
        lam1, lamd = ev[1], ev[V.dim + 1]
        W = identity_weight(V.dim) if eps is None else make_weight(V, "exp_eps_U", eps)
        results = [bd.first_order_bound(V), bd.first_order_bound(V, W), bd.cordero_bound(V, lam1),
                   bd.second_order_bound(V, W, bd.lambda_1_A(V, W))]
        if eps is not None:
            results += list(bd.prop41(V, eps))
        for r in results:
            if r.applicable:
                target = lam1 if r.target == bd.LAMBDA_1 else lamd
                assert target >= r.value - 2e-2, (V.family, r.method, r.value, target)
