"""Quadrature, numerical derivatives and divided differences."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate as sp_integrate

from escortbounds import numerics
from escortbounds.errors import DomainError, NodeError
from escortbounds.model import Support
from escortbounds.numerics import (NodeSet, QuadratureSettings, derivative, divided_difference,
                                   divided_difference_values, integrate, integrate_interval,
                                   lagrange_divided_difference, multiparam_divided_difference)


class TestIntegrate:
    def test_gaussian_density_integrates_to_one(self):
        sup = Support(lower=-np.inf, upper=np.inf)
        val = integrate(lambda x: np.exp(-x * x / 2) / math.sqrt(2 * math.pi), sup, 0.0)
        assert abs(val - 1.0) < 1e-10

    def test_parameter_dependent_interval(self):
        sup = Support(lower=0.0, upper=lambda t: t)
        val = integrate(lambda x: 5 * x ** 4 / 2.0 ** 5, sup, 2.0)
        assert abs(val - 1.0) < 1e-12

    def test_semi_infinite_exponential_moment(self):
        val = integrate_interval(lambda x: x ** 3 * np.exp(-x), 0.0, np.inf).value
        np.testing.assert_allclose(val, 6.0, rtol=1e-10)

    def test_vector_valued_integrand(self):
        res = integrate_interval(lambda x: np.array([np.ones_like(x), x, x * x]), 0.0, 1.0, ncomp=3)
        np.testing.assert_allclose(res.value, [1.0, 0.5, 1.0 / 3.0], rtol=1e-13)

    def test_kink_breakpoint(self):
        val = integrate_interval(lambda x: np.abs(x - 0.3), 0.0, 1.0, breakpoints=[0.3]).value
        np.testing.assert_allclose(val, 0.5 * (0.3 ** 2 + 0.7 ** 2), rtol=1e-13)

    def test_discrete_lattice_sum(self):
        from scipy import stats

        sup = Support(kind="discrete", lower=0.0, upper=np.inf)
        val = integrate(lambda s: s * stats.poisson.pmf(s, 2.0), sup, 2.0, truncation=60)
        np.testing.assert_allclose(val, 2.0, rtol=1e-13)

    def test_fixed_composite_scheme(self):
        s = QuadratureSettings(scheme="fixed-composite")
        val = integrate_interval(lambda x: np.sin(x), 0.0, np.pi, settings=s).value
        np.testing.assert_allclose(val, 2.0, rtol=1e-10)

    @pytest.mark.parametrize("kw", [{"abs_tol": 0.0}, {"rel_tol": -1.0}, {"max_subdivisions": 0},
                                    {"scheme": "simpson"}])
    def test_invalid_settings(self, kw):
        with pytest.raises(ValueError):
            QuadratureSettings(**kw)

    def test_environment_tolerance(self, monkeypatch):
        monkeypatch.setenv("ESCORTBOUNDS_ABS_TOL", "1e-7")
        assert QuadratureSettings().abs_tol == 1e-7

    @settings(max_examples=25, deadline=None)
    @given(st.floats(0.2, 5.0), st.floats(0.5, 4.0))
    def test_gamma_moments_match_scipy(self, shape, scale):
        fn = lambda x: x ** shape * np.exp(-x / scale)
        ours = integrate_interval(fn, 0.0, np.inf, scale=scale).value
        ref = sp_integrate.quad(fn, 0.0, np.inf, epsabs=1e-13, epsrel=1e-12)[0]
        np.testing.assert_allclose(ours, ref, rtol=1e-8)


class TestDerivative:
    def test_quartic_first_derivative(self):
        val, _ = derivative(lambda t: 2 * t ** 4, 1.0)
        assert abs(val - 8.0) < 1e-8

    def test_constant(self):
        val, _ = derivative(lambda t: 3.0, 1.0)
        assert abs(val) < 1e-12

    def test_second_derivative_of_square(self):
        val, _ = derivative(lambda t: t * t, 1.0, order=2)
        assert abs(val - 2.0) < 1e-6

    @pytest.mark.parametrize("order", [1, 2, 3, 4])
    def test_exponential_all_orders(self, order):
        val, err = derivative(np.exp, 0.5, order=order)
        np.testing.assert_allclose(val, math.exp(0.5), rtol=1e-5)
        assert err < 1e-3

    def test_stencil_leaving_domain(self):
        with pytest.raises(DomainError):
            derivative(math.sqrt, 1e-5, domain=(0.0, np.inf))

    def test_bad_order(self):
        with pytest.raises(ValueError):
            derivative(np.exp, 0.0, order=5)


class TestDividedDifferences:
    def test_square_on_three_nodes(self):
        table = divided_difference(lambda t: t * t, [1.0, 2.0, 4.0])
        assert table.values[1][0] == 3.0
        assert table.values[1][1] == 6.0
        assert table.leading(2) == 1.0

    def test_constant_has_zero_differences(self):
        table = divided_difference(lambda t: 5.0, [0.5, 1.0, 1.5])
        assert table.leading(1) == 0.0 and table.leading(2) == 0.0

    def test_linear_function(self):
        table = divided_difference(lambda t: 2 * t / 3, [1.0, 1.7])
        np.testing.assert_allclose(table.leading(1), 2.0 / 3.0, rtol=1e-15)

    def test_duplicate_nodes(self):
        with pytest.raises(NodeError):
            NodeSet([1.0, 1.0])

    def test_single_node(self):
        with pytest.raises(NodeError):
            NodeSet([1.0])

    def test_node_outside_domain(self):
        with pytest.raises(NodeError):
            NodeSet([1.0, -0.5], domain=(0.0, np.inf))

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-5, 5), min_size=2, max_size=6, unique=True).filter(
        lambda v: min(abs(a - b) for i, a in enumerate(v) for b in v[i + 1:]) > 0.05))
    def test_recursion_matches_lagrange_form(self, nodes):
        vals = np.sin(nodes)
        rows = divided_difference_values(vals, nodes)
        for j in range(1, len(nodes)):
            np.testing.assert_allclose(rows[j][0], lagrange_divided_difference(vals, nodes, j),
                                       rtol=1e-8, atol=1e-10)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-3, 3), min_size=4, max_size=4, unique=True).filter(
        lambda v: min(abs(a - b) for i, a in enumerate(v) for b in v[i + 1:]) > 0.1),
        st.floats(-4, 4).filter(lambda c: abs(c) > 0.1))
    def test_leading_coefficient_of_cubic(self, nodes, lead):
        poly = lambda t: lead * t ** 3 - 2 * t + 1
        table = divided_difference(poly, nodes)
        np.testing.assert_allclose(table.leading(3), lead, rtol=1e-7)

    def test_clustered_nodes_approach_derivative(self):
        h = 1e-4
        table = divided_difference(np.exp, [1.0, 1.0 + h, 1.0 + 2 * h])
        np.testing.assert_allclose(table.leading(1), math.exp(1.0), rtol=1e-3)
        np.testing.assert_allclose(2 * table.leading(2), math.exp(1.0), rtol=1e-3)

    def test_multiparam_single_coordinate(self):
        h = lambda p: p[0] ** 2 + 3 * p[1]
        table = multiparam_divided_difference(h, [[1.0, 2.0], [2.0, 2.0], [4.0, 2.0]], 0)
        assert table.leading(1) == 3.0
        assert table.leading(2) == 1.0
        lin = multiparam_divided_difference(h, [[1.0, 2.0], [1.0, 5.0]], 1)
        np.testing.assert_allclose(lin.leading(1), 3.0, rtol=1e-15)

    def test_multiparam_coincident_coordinate(self):
        with pytest.raises(NodeError):
            multiparam_divided_difference(lambda p: p[0], [[1.0, 2.0], [1.0, 3.0]], 0)


def test_bell_ratios_exponential_family():
    # log-derivatives of e^{a theta}: a, 0, 0 -> ratios 1, a, a^2, a^3
    a = 1.7
    r = numerics.bell_ratios([np.array(a), np.array(0.0), np.array(0.0)])
    np.testing.assert_allclose([float(v) for v in r], [1.0, a, a * a, a ** 3], rtol=1e-14)


def test_leibniz_rule():
    # (t^2 e^t)'' = e^t (t^2 + 4t + 2)
    t = 0.8
    a = [t * t, 2 * t, 2.0]
    b = [math.exp(t)] * 3
    np.testing.assert_allclose(numerics.leibniz(a, b, 2), math.exp(t) * (t * t + 4 * t + 2), rtol=1e-14)
