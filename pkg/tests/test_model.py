"""Catalog families: normalization, unbiasedness, closed forms and containment."""

import math

import numpy as np
import pytest
from scipy import integrate as sp_integrate, stats

from escortbounds import catalog
from escortbounds.errors import CatalogError, DomainError
from escortbounds.model import (EscortPair, Statistic, expectation, gaussian_mean, gaussian_sample,
                                normalization_check, poisson_sum, unbiasedness_check)

NAMES = catalog.catalog_names()
GRID = (0.3, 0.7, 1.0, 1.8, 3.0)


def _trunc(entry):
    return 60 if entry.f.is_discrete else None


class TestCatalog:
    def test_seven_entries(self):
        assert NAMES == ["uniform-max", "expmin", "uniform-max-power", "gamma-scale", "normal-x4",
                         "poisson-pair", "uniform-joint-max"]

    def test_unknown_name(self):
        with pytest.raises(CatalogError):
            catalog.catalog_lookup("uniform-min")

    def test_unknown_hyper_key(self):
        with pytest.raises(CatalogError):
            catalog.catalog_lookup("uniform-max", {"m": 3})

    @pytest.mark.parametrize("name,hyper", [("uniform-max", {"n": 0}), ("uniform-max", {"n": 2.5}),
                                            ("gamma-scale", {"alpha": 1.0, "k": -1}),
                                            ("gamma-scale", {"k": 0}), ("uniform-max-power", {"k": 0})])
    def test_invalid_hyper_values(self, name, hyper):
        with pytest.raises(CatalogError):
            catalog.catalog_lookup(name, hyper)

    def test_parse_hyper(self):
        assert catalog.parse_hyper(["n=5", "alpha=2.5"]) == {"n": 5, "alpha": 2.5}
        with pytest.raises(CatalogError):
            catalog.parse_hyper(["n"])
        with pytest.raises(CatalogError):
            catalog.parse_hyper(["n=five"])

    def test_hyper_recorded(self):
        assert dict(catalog.catalog_lookup("uniform-max", {"n": 3}).hyper) == {"n": 3}


class TestNormalization:
    def test_uniform_max_small_n(self):
        e = catalog.catalog_lookup("uniform-max", {"n": 2})
        assert normalization_check(e.f, 1.0) < 1e-10

    def test_normal_x4_escort(self):
        e = catalog.catalog_lookup("normal-x4")
        assert normalization_check(e.g, 1.0) < 1e-10

    def test_poisson_escort_truncated(self):
        e = catalog.catalog_lookup("poisson-pair")
        assert normalization_check(e.g, 1.0, truncation=60) < 1e-12

    @pytest.mark.parametrize("name", NAMES)
    def test_every_density_on_grid(self, name):
        e = catalog.catalog_lookup(name)
        for t in GRID:
            assert normalization_check(e.f, t, truncation=_trunc(e)) < 1e-9
            assert normalization_check(e.g, t, truncation=_trunc(e)) < 1e-9

    def test_gamma_escort_against_scipy(self):
        e = catalog.catalog_lookup("gamma-scale", {"alpha": 3.0, "k": 2})
        mass = sp_integrate.quad(lambda x: float(e.g.density(np.array([x]), 1.3)[0]), 0, np.inf, limit=200)[0]
        assert abs(mass - 1.0) < 1e-8


class TestUnbiasedness:
    def test_uniform_max(self):
        e = catalog.catalog_lookup("uniform-max", {"n": 5})
        assert unbiasedness_check(e, 2.0) < 1e-10

    def test_gamma_scale(self):
        e = catalog.catalog_lookup("gamma-scale")
        assert unbiasedness_check(e, 1.0) < 1e-10

    def test_uniform_joint_max_target(self):
        e = catalog.catalog_lookup("uniform-joint-max")
        np.testing.assert_allclose(expectation(e.f, e.statistic, 1.0), 0.8, rtol=1e-12)

    @pytest.mark.parametrize("name", NAMES)
    def test_every_entry_on_grid(self, name):
        e = catalog.catalog_lookup(name)
        for t in GRID:
            assert unbiasedness_check(e, t, truncation=_trunc(e)) < 1e-9 * max(1.0, abs(e.statistic.target(t)))


@pytest.mark.parametrize("name", NAMES)
def test_closed_forms_at_reference_points(name):
    e = catalog.catalog_lookup(name)
    kw = {"truncation": _trunc(e)}
    for t in e.reference_thetas:
        mean = expectation(e.f, e.statistic, t, **kw)
        second = expectation(e.f, lambda x: e.statistic(x) ** 2, t, **kw)
        if "variance" in e.closed_forms:
            np.testing.assert_allclose(second - mean ** 2, e.closed_forms["variance"](t), rtol=1e-8)
        if "lambda" in e.closed_forms:
            np.testing.assert_allclose(expectation(e.g, e.statistic, t, **kw), e.closed_forms["lambda"](t),
                                       rtol=1e-9)
        if "target" in e.closed_forms:
            np.testing.assert_allclose(mean, e.closed_forms["target"](t), rtol=1e-10)


def test_uniform_max_power_variance_by_scipy():
    # independent check of k^2 theta^(2k) / (n (n + 2k)) at n=3, k=2
    n, k, t = 3, 2, 1.0
    m = lambda p: sp_integrate.quad(lambda x: x ** p * n * x ** (n - 1) / t ** n, 0, t)[0]
    c = (n + k) / n
    var = c * c * (m(2 * k) - m(k) ** 2)
    np.testing.assert_allclose(var, k * k / (n * (n + 2 * k)), rtol=1e-12)


class TestModelSpec:
    def test_domain_check(self):
        e = catalog.catalog_lookup("uniform-max")
        with pytest.raises(DomainError):
            e.f.check_theta(-1.0)
        with pytest.raises(DomainError):
            e.f.check_theta([1.0, 2.0])

    def test_density_zero_outside_support(self):
        e = catalog.catalog_lookup("uniform-max")
        assert np.all(e.f.density(np.array([-0.1, 1.5]), 1.0) == 0.0)

    def test_analytic_partial_matches_numeric(self):
        e = catalog.catalog_lookup("normal-x4")
        x = np.linspace(-3, 3, 7)
        analytic = e.g.partial(x, 1.2, 1)
        h = 1e-5
        numeric = (e.g.density(x, 1.2 + h) - e.g.density(x, 1.2 - h)) / (2 * h)
        np.testing.assert_allclose(analytic, numeric, rtol=1e-7, atol=1e-10)

    def test_poisson_sum_partials(self):
        m = poisson_sum(2)
        s = np.arange(6.0)
        expected = stats.poisson.pmf(s, 2.0) * ((s / 1.0 - 2) ** 2 - s / 1.0)
        np.testing.assert_allclose(m.partial(s, 1.0, 2), expected, rtol=1e-12, atol=1e-15)

    def test_gaussian_sample_product_density(self):
        m = gaussian_sample(5)
        assert normalization_check(m, [0.3, 1.5]) < 1e-9


class TestContainment:
    def test_escort_pairs_contained(self):
        for name in NAMES:
            e = catalog.catalog_lookup(name)
            assert e.escort.check_containment(1.0)

    def test_uniform_larger_node_violates(self):
        e = catalog.catalog_lookup("uniform-max")
        assert not e.escort.check_containment(1.0, 1.5)
        assert e.escort.check_containment(1.0, 0.5)

    def test_expmin_smaller_shift_violates(self):
        e = catalog.catalog_lookup("expmin")
        assert not e.escort.check_containment(1.0, 0.8)
        assert e.escort.check_containment(1.0, 1.2)

    def test_gaussian_tails_do_not_trigger(self):
        m = gaussian_mean(1.0, 1)
        assert EscortPair.self_pair(m).check_containment(0.0, 5.0)


def test_statistic_silences_pole():
    T = Statistic("1/x", lambda x: 1.0 / x)
    assert math.isinf(T(np.array([0.0]))[0])
