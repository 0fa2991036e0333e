"""Escort synthesis, deformed families and the equality condition."""

import io

import numpy as np
import pytest
from scipy import special, stats

from escortbounds import catalog
from escortbounds.bounds import naudts_bound
from escortbounds.errors import RegularityError, SynthesisError
from escortbounds.escort import (canonical_from_theta, deformed_pair, deformed_uniform_max, f_escort,
                                 linear_deformed, log_deformed, synth_location, synth_scale,
                                 verify_equality_condition)
from escortbounds.model import EscortPair, Statistic, normalization_check


class TestSynthLocation:
    def test_exponential_recovers_gamma_two(self):
        s = synth_location(lambda x: np.exp(-x), lambda x: x - 1.0, 0.0)
        x = np.linspace(0.01, 20, 2000)
        assert np.max(np.abs(s.g(x) - x * np.exp(-x))) < 1e-6
        np.testing.assert_allclose(s.normalizer, 1.0, rtol=1e-8)

    def test_expmin_escort(self):
        n = 3
        s = synth_location(lambda x: n * np.exp(-n * x), lambda x: x - 1.0 / n, 0.0)
        x = np.linspace(0.005, 10, 1500)
        assert np.max(np.abs(s.g(x) - n * n * x * np.exp(-n * x))) < 1e-6

    def test_constant_estimator(self):
        with pytest.raises(SynthesisError):
            synth_location(lambda x: np.exp(-x), lambda x: np.zeros_like(x), 0.0)

    def test_family_rule_and_model(self):
        s = synth_location(lambda x: np.exp(-x), lambda x: x - 1.0, 0.0)
        m = s.to_model()
        assert normalization_check(m, 0.7) < 1e-8
        np.testing.assert_allclose(s.pdf(np.array([2.5]), 1.0), s.g(np.array([1.5])))

    def test_synthesized_escort_attains(self):
        e = catalog.catalog_lookup("expmin", {"n": 1})
        s = synth_location(lambda x: np.exp(-x), lambda x: x - 1.0, 0.0)
        pair = EscortPair(e.f, s.to_model(param_domain=e.f.param_domain), True)
        rep = naudts_bound(pair, e.statistic, 1.0)
        assert rep.attained
        assert rep.diagnostics["equality_correlation"] > 1 - 1e-6

    def test_csv_export(self):
        s = synth_location(lambda x: np.exp(-x), lambda x: x - 1.0, 0.0, n_grid=65)
        buf = io.StringIO()
        text = s.to_csv(buf)
        lines = text.splitlines()
        assert lines[0] == "x,kernel,g" and len(lines) == 66
        assert buf.getvalue() == text


class TestSynthScale:
    def test_gamma_three_recovers_gamma_two(self):
        s = synth_scale(lambda x: stats.gamma.pdf(x, 3), lambda x: 2.0 / x, 1.0)
        x = np.linspace(0.05, 20, 2000)
        assert np.max(np.abs(s.g(x) - x * np.exp(-x))) < 1e-6

    def test_normal_x4_escort(self):
        s = synth_scale(stats.norm.pdf, lambda x: x ** 4 / 3.0, 1.0, support=(-np.inf, np.inf))
        x = np.linspace(-6, 6, 1201)
        expected = stats.norm.pdf(x) * (0.75 + 0.25 * x * x)
        assert np.max(np.abs(s.g(x) - expected)) < 1e-6

    def test_matches_catalog_gamma_escort_at_other_scale(self):
        e = catalog.catalog_lookup("gamma-scale")
        s = synth_scale(lambda x: stats.gamma.pdf(x, 3), lambda x: 2.0 / x, 1.0)
        x = np.linspace(0.1, 30, 500)
        np.testing.assert_allclose(s.pdf(x, 1.5), e.g.density(x, 1.5), atol=1e-6)

    def test_constant_estimator(self):
        with pytest.raises(SynthesisError):
            synth_scale(lambda x: stats.gamma.pdf(x, 3), lambda x: np.ones_like(x), 1.0)


class TestDeformed:
    @pytest.mark.parametrize("theta", [0.5, 1.0, 2.0])
    def test_uniform_joint_max_f_escort(self, theta):
        n = 4
        d = deformed_uniform_max(n)
        vt = canonical_from_theta(n, theta)
        t = np.linspace(0.0, theta, 401)[1:-1]
        fe = f_escort(d, vt)(t)
        assert np.max(np.abs(fe - n * t ** (n - 1) / theta ** n)) < 1e-6

    def test_deformed_g_matches_catalog(self):
        n = 4
        d = deformed_uniform_max(n)
        e = catalog.catalog_lookup("uniform-joint-max", {"n": n})
        t = np.linspace(0.05, 0.95, 19)
        np.testing.assert_allclose(d.g_pdf(t, canonical_from_theta(n, 1.0)), e.g.density(t, 1.0), atol=1e-10)

    def test_deformed_pair_attains(self):
        d = deformed_uniform_max(3)
        T = Statistic("t", lambda t: t)
        rep = naudts_bound(deformed_pair(d), T, canonical_from_theta(3, 1.0))
        assert rep.attained
        np.testing.assert_allclose(rep.diagnostics["equality_correlation"], 1.0, atol=1e-6)

    def test_logarithm_gives_self_escort(self):
        d = log_deformed(lambda t: t, (0.0, np.inf))
        t = np.linspace(0.01, 5, 50)
        np.testing.assert_allclose(f_escort(d, -2.0)(t), d.g_pdf(t, -2.0), rtol=1e-8)
        np.testing.assert_allclose(d.g_pdf(t, -2.0), 2 * np.exp(-2 * t), rtol=1e-8)

    def test_linear_on_bounded_interval(self):
        d = linear_deformed(lambda t: t, (0.0, 2.0))
        fe = f_escort(d, -0.5)
        from escortbounds.numerics import integrate_interval

        assert abs(integrate_interval(fe, 0.0, 2.0, breakpoints=d.kinks(-0.5, d.phi(-0.5))).value - 1.0) < 1e-8

    def test_rejects_convex_logarithm(self):
        from escortbounds.escort import DeformedFamily

        with pytest.raises(ValueError):
            DeformedFamily(F=lambda u: u * u, Fprime=lambda u: 2 * u, Z=np.sqrt, Zprime=lambda u: 0.5 / np.sqrt(u),
                           T=lambda t: t)

    def test_phi_normalizes(self):
        d = deformed_uniform_max(2)
        vt = canonical_from_theta(2, 1.3)
        assert abs(d.mass(vt, d.phi(vt)) - 1.0) < 1e-10


class TestEqualityCondition:
    def test_uniform_max(self):
        e = catalog.catalog_lookup("uniform-max", {"n": 5})
        assert abs(verify_equality_condition(e.escort, e.statistic, 2.0) - 1.0) < 1e-6

    def test_normal_x4(self):
        e = catalog.catalog_lookup("normal-x4")
        assert abs(verify_equality_condition(e.escort, e.statistic, 1.0) - 1.0) < 1e-6

    def test_hcr_best_node_below_one(self):
        e = catalog.catalog_lookup("uniform-max", {"n": 1})
        corr = verify_equality_condition(EscortPair.self_pair(e.f), e.statistic, 1.0, nodes=[1.0, 0.5])
        assert corr < 1 - 1e-3

    def test_gamma_incomplete_gamma_escort(self):
        # at k=1, (P(3,x) - P(4,x)) / (x (psi(4) - psi(3))) = x^2 e^-x / 2, the Gamma(3) density
        e = catalog.catalog_lookup("gamma-scale", {"alpha": 3.0, "k": 1})
        x = np.linspace(0.1, 10, 25)
        ref = (special.gammainc(3, x) - special.gammainc(4, x)) / (x / 3.0)
        np.testing.assert_allclose(e.g.density(x, 1.0), ref, rtol=1e-10)
        np.testing.assert_allclose(ref, stats.gamma.pdf(x, 3.0), rtol=1e-10)

    def test_zero_variance_statistic(self):
        e = catalog.catalog_lookup("normal-x4")
        T = Statistic("const", lambda x: np.full(np.shape(x), 2.0), lambda t: 2.0, None,
                      lambda t, a: 0.0)
        with pytest.raises(RegularityError):
            verify_equality_condition(EscortPair.self_pair(e.f), T, 1.0)
