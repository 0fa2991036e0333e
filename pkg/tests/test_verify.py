"""Monte Carlo cross-checks, attainment suites and reduction checks."""

import numpy as np
import pytest

from escortbounds import catalog, verify
from escortbounds.verify import McSettings, attainment_suite, mc_expectation


class TestMonteCarlo:
    def test_uniform_max_unbiased(self):
        e = catalog.catalog_lookup("uniform-max", {"n": 5})
        res = mc_expectation(e.f, e.statistic, 2.0)
        assert res.sample_count == 1_000_000
        assert res.agrees_with(2.0)

    def test_normal_x4_second_moment(self):
        e = catalog.catalog_lookup("normal-x4")
        res = mc_expectation(e.f, lambda x: e.statistic(x) ** 2, 1.0)
        assert res.agrees_with(35.0 / 3.0)

    def test_expmin_unbiased(self):
        e = catalog.catalog_lookup("expmin", {"n": 3})
        assert mc_expectation(e.f, e.statistic, 0.5).agrees_with(0.5)

    def test_bit_identical_reruns(self):
        e = catalog.catalog_lookup("normal-x4")
        s = McSettings(300_000, seed=7)
        a = mc_expectation(e.g, e.statistic, 1.3, s)
        b = mc_expectation(e.g, e.statistic, 1.3, s)
        assert a == b

    def test_seed_changes_stream(self):
        e = catalog.catalog_lookup("expmin")
        a = mc_expectation(e.f, e.statistic, 1.0, McSettings(10_000, seed=1))
        b = mc_expectation(e.f, e.statistic, 1.0, McSettings(10_000, seed=2))
        assert a.mean != b.mean

    def test_inverse_cdf_sampling(self):
        e = catalog.catalog_lookup("normal-x4")
        res = mc_expectation(e.g, e.statistic, 1.0, McSettings(200_000, method="inverse-cdf"))
        assert res.method == "inverse-cdf"
        assert res.agrees_with(2.0)

    def test_stderr_scale(self):
        e = catalog.catalog_lookup("uniform-max", {"n": 5})
        res = mc_expectation(e.f, e.statistic, 2.0, McSettings(100_000))
        np.testing.assert_allclose(res.stderr, np.sqrt(4.0 / 35.0 / 100_000), rtol=0.02)

    @pytest.mark.parametrize("kw", [{"sample_count": 10}, {"seed": -1}, {"method": "sobol"}])
    def test_invalid_settings(self, kw):
        with pytest.raises(ValueError):
            McSettings(**kw)

    def test_catalog_checks_record_metadata(self):
        rows = verify.catalog_mc_checks("expmin", 1.0, McSettings(50_000))
        assert [r["quantity"] for r in rows] == ["E_f[T]", "E_f[T^2]", "E_g[T]"]
        assert all(r["mc"]["generator"] == "PCG64" and r["mc"]["seed"] == 20240101 for r in rows)


class TestAttainmentSuites:
    def test_uniform_max_wide_grid(self):
        e = catalog.catalog_lookup("uniform-max", {"n": 5})
        suite = attainment_suite(e, [0.5, 1.0, 2.0, 5.0, 10.0], [verify.Claim("naudts", True)])
        assert suite.passed and len(suite.rows) == 5

    def test_gamma_scale(self):
        suite = attainment_suite(catalog.catalog_lookup("gamma-scale"), [0.5, 1.0, 2.0])
        assert suite.passed
        assert sum(not r["expected"] for r in suite.rows) == 9

    def test_poisson_pair(self):
        suite = attainment_suite(catalog.catalog_lookup("poisson-pair"), [1.0])
        assert suite.passed

    def test_wrong_claim_is_reported(self):
        e = catalog.catalog_lookup("normal-x4")
        suite = attainment_suite(e, [1.0], [verify.Claim("cr", True, self_pair=True)])
        assert not suite.passed
        assert suite.to_dict()["rows"][0]["attained"] is False

    def test_failure_is_captured(self):
        e = catalog.catalog_lookup("uniform-max")
        suite = attainment_suite(e, [1.0], [verify.Claim("cr", False, self_pair=True)])
        assert not suite.passed and "error" in suite.rows[0]


def test_reduction_suite():
    res = verify.reduction_suite()
    failed = [c for c in res["checks"] if not c["passed"]]
    assert res["passed"], failed
    names = [c["name"] for c in res["checks"]]
    assert any(n.startswith("nesting") for n in names)


def test_hcr_quotient_closed_form():
    e = catalog.catalog_lookup("uniform-max", {"n": 1})
    np.testing.assert_allclose(verify.hcr_quotient(e.f, e.statistic, 1.0, 0.4), 0.4 * 0.6, rtol=1e-10)


def test_run_method_rejects_unknown():
    with pytest.raises(ValueError):
        verify.run_method(catalog.catalog_lookup("expmin"), "schur", 1.0)
