"""The seven worked example families with their closed forms.

Every multi-observation example is reduced to the one-dimensional law of
its sufficient statistic (max, min, or sum), so all integrals are 1-D.
"""

from __future__ import annotations

from math import factorial, lgamma

import numpy as np
from scipy import special, stats

from . import numerics
from .errors import CatalogError
from .model import (
    CatalogEntry,
    ClosedForm,
    EscortPair,
    ModelSpec,
    Statistic,
    Support,
    falling,
    poisson_tail,
    power_law,
    tabulated_sampler,
)

CATALOG_VERSION = "1"

# name -> (hyperparameter signature, defaults)
SIGNATURES = {
    "uniform-max": ("n:int>=1", {"n": 5}),
    "expmin": ("n:int>=1", {"n": 3}),
    "uniform-max-power": ("n:int>=1, k:int>=1", {"n": 3, "k": 2}),
    "gamma-scale": ("alpha:real>0, k:int!=0 with 2k+alpha>0", {"alpha": 3.0, "k": -1}),
    "normal-x4": ("(none)", {}),
    "poisson-pair": ("n:int>=1", {"n": 2}),
    "uniform-joint-max": ("n:int>=1", {"n": 4}),
}

CONTAINMENT_NOTE = "U_f subset of U_g assumed via completeness of T (not checked numerically)"


def catalog_names():
    return list(SIGNATURES)


def _int(hyper, key):
    v = hyper[key]
    if float(v) != int(float(v)):
        raise CatalogError(f"hyperparameter {key}={v!r} must be an integer")
    return int(float(v))


def _power_models(n, k, tag):
    """f = density of max of n U[0, theta]; g = its power escort of order k."""
    c = n * (n + k) / k

    def f_pdf(x, t):
        return n * x ** (n - 1) / t ** n

    def f_dpdf(x, t, m):
        return n * x ** (n - 1) * falling(-n, m) * t ** (-n - m)

    def g_pdf(x, t):
        return c * (x ** (n - 1) * t ** -n - x ** (n + k - 1) * t ** (-n - k))

    def g_dpdf(x, t, m):
        return c * (x ** (n - 1) * falling(-n, m) * t ** (-n - m)
                    - x ** (n + k - 1) * falling(-n - k, m) * t ** (-n - k - m))

    def g_cdf(u):  # in units of x / theta
        return c * (u ** n / n - u ** (n + k) / (n + k))

    support = Support(lower=0.0, upper=lambda t: t, scale=lambda t: t)
    f = ModelSpec(f"{tag}.f", f_pdf, support, dpdf=f_dpdf, dpdf_max_order=8,
                  sampler=lambda rng, t, size: t * rng.random(size) ** (1.0 / n))
    g = ModelSpec(f"{tag}.g", g_pdf, support, dpdf=g_dpdf, dpdf_max_order=8,
                  sampler=lambda rng, t, size: t * _bisect01(g_cdf, rng.random(size)))
    return f, g


def _bisect01(cdf, u):
    from .model import bisect_inverse

    return bisect_inverse(cdf, u, 0.0, 1.0, iters=60)


def uniform_max(n=5) -> CatalogEntry:
    f, g = _power_models(n, 1, "uniform-max")
    lam, dlam = power_law((n + 1) / (n + 2), 1)
    tgt, dtgt = power_law(1.0, 1)
    T = Statistic("(n+1)X/n", lambda x: (n + 1) * x / n, tgt, lam, dtgt, dlam)
    forms = {
        "variance": ClosedForm("theta^2/(n(n+2))", lambda t: t * t / (n * (n + 2))),
        "lambda": ClosedForm("(n+1) theta/(n+2)", lam),
        "N": ClosedForm("n(n+1)^2/((n+2) theta^2)", lambda t: n * (n + 1) ** 2 / ((n + 2) * t * t)),
        "bound": ClosedForm("theta^2/(n(n+2))", lambda t: t * t / (n * (n + 2))),
    }
    notes = "max of n iid U[0,theta]; density n x^(n-1)/theta^n on [0,theta]. " + CONTAINMENT_NOTE
    return CatalogEntry("uniform-max", {"n": n}, EscortPair(f, g, True), T, forms, notes, (0.5, 1.0, 2.0))


def expmin(n=3) -> CatalogEntry:
    def f_pdf(x, t):
        return n * np.exp(-n * (x - t))

    def f_dpdf(x, t, m):
        return f_pdf(x, t) * n ** m

    def g_pdf(x, t):
        u = x - t
        return n * n * u * np.exp(-n * u)

    def g_dpdf(x, t, m):
        u = x - t
        return n * n * np.exp(-n * u) * (n ** m * u - m * n ** (m - 1))

    support = Support(lower=lambda t: t, upper=np.inf, scale=1.0 / n)
    f = ModelSpec("expmin.f", f_pdf, support, dpdf=f_dpdf, dpdf_max_order=8,
                  sampler=lambda rng, t, size: t - np.log1p(-rng.random(size)) / n)
    g = ModelSpec("expmin.g", g_pdf, support, dpdf=g_dpdf, dpdf_max_order=8,
                  sampler=lambda rng, t, size: t + special.gammaincinv(2.0, rng.random(size)) / n)
    lam, dlam = (lambda t: t + 1.0 / n), (lambda t, a: 1.0 if (a if np.isscalar(a) else a[0]) == 1 else 0.0)
    tgt, dtgt = power_law(1.0, 1)
    T = Statistic("X-1/n", lambda x: x - 1.0 / n, tgt, lam, dtgt, dlam)
    forms = {
        "variance": ClosedForm("1/n^2", lambda t: 1.0 / n ** 2),
        "lambda": ClosedForm("theta + 1/n", lam),
        "N": ClosedForm("n^2", lambda t: float(n * n), "derived: bound = 1/n^2 with lambda' = 1"),
        "bound": ClosedForm("1/n^2", lambda t: 1.0 / n ** 2),
    }
    notes = "min of n iid shifted unit exponentials. " + CONTAINMENT_NOTE
    return CatalogEntry("expmin", {"n": n}, EscortPair(f, g, True), T, forms, notes, (0.5, 1.0, 2.0))


def uniform_max_power(n=3, k=2) -> CatalogEntry:
    f, g = _power_models(n, k, "uniform-max-power")
    tgt, dtgt = power_law(1.0, k)
    T = Statistic("(n+k)X^k/n", lambda x: (n + k) * x ** k / n, tgt, None, dtgt, None)
    var = lambda t: k * k * t ** (2 * k) / (n * (n + 2 * k))
    forms = {
        "variance": ClosedForm("k^2 theta^(2k)/(n(n+2k))", var,
                               "moment identity E X^m = n theta^m/(n+m)"),
        "N": ClosedForm("n(n+k)^2/((n+2k) theta^2)", lambda t: n * (n + k) ** 2 / ((n + 2 * k) * t * t),
                        "derived from attainment"),
        "bound": ClosedForm("k^2 theta^(2k)/(n(n+2k))", var, "equals the variance (attained)"),
    }
    notes = "unbiased estimator of theta^k from the max of n uniforms. " + CONTAINMENT_NOTE
    return CatalogEntry("uniform-max-power", {"n": n, "k": k}, EscortPair(f, g, True), T, forms, notes,
                        (0.5, 1.0, 2.0))


def _gamma_logderivs(x, t, alpha, order):
    out = []
    for m in range(1, order + 1):
        out.append(-x * (-1) ** m * factorial(m) * t ** (-m - 1)
                   - alpha * (-1) ** (m - 1) * factorial(m - 1) * t ** (-m))
    return out


def gamma_scale(alpha=3.0, k=-1) -> CatalogEntry:
    alpha = float(alpha)
    a2 = alpha + k
    # normalizer of the escort kernel (P(alpha, u) - P(alpha+k, u))/u
    denom = special.digamma(a2) - special.digamma(alpha)

    def f_pdf(x, t):
        return stats.gamma.pdf(x, alpha, scale=t)

    def f_dpdf(x, t, m):
        return f_pdf(x, t) * numerics.bell_ratios(_gamma_logderivs(x, t, alpha, m))[m]

    def g_pdf(x, t):
        u = x / t
        lower_diff = special.gammainc(alpha, u) - special.gammainc(a2, u)
        upper_diff = special.gammaincc(a2, u) - special.gammaincc(alpha, u)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = np.where(u < alpha, lower_diff, upper_diff) / (x * denom)
        return np.where(x > 0, val, 0.0)

    def g_dpdf(x, t, m):
        u = x / t
        return -(stats.gamma.pdf(u, alpha) - stats.gamma.pdf(u, a2)) / (t * t * denom)

    support = Support(lower=0.0, upper=np.inf, scale=lambda t: t)
    f = ModelSpec("gamma-scale.f", f_pdf, support, dpdf=f_dpdf, dpdf_max_order=8,
                  sampler=lambda rng, t, size: t * special.gammaincinv(alpha, rng.random(size)))
    g = ModelSpec("gamma-scale.g", g_pdf, support, dpdf=g_dpdf, dpdf_max_order=1)
    g = _with_sampler(g, tabulated_sampler(g))
    coef = np.exp(lgamma(alpha) - lgamma(alpha + k))
    tgt, dtgt = power_law(1.0, k)
    T = Statistic("Gamma(a)/Gamma(a+k) X^k", lambda x: coef * x ** k, tgt, None, dtgt, None)
    vcoef = np.exp(lgamma(alpha) + lgamma(2 * k + alpha) - 2 * lgamma(alpha + k)) - 1.0
    forms = {
        "variance": ClosedForm("[Gamma(a)Gamma(2k+a)/Gamma(a+k)^2 - 1] theta^(2k)",
                               lambda t: vcoef * t ** (2 * k)),
    }
    notes = ("Gamma(alpha, scale theta); escort g(x,theta) = [P(a,x/t) - P(a+k,x/t)] / "
             "(x [psi(a+k) - psi(a)]), which reduces to Gamma(alpha-1, theta) at k=-1 and to the "
             "finite mixture for k>0. " + CONTAINMENT_NOTE)
    return CatalogEntry("gamma-scale", {"alpha": alpha, "k": k}, EscortPair(f, g, True), T, forms, notes,
                        (0.5, 1.0, 2.0))


def _with_sampler(model, sampler):
    from dataclasses import replace

    return replace(model, sampler=sampler)


def _normal_logderivs(x, t, order):
    out = []
    for m in range(1, order + 1):
        out.append(-0.5 * x * x * (-1) ** m * factorial(m + 1) * t ** (-m - 2)
                   - (-1) ** (m - 1) * factorial(m - 1) * t ** (-m))
    return out


def normal_x4() -> CatalogEntry:
    def f_pdf(x, t):
        return stats.norm.pdf(x, 0.0, t)

    def f_derivs(x, t, order):
        return [f_pdf(x, t) * r for r in numerics.bell_ratios(_normal_logderivs(x, t, order))]

    def f_dpdf(x, t, m):
        return f_derivs(x, t, m)[m]

    def q_derivs(x, t, order):
        out = [0.75 + 0.25 * x * x / (t * t)]
        for m in range(1, order + 1):
            out.append(0.25 * x * x * falling(-2, m) * t ** (-2 - m))
        return out

    def g_pdf(x, t):
        return f_pdf(x, t) * (0.75 + 0.25 * x * x / (t * t))

    def g_dpdf(x, t, m):
        return numerics.leibniz(f_derivs(x, t, m), q_derivs(x, t, m), m)

    def g_sampler(rng, t, size):
        normal = rng.standard_normal(size)
        chi3 = np.sqrt(rng.chisquare(3, size)) * np.where(rng.random(size) < 0.5, -1.0, 1.0)
        return t * np.where(rng.random(size) < 0.75, normal, chi3)

    support = Support(lower=-np.inf, upper=np.inf, breakpoints=lambda t: (0.0,), scale=lambda t: t)
    f = ModelSpec("normal-x4.f", f_pdf, support, dpdf=f_dpdf, dpdf_max_order=8,
                  sampler=lambda rng, t, size: t * rng.standard_normal(size))
    g = ModelSpec("normal-x4.g", g_pdf, support, dpdf=g_dpdf, dpdf_max_order=8, sampler=g_sampler)
    lam, dlam = power_law(2.0, 4)
    tgt, dtgt = power_law(1.0, 4)
    T = Statistic("X^4/3", lambda x: x ** 4 / 3.0, tgt, lam, dtgt, dlam)
    forms = {
        "variance": ClosedForm("32 theta^8/3", lambda t: 32 * t ** 8 / 3),
        "lambda": ClosedForm("2 theta^4", lam),
        "N": ClosedForm("6/theta^2", lambda t: 6.0 / (t * t)),
        "bound": ClosedForm("32 theta^8/3", lambda t: 32 * t ** 8 / 3),
    }
    notes = "N(0, theta^2) with T = X^4/3. " + CONTAINMENT_NOTE
    return CatalogEntry("normal-x4", {}, EscortPair(f, g, True), T, forms, notes, (0.5, 1.0, 2.0))


def poisson_pair(n=2) -> CatalogEntry:
    def f_pdf(s, t):
        return stats.poisson.pmf(np.round(s), n * t)

    def logderivs(s, t, order):
        out = [s / t - n]
        for m in range(2, order + 1):
            out.append(s * (-1) ** (m - 1) * factorial(m - 1) / t ** m)
        return out

    def f_derivs(s, t, order):
        return [f_pdf(s, t) * r for r in numerics.bell_ratios(logderivs(s, t, order))]

    def r_derivs(s, t, order):
        return [0.5 + s / (2 * n * t)] + [s / (2 * n) * falling(-1, m) * t ** (-1 - m)
                                         for m in range(1, order + 1)]

    def g_pdf(s, t):
        return f_pdf(s, t) * (0.5 + s / (2 * n * t))

    def g_dpdf(s, t, m):
        return numerics.leibniz(f_derivs(s, t, m), r_derivs(s, t, m), m)

    def g_sampler(rng, t, size):
        # mixture of Poisson(n t) and its size-biased version 1 + Poisson(n t)
        return (rng.poisson(n * t, size) + (rng.random(size) < 0.5)).astype(float)

    # the escort's size-biased half shifts the tail by one lattice step
    tail = poisson_tail(lambda t: n * t)
    support = Support(kind="discrete", lower=0.0, upper=np.inf, tail=lambda t: tail(t) + 1)
    f = ModelSpec("poisson-pair.f", f_pdf, support, dpdf=lambda s, t, m: f_derivs(s, t, m)[m],
                  dpdf_max_order=8, sampler=lambda rng, t, size: rng.poisson(n * t, size).astype(float))
    g = ModelSpec("poisson-pair.g", g_pdf, support, dpdf=g_dpdf, dpdf_max_order=8, sampler=g_sampler)
    tgt, dtgt = power_law(1.0, 2)
    T = Statistic("Xbar(Xbar-1/n)", lambda s: s * (s - 1) / n ** 2, tgt, None, dtgt, None)
    forms = {
        "variance": ClosedForm("4 theta^3/n + 2 theta^2/n^2", lambda t: 4 * t ** 3 / n + 2 * t * t / n ** 2,
                               "derived: factorial moments of Poisson(n theta)"),
    }
    notes = ("n iid Poisson(theta) reduced to S = sum X_i ~ Poisson(n theta); escort "
             "g = f (1/2 + S/(2 n theta)). " + CONTAINMENT_NOTE)
    return CatalogEntry("poisson-pair", {"n": n}, EscortPair(f, g, True), T, forms, notes, (0.5, 1.0, 2.0))


def uniform_joint_max(n=4) -> CatalogEntry:
    f, g = _power_models(n, 1, "uniform-joint-max")
    tgt, dtgt = power_law(n / (n + 1), 1)
    T = Statistic("max X_i", lambda t: t, tgt, None, dtgt, None)
    forms = {
        "target": ClosedForm("n theta/(n+1)", tgt),
        "variance": ClosedForm("n theta^2/((n+2)(n+1)^2)", lambda t: n * t * t / ((n + 2) * (n + 1) ** 2),
                               "derived: order-statistic moments"),
    }
    notes = ("n iid U[0,theta] reduced to t = max; g = (n+1)/theta^n (1 - t/theta) on the cube, "
             "a deformed exponential family with Z(u) = [1+u]_+ whose F-escort is f. " + CONTAINMENT_NOTE)
    return CatalogEntry("uniform-joint-max", {"n": n}, EscortPair(f, g, True), T, forms, notes,
                        (0.5, 1.0, 2.0))


def catalog_lookup(name: str, hyper: dict | None = None) -> CatalogEntry:
    """Build a fully wired catalog entry.

    Raises
    ------
    CatalogError
        Unknown name, unknown hyperparameter key, or invalid values.
    """
    if name not in SIGNATURES:
        raise CatalogError(f"unknown catalog entry {name!r}; choose from {', '.join(SIGNATURES)}")
    _, defaults = SIGNATURES[name]
    hyper = dict(hyper or {})
    unknown = set(hyper) - set(defaults)
    if unknown:
        raise CatalogError(f"{name}: unknown hyperparameter(s) {sorted(unknown)}")
    h = {**defaults, **hyper}
    if "n" in h:
        h["n"] = _int(h, "n")
        if h["n"] < 1:
            raise CatalogError(f"{name}: n must be >= 1")
    if name == "uniform-max":
        return uniform_max(h["n"])
    if name == "expmin":
        return expmin(h["n"])
    if name == "uniform-max-power":
        k = _int(h, "k")
        if k < 1:
            raise CatalogError("uniform-max-power: k must be >= 1")
        return uniform_max_power(h["n"], k)
    if name == "gamma-scale":
        alpha = float(h["alpha"])
        k = _int(h, "k")
        if not alpha > 0 or k == 0 or not 2 * k + alpha > 0:
            raise CatalogError("gamma-scale: need alpha > 0, k != 0 and 2k + alpha > 0")
        return gamma_scale(alpha, k)
    if name == "normal-x4":
        return normal_x4()
    if name == "poisson-pair":
        return poisson_pair(h["n"])
    return uniform_joint_max(h["n"])


def parse_hyper(pairs) -> dict:
    """Parse ``key=value`` strings into numbers."""
    out = {}
    for item in pairs or ():
        if "=" not in item:
            raise CatalogError(f"hyperparameter {item!r} is not of the form key=value")
        key, value = item.split("=", 1)
        try:
            num = float(value)
        except ValueError as exc:
            raise CatalogError(f"hyperparameter {key} has non-numeric value {value!r}") from exc
        out[key.strip()] = int(num) if num.is_integer() and "." not in value else num
    return out
