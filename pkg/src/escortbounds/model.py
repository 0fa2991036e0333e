"""Density families, statistics, supports and escort pairs."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial
from typing import Any, Callable, Mapping

import numpy as np
from scipy import stats

from . import numerics
from .errors import DomainError
from .numerics import QuadratureSettings

TAIL_MASS = 1e-14


def _as_callable(v):
    if callable(v):
        return v
    c = float(v)
    return lambda theta: c


@dataclass(frozen=True)
class Support:
    """Support of a density, possibly depending on the parameter.

    ``lower``/``upper`` are constants or callables of theta.  Continuous
    supports may declare ``breakpoints`` (kinks of the integrands) and a
    length ``scale`` used by the infinite-interval transform.  Discrete
    supports live on ``origin + step * j`` for ``j = 0..N`` where ``N``
    comes from ``tail`` (the first index past which the pmf tail mass is
    below 1e-14).
    """

    kind: str = "continuous"
    lower: Any = 0.0
    upper: Any = np.inf
    breakpoints: Callable | None = None
    scale: Any = 1.0
    origin: float = 0.0
    step: float = 1.0
    tail: Callable | None = None

    def __post_init__(self):
        if self.kind not in ("continuous", "discrete"):
            raise ValueError(f"unknown support kind {self.kind!r}")

    def bounds(self, theta):
        lo = _as_callable(self.lower)(theta)
        hi = _as_callable(self.upper)(theta)
        if not lo < hi:
            raise DomainError(f"empty support [{lo}, {hi}] at theta={theta}")
        return float(lo), float(hi)

    def breakpoints_at(self, theta):
        return tuple(self.breakpoints(theta)) if self.breakpoints else ()

    def scale_at(self, theta):
        return float(_as_callable(self.scale)(theta))

    def lattice(self, theta, truncation=None):
        if self.kind != "discrete":
            raise TypeError("lattice() is only defined for discrete supports")
        if truncation is None:
            if self.tail is None:
                raise ValueError("discrete support without a tail rule needs an explicit truncation")
            truncation = int(self.tail(theta))
        j = np.arange(int(truncation) + 1)
        return self.origin + self.step * j, int(truncation)

    def contains(self, x, theta):
        x = np.asarray(x, dtype=float)
        lo, hi = self.bounds(theta)
        inside = (x >= lo) & (x <= hi)
        if self.kind == "discrete":
            j = (x - self.origin) / self.step
            inside &= np.isclose(j, np.round(j))
        return inside


@dataclass(frozen=True)
class ProductSupport:
    """Cartesian product of continuous 1-D supports (independent coordinates)."""

    parts: tuple
    kind: str = "product"

    def contains(self, x, theta):
        x = np.atleast_2d(x)
        out = np.ones(x.shape[1], bool)
        for row, part in zip(x, self.parts):
            out &= part.contains(row, theta)
        return out


def poisson_tail(mean_of_theta: Callable) -> Callable:
    """Tail rule for Poisson-type lattices: first N with P(X >= N) < 1e-14."""

    def rule(theta):
        mu = mean_of_theta(theta)
        n = int(stats.poisson.isf(TAIL_MASS, mu)) + 1
        while stats.poisson.sf(n - 1, mu) >= TAIL_MASS:
            n += 1
        return n

    return rule


@dataclass(frozen=True)
class ModelSpec:
    """A parametrized density family.

    ``pdf(x, theta)`` and ``dpdf(x, theta, alpha)`` receive theta as a float
    when ``param_dim == 1`` and as a 1-D array otherwise; ``alpha`` is an
    int (scalar parameter) or a multi-index tuple.  ``sampler(rng, theta,
    size)`` draws from the family when wired.
    """

    name: str
    pdf: Callable
    support: Support | ProductSupport
    param_dim: int = 1
    param_domain: tuple = ((0.0, np.inf),)
    dpdf: Callable | None = None
    dpdf_max_order: int = 0
    sampler: Callable | None = None

    def __post_init__(self):
        if len(self.param_domain) != self.param_dim:
            raise ValueError("param_domain must have one interval per parameter")

    @property
    def is_discrete(self):
        return self.support.kind == "discrete"

    def check_theta(self, theta):
        """Validate theta against the open domain; returns the native form."""
        arr = np.atleast_1d(np.asarray(theta, dtype=float))
        if arr.shape != (self.param_dim,):
            raise DomainError(f"{self.name}: expected {self.param_dim} parameter(s), got {arr.shape}")
        for v, (lo, hi) in zip(arr, self.param_domain):
            if not lo < v < hi:
                raise DomainError(f"{self.name}: parameter {v} not in the open domain ({lo}, {hi})")
        return float(arr[0]) if self.param_dim == 1 else arr

    def density(self, x, theta):
        """pdf with zeros outside the support."""
        x = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            y = np.asarray(self.pdf(x, theta), dtype=float)
        return np.where(self.support.contains(x, theta), y, 0.0)

    def _alpha(self, alpha):
        a = (int(alpha),) if np.isscalar(alpha) else tuple(int(v) for v in alpha)
        if len(a) != self.param_dim or min(a) < 0:
            raise ValueError(f"bad multi-index {alpha} for a {self.param_dim}-parameter family")
        return a

    def partial(self, x, theta, alpha):
        """Partial derivative of the density in theta (pointwise in x).

        The analytic derivative is used when the family provides one of
        sufficient order; otherwise central differences (total order <= 2).
        """
        a = self._alpha(alpha)
        order = sum(a)
        x = np.asarray(x, dtype=float)
        if order == 0:
            return self.density(x, theta)
        inside = self.support.contains(x, theta)
        if self.dpdf is not None and order <= self.dpdf_max_order:
            arg = a[0] if self.param_dim == 1 else a
            with np.errstate(all="ignore"):
                y = np.asarray(self.dpdf(x, theta, arg), dtype=float)
            return np.where(inside, y, 0.0)
        if order > 2:
            raise NotImplementedError(
                f"{self.name}: analytic derivative of order {order} not available")
        return np.where(inside, self._numeric_partial(x, theta, a), 0.0)

    def analytic_order(self):
        return self.dpdf_max_order if self.dpdf is not None else 0

    def _numeric_partial(self, x, theta, a):
        th = np.atleast_1d(np.asarray(theta, dtype=float))
        dirs = [i for i, m in enumerate(a) for _ in range(m)]

        def at(delta):
            p = th + delta
            return self.pdf(x, float(p[0]) if self.param_dim == 1 else p)

        def shifted(i, h):
            d = np.zeros_like(th)
            d[i] = h
            return d

        if len(dirs) == 1 or dirs[0] == dirs[1]:
            i = dirs[0]
            order = len(dirs)
            h = numerics.default_step(th[i], order)

            def fd(step):
                if order == 1:
                    return (at(shifted(i, step)) - at(shifted(i, -step))) / (2 * step)
                return (at(shifted(i, step)) - 2 * at(shifted(i, 0.0)) + at(shifted(i, -step))) / step ** 2

            with np.errstate(all="ignore"):
                return (4 * fd(h) - fd(2 * h)) / 3
        i, j = dirs
        hi_, hj = numerics.default_step(th[i], 2), numerics.default_step(th[j], 2)
        with np.errstate(all="ignore"):
            return (at(shifted(i, hi_) + shifted(j, hj)) - at(shifted(i, hi_) - shifted(j, hj))
                    - at(-shifted(i, hi_) + shifted(j, hj)) + at(-shifted(i, hi_) - shifted(j, hj))) / (4 * hi_ * hj)


@dataclass(frozen=True)
class Statistic:
    """An estimator T(x) with optional closed forms.

    ``target`` is phi(theta) = E_f[T]; ``lambda_under_g`` is E_g[T].  The
    ``*_derivative(theta, alpha)`` callables give analytic parameter
    derivatives of those closed forms when known.
    """

    name: str
    fn: Callable
    target: Callable | None = None
    lambda_under_g: Callable | None = None
    target_derivative: Callable | None = None
    lambda_derivative: Callable | None = None

    def __call__(self, x):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.asarray(self.fn(np.asarray(x, dtype=float)), dtype=float)


@dataclass(frozen=True)
class EscortPair:
    """A model f and an escort g on the same parameter domain."""

    f: ModelSpec
    g: ModelSpec
    containment_checked: bool = False

    def __post_init__(self):
        if self.f.param_dim != self.g.param_dim:
            raise ValueError("f and g must share the parameter dimension")
        if tuple(map(tuple, self.f.param_domain)) != tuple(map(tuple, self.g.param_domain)):
            raise ValueError("f and g must share the parameter domain")

    @classmethod
    def self_pair(cls, f: ModelSpec):
        return cls(f, f, True)

    @property
    def is_self(self):
        return self.f is self.g

    def check_containment(self, theta, theta_g=None, n_grid=2001) -> bool:
        """Numeric proxy for P_g << P_f: g(x, theta_g) > 0 implies f(x, theta) > 0.

        Checked on the support bounds and on a grid spanning the range that
        holds all but 1e-13 of the mass of g.  Grid points where g itself is
        below 1e-250 are skipped: f may underflow there.
        """
        theta_g = theta if theta_g is None else theta_g
        if isinstance(self.f.support, ProductSupport):
            return True
        flo, fhi = self.f.support.bounds(theta)
        glo, ghi = self.g.support.bounds(theta_g)
        tol = 1e-12 * max(1.0, abs(flo), abs(fhi) if np.isfinite(fhi) else 1.0)
        if glo < flo - tol or ghi > fhi + tol:
            return False
        if self.g.is_discrete:
            x, _ = self.g.support.lattice(theta_g)
        else:
            lo, hi = glo, ghi
            if not (np.isfinite(lo) and np.isfinite(hi)):
                lo, hi = _effective_range(self.g, theta_g, lo, hi, self.g.support.scale_at(theta_g))
            x = np.linspace(lo, hi, n_grid)[1:-1]
        gx = self.g.density(x, theta_g)
        fx = self.f.density(x, theta)
        return bool(np.all((gx <= 1e-250) | (fx > 0)))


@dataclass(frozen=True)
class ClosedForm:
    """A hand-wired closed form: display string plus evaluator."""

    expr: str
    fn: Callable
    provenance: str = "analytic"

    def __call__(self, theta):
        return self.fn(theta)


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    hyper: Mapping
    escort: EscortPair
    statistic: Statistic
    closed_forms: Mapping[str, ClosedForm] = field(default_factory=dict)
    notes: str = ""
    reference_thetas: tuple = (0.5, 1.0, 2.0)

    @property
    def f(self):
        return self.escort.f

    @property
    def g(self):
        return self.escort.g


# ---------------------------------------------------------------------------
# expectations and checks
# ---------------------------------------------------------------------------


def expectation_detailed(model: ModelSpec, fn: Callable, theta, settings: QuadratureSettings | None = None,
                         truncation=None, breakpoints=()):
    """E_model[fn(X)] with its quadrature record."""
    th = model.check_theta(theta)

    def integrand(x):
        p = model.density(x, th)
        y = np.asarray(fn(x), dtype=float)
        with np.errstate(invalid="ignore"):
            return np.where(p > 0, y * p, 0.0)

    return numerics.integrate_detailed(integrand, model.support, th, settings,
                                       truncation=truncation, breakpoints=breakpoints)


def expectation(model, fn, theta, settings=None, **kw):
    return expectation_detailed(model, fn, theta, settings, **kw).value


def normalization_check(m: ModelSpec, theta, settings: QuadratureSettings | None = None, truncation=None) -> float:
    """|integral of the pdf - 1| over support(theta)."""
    total = expectation(m, lambda x: np.ones(np.shape(x)[-1]), theta, settings, truncation=truncation)
    return abs(total - 1.0)


def unbiasedness_check(entry: CatalogEntry, theta, settings=None, truncation=None) -> float:
    """|E_f[T] - phi(theta)| for a catalog entry with a known target."""
    T = entry.statistic
    if T.target is None:
        raise ValueError(f"{entry.name}: statistic has no closed-form target")
    th = entry.f.check_theta(theta)
    mean = expectation(entry.f, T, th, settings, truncation=truncation)
    return abs(mean - T.target(th))


# ---------------------------------------------------------------------------
# small analytic helpers
# ---------------------------------------------------------------------------


def falling(a, m):
    """a (a-1) ... (a-m+1): coefficient of d^m/dtheta^m theta**a."""
    out = 1.0
    for i in range(m):
        out *= a - i
    return out


def power_law(coef, power):
    """theta -> coef * theta**power with its analytic derivatives."""

    def fn(theta):
        return coef * theta ** power

    def dfn(theta, alpha):
        m = alpha if np.isscalar(alpha) else alpha[0]
        return coef * falling(power, m) * theta ** (power - m)

    return fn, dfn


def polynomial_in_theta(coefs):
    """theta -> sum_j coefs[j] theta**j with analytic derivatives."""
    poly = np.polynomial.Polynomial(coefs)

    def fn(theta):
        return float(poly(theta))

    def dfn(theta, alpha):
        m = alpha if np.isscalar(alpha) else alpha[0]
        return float(poly.deriv(m)(theta)) if m <= poly.degree() else 0.0

    return fn, dfn


def bisect_inverse(cdf, u, lo, hi, iters=64):
    """Vectorized bisection solving cdf(x) = u on [lo, hi]."""
    a = np.full_like(u, lo, dtype=float)
    b = np.full_like(u, hi, dtype=float)
    for _ in range(iters):
        m = 0.5 * (a + b)
        below = cdf(m) < u
        a = np.where(below, m, a)
        b = np.where(below, b, m)
    return 0.5 * (a + b)


def tabulated_sampler(model: ModelSpec, n_grid=4096):
    """Inverse-CDF sampler from a tabulated CDF (cubic Hermite, exact slopes).

    The CDF is tabulated at ``n_grid`` points by per-cell Gauss-Kronrod
    integration; samples are obtained by bisection on the interpolant.
    """

    def sampler(rng, theta, size):
        lo, hi = model.support.bounds(theta)
        scale = model.support.scale_at(theta)
        if not np.isfinite(lo) or not np.isfinite(hi):
            lo, hi = _effective_range(model, theta, lo, hi, scale)
        bps = [b for b in model.support.breakpoints_at(theta) if lo < b < hi]
        x = np.unique(np.concatenate([np.linspace(lo, hi, n_grid), bps]))
        pdf = lambda z: model.density(z, theta)
        cells = numerics._gk_panels(pdf, lambda t: t, lambda t: np.ones_like(t), x[:-1], x[1:], 0)[0][:, 0]
        cdf_nodes = np.concatenate([[0.0], np.cumsum(cells)])
        cdf_nodes /= cdf_nodes[-1]
        slopes = pdf(x) / np.sum(cells)
        bad = ~np.isfinite(slopes)
        slopes[bad] = np.gradient(cdf_nodes, x)[bad]
        spline = _hermite(x, cdf_nodes, slopes)
        u = rng.random(size)
        return bisect_inverse(spline, u, lo, hi, iters=60)

    return sampler


def _hermite(x, y, dy):
    from scipy.interpolate import CubicHermiteSpline

    return CubicHermiteSpline(x, y, dy, extrapolate=True)


def _effective_range(model, theta, lo, hi, scale):
    """Replace infinite ends by points beyond which the mass is below 1e-13."""

    def mass(a, b):
        return numerics.integrate_interval(lambda z: model.density(z, theta), a, b, scale=scale).value

    if np.isfinite(lo):
        anchor = lo
    elif np.isfinite(hi):
        anchor = hi
    else:
        bps = model.support.breakpoints_at(theta)
        anchor = float(bps[0]) if bps else 0.0
    if not np.isfinite(hi):
        step = scale
        while mass(anchor + step, np.inf) > 1e-13:
            step *= 1.5
        hi = anchor + step
    if not np.isfinite(lo):
        step = scale
        while mass(-np.inf, anchor - step) > 1e-13:
            step *= 1.5
        lo = anchor - step
    return lo, hi


# ---------------------------------------------------------------------------
# auxiliary families used by the multiparameter engines and the test battery
# ---------------------------------------------------------------------------


def _hermite_e(order, z):
    coefs = np.zeros(order + 1)
    coefs[-1] = 1.0
    return np.polynomial.hermite_e.hermeval(z, coefs)


def gaussian_mean(sigma2=1.0, n=1) -> ModelSpec:
    """Sample mean of n N(theta, sigma2) draws: N(theta, sigma2/n)."""
    tau = np.sqrt(sigma2 / n)

    def pdf(x, t):
        return stats.norm.pdf(x, t, tau)

    def dpdf(x, t, m):
        z = (x - t) / tau
        return pdf(x, t) * _hermite_e(m, z) / tau ** m

    return ModelSpec(
        name=f"gaussian-mean(sigma2={sigma2},n={n})", pdf=pdf,
        support=Support(lower=-np.inf, upper=np.inf, breakpoints=lambda t: (t,), scale=tau),
        param_domain=((-np.inf, np.inf),), dpdf=dpdf, dpdf_max_order=8,
        sampler=lambda rng, t, size: t + tau * rng.standard_normal(size))


def gaussian_mean_variance(n=1) -> ModelSpec:
    """Sample mean under theta = (mu, v): N(mu, v/n).

    Mixed partials follow from the heat equation: d/dv = (1/2n) d^2/dmu^2.
    """

    def pdf(x, th):
        return stats.norm.pdf(x, th[0], np.sqrt(th[1] / n))

    def dpdf(x, th, alpha):
        a, b = alpha
        tau = np.sqrt(th[1] / n)
        z = (x - th[0]) / tau
        order = a + 2 * b
        return pdf(x, th) * _hermite_e(order, z) / tau ** order / (2.0 * n) ** b

    return ModelSpec(
        name=f"gaussian-mean-variance(n={n})", pdf=pdf,
        support=Support(lower=-np.inf, upper=np.inf, breakpoints=lambda th: (th[0],),
                        scale=lambda th: np.sqrt(th[1] / n)),
        param_dim=2, param_domain=((-np.inf, np.inf), (0.0, np.inf)), dpdf=dpdf, dpdf_max_order=8,
        sampler=lambda rng, th, size: th[0] + np.sqrt(th[1] / n) * rng.standard_normal(size))


def gaussian_location_scale(n=1) -> ModelSpec:
    """Sample mean under theta = (mu, sigma): N(mu, sigma^2/n)."""

    def pdf(x, th):
        return stats.norm.pdf(x, th[0], th[1] / np.sqrt(n))

    def dpdf(x, th, alpha):
        tau = th[1] / np.sqrt(n)
        z = (x - th[0]) / tau
        if alpha == (1, 0):
            return pdf(x, th) * z / tau
        return pdf(x, th) * (z * z - 1.0) / th[1]

    return ModelSpec(
        name=f"gaussian-location-scale(n={n})", pdf=pdf,
        support=Support(lower=-np.inf, upper=np.inf, breakpoints=lambda th: (th[0],),
                        scale=lambda th: th[1] / np.sqrt(n)),
        param_dim=2, param_domain=((-np.inf, np.inf), (0.0, np.inf)), dpdf=dpdf, dpdf_max_order=1,
        sampler=lambda rng, th, size: th[0] + th[1] / np.sqrt(n) * rng.standard_normal(size))


def gaussian_sample(n=5) -> ModelSpec:
    """Sufficient statistics (xbar, q = sum (x_i - xbar)^2) of n N(mu, v) draws.

    xbar ~ N(mu, v/n) and q ~ v * chi2(n-1) are independent; x is ``(2, m)``.
    """
    if n < 2:
        raise ValueError("need n >= 2 for the sample variance")

    def pdf(x, th):
        mu, v = th
        return stats.norm.pdf(x[0], mu, np.sqrt(v / n)) * stats.gamma.pdf(x[1], (n - 1) / 2, scale=2 * v)

    def dpdf(x, th, alpha):
        mu, v = th
        base = pdf(x, th)
        if alpha == (1, 0):
            return base * n * (x[0] - mu) / v
        return base * (-n / (2 * v) + (n * (x[0] - mu) ** 2 + x[1]) / (2 * v * v))

    def sampler(rng, th, size):
        mu, v = th
        return np.stack([mu + np.sqrt(v / n) * rng.standard_normal(size), v * rng.chisquare(n - 1, size)])

    support = ProductSupport((
        Support(lower=-np.inf, upper=np.inf, scale=lambda th: np.sqrt(th[1] / n)),
        Support(lower=0.0, upper=np.inf, scale=lambda th: th[1] * max(n - 1, 1)),
    ))
    return ModelSpec(name=f"gaussian-sample(n={n})", pdf=pdf, support=support, param_dim=2,
                     param_domain=((-np.inf, np.inf), (0.0, np.inf)), dpdf=dpdf, dpdf_max_order=1,
                     sampler=sampler)


def poisson_sum(n=1) -> ModelSpec:
    """S = X_1 + ... + X_n for iid Poisson(theta): Poisson(n theta) on 0, 1, ..."""

    def pdf(s, t):
        return stats.poisson.pmf(np.round(s), n * t)

    def logderivs(s, t, order):
        out = [s / t - n]
        for m in range(2, order + 1):
            out.append(s * (-1) ** (m - 1) * factorial(m - 1) / t ** m)
        return out

    def dpdf(s, t, m):
        return pdf(s, t) * numerics.bell_ratios(logderivs(s, t, m))[m]

    return ModelSpec(
        name=f"poisson-sum(n={n})", pdf=pdf,
        support=Support(kind="discrete", lower=0.0, upper=np.inf, tail=poisson_tail(lambda t: n * t)),
        dpdf=dpdf, dpdf_max_order=8,
        sampler=lambda rng, t, size: rng.poisson(n * t, size).astype(float))
