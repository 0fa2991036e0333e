"""Constructing escort families for which a given statistic attains the bound.

* Location families: h(x) = φ0 ∫_{x0}^x f - ∫_{x0}^x T f, g = a(0) h.
* Scale families: x k(x) = h(x) with h(x) = ∫_{x0}^x (φ1 - T) f, g = a(1) k.
* Deformed exponential families g = Z(ϑ T - φ(ϑ)), whose F-escort is the
  model under which T attains the bound.
"""

from __future__ import annotations

import csv
import functools
import io
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import optimize
from scipy.interpolate import CubicHermiteSpline

from . import numerics
from .bounds import bhattacharyya_dd, bhattacharyya_regular, multiparam_bound
from .errors import QuadratureError, RegularityError, SynthesisError
from .model import EscortPair, ModelSpec, Statistic, Support

SIGN_TOL = 1e-12


def _as_fn(T):
    if isinstance(T, Statistic):
        return T
    return lambda x: np.asarray(T(np.asarray(x, dtype=float)), dtype=float)


def _tab_range(f, lo, hi):
    """Finite tabulation range: infinite ends cut where the tail mass of f is below 1e-13."""

    def mass(a, b):
        return numerics.integrate_interval(f, a, b).value

    anchor = lo if np.isfinite(lo) else (hi if np.isfinite(hi) else 0.0)
    if not np.isfinite(hi):
        step = 1.0
        while mass(anchor + step, np.inf) > 1e-13:
            step *= 1.5
        hi = anchor + step
    if not np.isfinite(lo):
        step = 1.0
        while mass(-np.inf, anchor - step) > 1e-13:
            step *= 1.5
        lo = anchor - step
    return lo, hi


def _cumulative(fn, x):
    """∫_{x[0]}^{x[j]} fn for every grid point (GK15 per cell)."""
    cells = numerics._gk_panels(fn, lambda t: t, lambda t: np.ones_like(t), x[:-1], x[1:], 0)[0][:, 0]
    return np.concatenate([[0.0], np.cumsum(cells)])


@dataclass(frozen=True)
class SynthesizedDensity:
    """An escort g built from a base density, a statistic and a target value.

    ``kernel`` is h (location) or k = h/x (scale); ``normalizer`` is a(0)
    or a(1), negative when the kernel is nonpositive.  ``pdf(x, θ)`` applies
    the family rule and ``dpdf`` is exact, since h' = (φ - T) f.
    """

    base_name: str
    family_rule: str
    grid: np.ndarray
    kernel_values: np.ndarray
    normalizer: float
    support: tuple
    phi: float
    _h: Callable = field(repr=False)
    _hprime: Callable = field(repr=False)
    diagnostics: dict = field(default_factory=dict)

    def kernel(self, x):
        x = np.asarray(x, dtype=float)
        lo, hi = self.support
        inside = (x >= lo) & (x <= hi) & (x >= self.grid[0]) & (x <= self.grid[-1])
        if self.family_rule == "location-shift":
            val = self._h(x)
        else:
            small = np.abs(x) < 1e-8
            with np.errstate(divide="ignore", invalid="ignore"):
                val = np.where(small, self._hprime(np.where(small, x, 0.0)), self._h(x) / np.where(small, 1.0, x))
        return np.where(inside, val, 0.0)

    def g(self, x):
        """The base escort density (θ = 0 for location, θ = 1 for scale)."""
        return np.clip(self.normalizer * self.kernel(x), 0.0, None)

    def pdf(self, x, theta):
        x = np.asarray(x, dtype=float)
        if self.family_rule == "location-shift":
            return self.g(x - theta)
        return self.g(x / theta) / theta

    def dpdf(self, x, theta, m):
        if m != 1:
            raise NotImplementedError("synthesized escorts carry only the first derivative")
        x = np.asarray(x, dtype=float)
        lo, hi = self.support
        if self.family_rule == "location-shift":
            u = x - theta
            val = -self.normalizer * self._hprime(u)
        else:
            u = x / theta
            val = -self.normalizer * self._hprime(u) / theta ** 2
        return np.where((u >= max(lo, self.grid[0])) & (u <= min(hi, self.grid[-1])), val, 0.0)

    def to_model(self, name=None, param_domain=None) -> ModelSpec:
        lo, hi = self.support
        if self.family_rule == "location-shift":
            sup = Support(lower=lambda t: lo + t, upper=lambda t: hi + t)
            dom = param_domain or ((-np.inf, np.inf),)
        else:
            sup = Support(lower=lambda t: lo * t, upper=lambda t: hi * t,
                          breakpoints=(lambda t: (0.0,)) if lo < 0 < hi else None, scale=lambda t: t)
            dom = param_domain or ((0.0, np.inf),)
        return ModelSpec(name or f"{self.base_name}.synth", self.pdf, sup, param_domain=dom,
                         dpdf=self.dpdf, dpdf_max_order=1)

    def to_csv(self, out=None) -> str:
        """Write ``x, kernel, g`` rows; returns the CSV text."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "kernel", "g"])
        for x, k in zip(self.grid, self.kernel(self.grid)):
            w.writerow([f"{x:.17g}", f"{k:.17g}", f"{self.normalizer * k:.17g}"])
        text = buf.getvalue()
        if out is not None:
            if hasattr(out, "write"):
                out.write(text)
            else:
                with open(out, "w", newline="") as fh:
                    fh.write(text)
        return text


def _synthesize(rule, f, T, phi, support, x0, grid, n_grid, base_name, closed_h):
    f = _as_fn(f)
    T = _as_fn(T)
    lo, hi = (float(v) for v in support)
    x0 = lo if x0 is None else float(x0)
    if x0 != lo:
        raise SynthesisError("the kernel is anchored at the left support endpoint; pass x0 = support[0]")

    def pdf(x):
        return np.where((x >= lo) & (x <= hi), f(x), 0.0)

    def hprime(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(invalid="ignore", divide="ignore"):
            val = (phi - T(x)) * pdf(x)
        return np.where(np.isfinite(val), val, 0.0)

    if rule == "scale" and np.isfinite(x0) and x0 != 0.0:
        probe = x0 + 1e-9 * max(1.0, abs(x0))
        if abs(x0 * f(np.array([probe]))[0]) > 1e-12:
            raise SynthesisError(f"boundary term x0*g(x0) does not vanish at x0={x0}")

    a, b = _tab_range(pdf, lo, hi)
    if grid is None:
        x = np.linspace(a, b, n_grid)
        if rule == "scale" and a < 0 < b:
            x = np.unique(np.concatenate([x, [0.0]]))
    else:
        x = np.unique(np.asarray(grid, dtype=float))
    if closed_h is not None:
        hv = np.asarray(closed_h(x), dtype=float)
        h = closed_h
    else:
        hv = _cumulative(hprime, x)
        if not np.isfinite(lo):
            hv = hv + numerics.integrate_interval(hprime, -np.inf, x[0]).value
        h = CubicHermiteSpline(x, hv, hprime(x), extrapolate=False)

    scale_ref = float(np.max(np.abs(hv))) if hv.size else 0.0
    if scale_ref <= SIGN_TOL:
        raise SynthesisError("no valid escort: the kernel vanishes identically (T is constant at the target)")
    if rule == "scale":
        zero = np.isclose(x, 0.0)
        if np.any(zero) and abs(hv[zero][0]) > 1e-9 * scale_ref:
            raise SynthesisError("kernel h(x)/x diverges at x = 0")
        with np.errstate(divide="ignore", invalid="ignore"):
            kv = np.where(zero, hprime(x), hv / np.where(zero, 1.0, x))
    else:
        kv = hv
    kscale = float(np.max(np.abs(kv)))
    tail = abs(kv[-1]) if not np.isfinite(hi) else 0.0
    head = abs(kv[0]) if not np.isfinite(lo) else 0.0
    if max(tail, head) > 1e-8 * kscale:
        raise SynthesisError("kernel does not decay at an infinite end: its integral diverges "
                             "(the target value differs from E_f[T])")
    pos, neg = kv > SIGN_TOL * kscale, kv < -SIGN_TOL * kscale
    if pos.any() and neg.any():
        raise SynthesisError("no valid escort: the kernel changes sign on the support")

    probe = SynthesizedDensity(base_name, rule, x, kv, 1.0, (lo, hi), phi, h, hprime)
    bps = [0.0] if rule == "scale" and x[0] < 0 < x[-1] else []
    try:
        total = numerics.integrate_interval(probe.kernel, x[0], x[-1], breakpoints=bps).value
    except QuadratureError as exc:
        raise SynthesisError(f"kernel integral did not converge: {exc}") from exc
    if not np.isfinite(total) or total == 0.0:
        raise SynthesisError("kernel integral is zero or not finite")
    a_norm = 1.0 / total
    mids = 0.5 * (x[:-1] + x[1:])
    resid = 0.0
    if isinstance(h, CubicHermiteSpline):
        resid = float(np.max(np.abs(h.derivative()(mids) - hprime(mids)))) / max(kscale, 1e-300)
    diag = {"grid_points": int(x.size), "tabulation_range": [float(x[0]), float(x[-1])],
            "kernel_integral": float(total), "slope_residual": resid, "closed_form": closed_h is not None}
    return SynthesizedDensity(base_name, rule, x, kv, a_norm, (lo, hi), phi, h, hprime, diag)


def synth_location(f, T, phi0, support=(0.0, np.inf), x0=None, grid=None, n_grid=4097,
                   base_name="location", closed_h=None) -> SynthesizedDensity:
    """Optimizing location escort g(x - θ) for an estimator T of φ(θ) = φ0 + θ.

    ``f`` is the base density at θ = 0 and ``support`` its support.
    ``closed_h`` overrides the tabulated kernel when the antiderivative is known.

    Raises
    ------
    SynthesisError
        Kernel identically zero, changing sign, or not integrable.
    """
    return _synthesize("location-shift", f, T, float(phi0), support, x0, grid, n_grid, base_name, closed_h)


def synth_scale(f, T, phi1, support=(0.0, np.inf), x0=None, grid=None, n_grid=4097,
                base_name="scale", closed_h=None) -> SynthesizedDensity:
    """Optimizing scale escort g(x/θ)/θ, with kernel k(x) = h(x)/x.

    ``f`` is the base density at θ = 1.  The boundary term x0 g(x0) must
    vanish at the left endpoint.
    """
    return _synthesize("scale", f, T, float(phi1), support, x0, grid, n_grid, base_name, closed_h)


# ---------------------------------------------------------------------------
# deformed exponential families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DeformedFamily:
    """g(t; ϑ) = Z(ϑ T(t) - φ(ϑ)) with respect to the carrier measure w(t) dt.

    ``F`` is the deformed logarithm (F' > 0, F'' <= 0 on (0, ∞)), ``Z``
    its inverse and ``Zprime`` the derivative of Z.  ``kink`` is the
    argument at which Z stops being smooth (e.g. -1 for [1 + u]_+).
    """

    F: Callable
    Fprime: Callable
    Z: Callable
    Zprime: Callable
    T: Callable
    carrier: tuple = (0.0, np.inf)
    weight: Callable = field(default=lambda t: np.ones_like(t))
    param_domain: tuple = ((-np.inf, 0.0),)
    kink: float | None = None
    scale: float = 1.0
    name: str = "deformed"

    def __post_init__(self):
        u = np.geomspace(1e-3, 1e3, 61)
        if np.max(np.abs(self.Z(self.F(u)) - u) / np.maximum(1.0, u)) > 1e-10:
            raise ValueError("Z is not the inverse of F on (0, inf)")
        d1 = self.Fprime(u)
        if not np.all(d1 > 0):
            raise ValueError("F' must be positive on (0, inf)")
        if np.any(np.diff(d1) > 1e-12 * np.max(np.abs(d1))):
            raise ValueError("F'' must be nonpositive on (0, inf)")
        object.__setattr__(self, "_phi_cache", functools.lru_cache(maxsize=256)(self._solve_phi))
        object.__setattr__(self, "_hf_cache", functools.lru_cache(maxsize=256)(self._compute_h_F))

    def _arg(self, t, vt, phi):
        return vt * self.T(t) - phi

    def kinks(self, vt, phi):
        """Carrier points where the argument of Z crosses the kink."""
        if self.kink is None:
            return ()
        lo, hi = self.carrier
        a = lo if np.isfinite(lo) else -self.scale * 2.0 ** 40
        ends = np.concatenate([[a], a + self.scale * np.geomspace(1e-6, 2.0 ** 40, 400)])
        if np.isfinite(hi):
            ends = np.concatenate([ends[ends < hi], [hi]])
        vals = self._arg(ends, vt, phi) - self.kink
        out = []
        for i in np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0):
            out.append(optimize.brentq(lambda t: self._arg(np.array([t]), vt, phi)[0] - self.kink,
                                       ends[i], ends[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps))
        return tuple(out)

    def _integral(self, fn, vt, phi, settings=None):
        lo, hi = self.carrier
        return numerics.integrate_interval(fn, lo, hi, breakpoints=self.kinks(vt, phi), scale=self.scale,
                                           settings=settings).value

    def mass(self, vt, c):
        return self._integral(lambda t: self.weight(t) * self.Z(self._arg(t, vt, c)), vt, c)

    def _solve_phi(self, vt):
        fn = lambda c: self.mass(vt, c) - 1.0
        lo, hi = -1.0, 1.0
        for _ in range(200):
            if fn(lo) > 0 > fn(hi):
                break
            if not fn(lo) > 0:
                lo = 2.0 * lo - 1.0
            if not fn(hi) < 0:
                hi = 2.0 * hi + 1.0
        else:
            raise SynthesisError(f"could not bracket phi({vt})")
        return optimize.brentq(fn, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)

    def phi(self, vt) -> float:
        """Normalizer φ(ϑ) with ∫ Z(ϑT - φ) w dt = 1 (cached per ϑ)."""
        return self._phi_cache(float(vt))

    def g_value(self, t, vt):
        """Z(ϑ T(t) - φ(ϑ)), the density relative to the carrier measure."""
        return self.Z(self._arg(np.asarray(t, dtype=float), vt, self.phi(vt)))

    def g_pdf(self, t, vt):
        t = np.asarray(t, dtype=float)
        return self.weight(t) * self.g_value(t, vt)

    def h_F(self, vt) -> float:
        """∫ w / F'(g) over {g > 0} (cached per ϑ)."""
        return self._hf_cache(float(vt))

    def _compute_h_F(self, vt):
        phi = self.phi(vt)

        def integrand(t):
            gv = self.Z(self._arg(t, vt, phi))
            with np.errstate(divide="ignore", invalid="ignore"):
                val = self.weight(t) / self.Fprime(gv)
            return np.where(gv > 0, val, 0.0)

        out = self._integral(integrand, vt, phi)
        if not np.isfinite(out) or out <= 0:
            raise SynthesisError(f"h_F({vt}) is not finite and positive")
        return out

    def eta(self, vt) -> float:
        """Expectation parameter E_f[T] under the F-escort."""
        fe = f_escort(self, vt)
        phi = self.phi(vt)
        return self._integral(lambda t: fe(t) * self.T(t), vt, phi)

    def support_upper(self, vt):
        lo, hi = self.carrier
        phi = self.phi(vt)
        cut = [k for k in self.kinks(vt, phi) if self.Z(self._arg(np.array([k + 1e-9 * max(1, abs(k))]), vt, phi))[0] <= 0]
        return min(cut) if cut else hi

    def dg_pdf(self, t, vt, m=1):
        """∂ϑ of w Z(ϑT - φ): w Z'(u) (T - φ'(ϑ)) with φ'(ϑ) = E_f[T]."""
        if m != 1:
            raise NotImplementedError("only the first ϑ-derivative is wired")
        t = np.asarray(t, dtype=float)
        u = self._arg(t, vt, self.phi(vt))
        return self.weight(t) * self.Zprime(u) * (self.T(t) - self._eta_cached(vt))

    @functools.cached_property
    def _eta_cached(self):
        return functools.lru_cache(maxsize=256)(lambda vt: self.eta(vt))


def f_escort(d: DeformedFamily, vt) -> Callable:
    """The F-escort density w / (F'(g) h_F(ϑ)) on {g > 0}."""
    hf = d.h_F(vt)
    phi = d.phi(vt)

    def pdf(t):
        t = np.asarray(t, dtype=float)
        gv = d.Z(d._arg(t, vt, phi))
        with np.errstate(divide="ignore", invalid="ignore"):
            val = d.weight(t) / (d.Fprime(gv) * hf)
        return np.where(gv > 0, val, 0.0)

    return pdf


def deformed_pair(d: DeformedFamily) -> EscortPair:
    """(F-escort f, deformed family g) as models in the canonical parameter ϑ."""
    lo, _ = d.carrier
    sup = Support(lower=lo, upper=lambda vt: d.support_upper(vt),
                  breakpoints=lambda vt: d.kinks(vt, d.phi(vt)), scale=d.scale)
    g = ModelSpec(f"{d.name}.g", lambda t, vt: d.g_pdf(t, vt), sup, param_domain=d.param_domain,
                  dpdf=lambda t, vt, m: d.dg_pdf(t, vt, m), dpdf_max_order=1)
    f = ModelSpec(f"{d.name}.f", lambda t, vt: f_escort(d, vt)(t), sup, param_domain=d.param_domain)
    return EscortPair(f, g, True)


def linear_deformed(T, carrier, weight=None, param_domain=((-np.inf, 0.0),), scale=1.0, name="linear"):
    """F(u) = u - 1, Z(u) = [1 + u]_+ (the kink sits at u = -1)."""
    return DeformedFamily(
        F=lambda u: u - 1.0, Fprime=lambda u: np.ones_like(np.asarray(u, dtype=float)),
        Z=lambda u: np.maximum(1.0 + np.asarray(u, dtype=float), 0.0),
        Zprime=lambda u: (np.asarray(u, dtype=float) > -1.0).astype(float),
        T=T, carrier=carrier, weight=weight or (lambda t: np.ones_like(t)), param_domain=param_domain,
        kink=-1.0, scale=scale, name=name)


def log_deformed(T, carrier, weight=None, param_domain=((-np.inf, 0.0),), scale=1.0, name="exponential"):
    """F = log: an ordinary exponential family, whose F-escort is itself."""
    return DeformedFamily(
        F=np.log, Fprime=lambda u: 1.0 / np.asarray(u, dtype=float), Z=np.exp, Zprime=np.exp,
        T=T, carrier=carrier, weight=weight or (lambda t: np.ones_like(t)), param_domain=param_domain,
        scale=scale, name=name)


def deformed_uniform_max(n: int) -> DeformedFamily:
    """Max of n uniforms written as a linear deformed family in t = max.

    The carrier measure is n t^(n-1) dt; ϑ = -(n+1)/θ^(n+1) maps back to θ.
    """
    return linear_deformed(lambda t: np.asarray(t, dtype=float), (0.0, np.inf),
                           weight=lambda t: n * np.asarray(t, dtype=float) ** (n - 1),
                           param_domain=((-np.inf, 0.0),), scale=1.0, name=f"uniform-joint-max(n={n})")


def canonical_from_theta(n: int, theta: float) -> float:
    return -(n + 1) / theta ** (n + 1)


# ---------------------------------------------------------------------------
# equality condition
# ---------------------------------------------------------------------------


def verify_equality_condition(pair: EscortPair, T: Statistic, theta, order: int = 1, nodes=None, **kw) -> float:
    """Correlation under f between S^T Σ^{-1} M and T - φ(θ).

    Uses the regular (or mixed-partial) scores of the given order, or the
    divided-difference scores when ``nodes`` are supplied.  A value of 1
    means the bound is attained.

    Raises
    ------
    RegularityError
        Either side has zero variance.
    """
    if nodes is not None:
        rep = bhattacharyya_dd(pair, T, nodes, **kw)
    elif pair.f.param_dim == 1:
        rep = bhattacharyya_regular(pair, T, theta, order, **kw)
    else:
        rep = multiparam_bound(pair, T, theta, order, **kw)
    corr = rep.diagnostics["equality_correlation"]
    if corr is None:
        raise RegularityError("equality condition undefined: zero variance of T or of the projected score")
    return corr
