"""Information-inequality engines.

Every bound here has the same shape: pick score functions S_i with
E_f[S_i] = 0, compute Σ = Cov_f(S) and M_i = Cov_f(T, S_i) (which equals a
derivative or divided difference of λ(θ) = E_g[T]), and report M^T Σ^{-1} M.
The engines differ only in how the scores and M are built.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from . import linalg, numerics
from .errors import NodeError, NotPositiveDefinite, QuadratureError, RegularityError, SupportError
from .model import EscortPair, ModelSpec, ProductSupport, Statistic, expectation_detailed
from .numerics import NodeSet, QuadratureSettings

SCHEMA_VERSION = "1"
CLOSED_FORM_TOL = 1e-6
NUMERIC_TOL = 1e-4
MAX_SCORES = 64

# λ(θ) is differentiated numerically, so it is integrated well below the default tolerance
LAMBDA_SETTINGS = QuadratureSettings(abs_tol=1e-15, rel_tol=1e-13, max_subdivisions=4000)


@dataclass
class BoundReport:
    """Both sides of one information inequality at one parameter point."""

    method: str
    theta: list
    bound: float
    order: int = 1
    nodes: list | None = None
    variance: float | None = None
    gap: float | None = None
    attained: bool | None = None
    model: str = ""
    hyper: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    versions: dict = field(default_factory=lambda: {"schema": SCHEMA_VERSION, "catalog": "1"})

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "model": self.model,
            "hyper": dict(self.hyper),
            "theta": list(self.theta),
            "order": self.order,
            "nodes": None if self.nodes is None else list(self.nodes),
            "bound": self.bound,
            "variance": self.variance,
            "gap": self.gap,
            "attained": self.attained,
            "diagnostics": dict(self.diagnostics),
            "versions": dict(self.versions),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BoundReport":
        return cls(**{k: d[k] for k in ("method", "theta", "bound")},
                   **{k: d[k] for k in ("order", "nodes", "variance", "gap", "attained", "model",
                                        "hyper", "diagnostics", "versions") if k in d})


@dataclass(frozen=True)
class ScoreSet:
    """Score functions ``S_i(x)`` at a fixed working parameter."""

    scores: tuple
    provenance: str = "custom"
    labels: tuple = ()

    def __post_init__(self):
        if self.provenance not in ("escort-derivative", "escort-divided-difference", "mixed-partial", "custom"):
            raise ValueError(f"unknown score provenance {self.provenance!r}")
        if not self.labels:
            object.__setattr__(self, "labels", tuple(f"S{i + 1}" for i in range(len(self.scores))))
        if len(self.labels) != len(self.scores):
            raise ValueError("one label per score is required")
        if len(self.scores) > MAX_SCORES:
            raise ValueError(f"at most {MAX_SCORES} scores are supported")

    def __len__(self):
        return len(self.scores)

    def head(self, m):
        return ScoreSet(self.scores[:m], self.provenance, self.labels[:m])


@dataclass(frozen=True)
class SearchSettings:
    """Two-stage node search: log grid per side, then Nelder-Mead."""

    box: tuple | None = None
    grid_points: int = 9
    min_offset: float = 1e-4
    maxiter: int = 200
    fatol: float = 1e-8
    min_spacing: float = 1e-4


# ---------------------------------------------------------------------------
# shared moment engine
# ---------------------------------------------------------------------------


def _ratio(num, den):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)


@dataclass
class _Moments:
    mean_s: np.ndarray
    gram: np.ndarray
    cross: np.ndarray
    mean_t: np.ndarray
    second_t: np.ndarray
    error: float
    truncation: int | None

    @property
    def sigma(self):
        return linalg.as_sym(self.gram - np.outer(self.mean_s, self.mean_s))

    @property
    def cov_ts(self):
        return self.cross - np.outer(self.mean_t, self.mean_s)

    @property
    def cov_t(self):
        return linalg.as_sym(self.second_t - np.outer(self.mean_t, self.mean_t))


def _moments(f: ModelSpec, theta, scores: ScoreSet, stats: Sequence[Callable], settings=None,
             truncation=None, breakpoints=()) -> _Moments:
    """One vector quadrature for E[S], E[S S^T], E[T S^T], E[T], E[T T^T] under f(., theta)."""
    k, nt = len(scores), len(stats)
    iu = np.triu_indices(k)
    it = np.triu_indices(nt)

    def integrand(x):
        p = f.density(x, theta)
        S = np.array([np.where(p > 0, s(x), 0.0) for s in scores.scores]).reshape(k, -1)
        with np.errstate(invalid="ignore", over="ignore"):
            T = np.array([np.where(p > 0, t(x), 0.0) for t in stats]).reshape(nt, -1)
        # weight each factor by sqrt(f): g/f can be huge where f is tiny while g^2/f stays finite
        sp = np.sqrt(p)
        Ss, Ts = S * sp, T * sp
        parts = [Ss * sp, (Ss[:, None, :] * Ss[None, :, :])[iu],
                 (Ts[:, None, :] * Ss[None, :, :]).reshape(nt * k, -1), Ts * sp, (Ts[:, None, :] * Ts[None, :, :])[it]]
        return np.concatenate(parts, axis=0)

    res = numerics.integrate_detailed(integrand, f.support, theta, settings, breakpoints=breakpoints,
                                      truncation=truncation)
    v = np.atleast_1d(res.value)
    pos = 0

    def take(n):
        nonlocal pos
        out = v[pos:pos + n]
        pos += n
        return out

    mean_s = take(k)
    gram = np.zeros((k, k))
    gram[iu] = take(len(iu[0]))
    gram = gram + np.triu(gram, 1).T
    cross = take(nt * k).reshape(nt, k)
    mean_t = take(nt)
    second_t = np.zeros((nt, nt))
    second_t[it] = take(len(it[0]))
    second_t = second_t + np.triu(second_t, 1).T
    return _Moments(mean_s, gram, cross, mean_t, second_t, res.error, res.truncation)


def _check_zero_mean(mom: _Moments, labels):
    second = np.diag(mom.gram)
    for i, label in enumerate(labels):
        if not second[i] > 0 or not np.isfinite(second[i]):
            raise RegularityError(f"score {label} has zero or infinite variance ({second[i]!r})")
        if abs(mom.mean_s[i]) > 1e-6 * math.sqrt(second[i]) + 1e-8:
            raise RegularityError(f"score {label} has nonzero mean {mom.mean_s[i]:.3g} under f")


def _discrete_truncation(pair: EscortPair, thetas, truncation):
    if truncation is not None or not pair.f.is_discrete:
        return truncation
    tails = []
    for m, t in [(pair.f, thetas[0])] + [(pair.g, t) for t in thetas]:
        if m.support.tail is not None:
            tails.append(int(m.support.tail(t)))
    return max(tails) if tails else None


def _support_breaks(pair: EscortPair, thetas):
    """Finite support ends and declared kinks of f and g at every node."""
    if isinstance(pair.f.support, ProductSupport) or pair.f.is_discrete:
        return ()
    pts = set(pair.f.support.breakpoints_at(thetas[0]))
    for t in thetas:
        pts.update(pair.g.support.breakpoints_at(t))
        pts.update(v for v in pair.g.support.bounds(t) if np.isfinite(v))
    return tuple(sorted(pts))


def _assemble(method, pair, T, theta, scores: ScoreSet, M, *, lambda_path, settings, truncation,
              breakpoints, order, nodes=None, attain_tol=None, extra=None) -> BoundReport:
    """Quadrature, degradation to a PD leading block, bound and diagnostics."""
    th = pair.f.check_theta(theta)
    mom = _moments(pair.f, th, scores, [T], settings, truncation, breakpoints)
    _check_zero_mean(mom, scores.labels)
    sigma = mom.sigma
    M = np.asarray(M, dtype=float)
    used = linalg.largest_pd_block(sigma)
    if used == 0:
        raise NotPositiveDefinite(1, f"{method}: the first score already has a singular covariance")
    degraded = used < len(scores)
    sig = sigma[:used, :used]
    Mu = M[:used]
    w = linalg.solve(sig, Mu)
    bound = float(Mu @ w)
    cov_ts = mom.cov_ts[0, :used]
    var = float(mom.cov_t[0, 0])
    resid = np.abs(mom.cross[0, :len(M)] - M)
    corr = None
    if var > 0 and bound > 0:
        corr = float(w @ cov_ts / math.sqrt((w @ sig @ w) * var))
    tol = attain_tol if attain_tol is not None else (
        CLOSED_FORM_TOL if lambda_path.startswith("closed-form") else NUMERIC_TOL)
    gap = var - bound
    diagnostics = {
        "sigma_condition": linalg.condition_estimate(sig),
        "quad_error": mom.error,
        "truncation": mom.truncation,
        "equality_correlation": corr,
        "argmax_nodes": None,
        "lambda_path": lambda_path,
        "M": [float(v) for v in M],
        "score_identity_residual": float(resid.max()),
        "zero_mean_max": float(np.max(np.abs(mom.mean_s))),
        "scores_used": used,
        "degraded": degraded,
        "attain_tol": tol,
        "assumptions_checked": bool(pair.containment_checked),
    }
    if extra:
        diagnostics.update(extra)
    return BoundReport(
        method=method, theta=[float(v) for v in np.atleast_1d(th)], order=order,
        nodes=None if nodes is None else [_node_out(v) for v in nodes],
        bound=bound, variance=var, gap=gap, attained=bool(gap / max(var, 1e-300) <= tol),
        model=pair.f.name, diagnostics=diagnostics)


def _node_out(v):
    a = np.atleast_1d(np.asarray(v, dtype=float))
    return float(a[0]) if a.size == 1 else [float(u) for u in a]


# ---------------------------------------------------------------------------
# λ(θ) and its derivatives
# ---------------------------------------------------------------------------


def _lambda_source(pair: EscortPair, T: Statistic):
    """(λ evaluator, analytic derivative or None, path label)."""
    if pair.is_self and T.target is not None:
        return T.target, T.target_derivative, "closed-form"
    if T.lambda_under_g is not None:
        return T.lambda_under_g, T.lambda_derivative, "closed-form"
    return None, None, "quadrature"


def lambda_value(pair: EscortPair, T: Statistic, theta, truncation=None):
    """λ(θ) = E_g[T] from the closed form when wired, else by quadrature."""
    fn, _, _ = _lambda_source(pair, T)
    if fn is not None:
        return float(fn(theta))
    th = pair.g.check_theta(theta)
    return float(expectation_detailed(pair.g, T, th, LAMBDA_SETTINGS, truncation=truncation).value)


def _lambda_derivatives(pair, T, theta, orders, truncation):
    """λ^(i)(θ) for scalar θ; returns (values, path)."""
    fn, dfn, path = _lambda_source(pair, T)
    if dfn is not None:
        return np.array([dfn(theta, i) for i in orders], dtype=float), "closed-form-analytic"
    lam = fn if fn is not None else (lambda t: lambda_value(pair, T, t, truncation))
    dom = pair.f.param_domain[0]
    vals = [numerics.derivative(lam, theta, i, domain=dom)[0] if i <= 4 else np.nan for i in orders]
    return np.array(vals), ("closed-form-numeric" if fn is not None else "quadrature-numeric")


def _tensor_partial(fn, theta, alpha):
    """Mixed partial of a smooth function of a parameter vector by tensor central differences."""
    th = np.asarray(theta, dtype=float)
    order = sum(alpha)
    axes = [(i, a) for i, a in enumerate(alpha) if a > 0]
    if len(axes) == 1:
        i, a = axes[0]

        def along(c):
            p = th.copy()
            p[i] = c
            return fn(p)

        return numerics.derivative(along, th[i], a)[0]

    def at_step(scale):
        total = 0.0
        stencils = [numerics._STENCILS[a] for _, a in axes]
        hs = [scale * numerics.default_step(th[i], order) for i, _ in axes]
        for combo in itertools.product(*[range(len(s[0])) for s in stencils]):
            p = th.copy()
            w = 1.0
            for (i, a), (offs, wts), h, c in zip(axes, stencils, hs, combo):
                p[i] += offs[c] * h
                w *= wts[c] / h ** a
            total += w * fn(p)
        return total

    return (4 * at_step(1.0) - at_step(2.0)) / 3


def _lambda_partials(pair, T, theta, indices, truncation):
    fn, dfn, _ = _lambda_source(pair, T)
    if pair.f.param_dim == 1:
        return _lambda_derivatives(pair, T, float(np.atleast_1d(theta)[0]), [sum(a) for a in indices],
                                   truncation)
    if dfn is not None:
        return np.array([dfn(theta, a) for a in indices], dtype=float), "closed-form-analytic"
    lam = fn if fn is not None else (lambda t: lambda_value(pair, T, t, truncation))
    return (np.array([_tensor_partial(lam, theta, a) for a in indices]),
            "closed-form-numeric" if fn is not None else "quadrature-numeric")


# ---------------------------------------------------------------------------
# score constructors
# ---------------------------------------------------------------------------


def escort_derivative_scores(pair: EscortPair, theta, order: int) -> ScoreSet:
    """S_i = ∂^i g / f for i = 1..order (scalar parameter)."""
    th = pair.f.check_theta(theta)

    def make(i):
        return lambda x: _ratio(pair.g.partial(x, th, i), pair.f.density(x, th))

    return ScoreSet(tuple(make(i) for i in range(1, order + 1)), "escort-derivative",
                    tuple(f"d{i}" for i in range(1, order + 1)))


def multi_indices(p: int, k: int) -> list:
    """Multi-indices with 0 < |i| <= k in graded lexicographic order."""
    out = []
    for total in range(1, k + 1):
        level = [a for a in itertools.product(range(total, -1, -1), repeat=p) if sum(a) == total]
        out.extend(sorted(level, reverse=True))
    if len(out) > MAX_SCORES:
        raise ValueError(f"{len(out)} multi-indices exceed the cap of {MAX_SCORES}")
    return out


def mixed_partial_scores(pair: EscortPair, theta, k: int) -> ScoreSet:
    th = pair.f.check_theta(theta)
    idx = multi_indices(pair.f.param_dim, k)

    def make(a):
        alpha = a[0] if pair.f.param_dim == 1 else a
        return lambda x: _ratio(pair.g.partial(x, th, alpha), pair.f.density(x, th))

    return ScoreSet(tuple(make(a) for a in idx), "mixed-partial", tuple(str(a) for a in idx))


def divided_difference_scores(pair: EscortPair, nodes: Sequence, base_theta=None, coordinate=None) -> ScoreSet:
    """S_i = Δ^i g_x(θ^0) / f(x, θ^0) for i = 1..k.

    ``nodes`` are scalars, or parameter vectors differing only in ``coordinate``.
    """
    base = nodes[0] if base_theta is None else base_theta
    th0 = pair.f.check_theta(base)
    coords = [float(np.atleast_1d(v)[0 if coordinate is None else coordinate]) for v in nodes]
    native = [pair.g.check_theta(v) for v in nodes]
    k = len(nodes) - 1
    cache = {}

    def table(x):
        key = id(x)
        if key not in cache:
            cache.clear()
            vals = np.array([pair.g.density(x, t) for t in native])
            rows = numerics.divided_difference_values(vals, coords)
            cache[key] = (x, [r[0] for r in rows])
        return cache[key][1]

    def make(i):
        return lambda x: _ratio(table(x)[i], pair.f.density(x, th0))

    tag = "" if coordinate is None else f"c{coordinate}:"
    return ScoreSet(tuple(make(i) for i in range(1, k + 1)), "escort-divided-difference",
                    tuple(f"{tag}D{i}" for i in range(1, k + 1)))


# ---------------------------------------------------------------------------
# engines
# ---------------------------------------------------------------------------


def generalized_fisher(pair: EscortPair, theta, settings=None, truncation=None) -> np.ndarray:
    """N_ij = ∫ ∂_i g ∂_j g / f over the support of f (checked positive definite)."""
    th = pair.f.check_theta(theta)
    scores = mixed_partial_scores(pair, th, 1)
    trunc = _discrete_truncation(pair, [th], truncation)
    mom = _moments(pair.f, th, scores, [lambda x: np.zeros(np.shape(x)[-1])], settings, trunc,
                   _support_breaks(pair, [th]))
    N = linalg.as_sym(mom.gram)
    linalg.cholesky(N)
    return N


def bhattacharyya_regular(pair: EscortPair, T: Statistic, theta, order: int = 1, *, settings=None,
                          truncation=None, attain_tol=None, method="bhatt") -> BoundReport:
    """Bound from the scores ∂^i g / f, i = 1..order, with M_i = λ^(i)(θ)."""
    if pair.f.param_dim != 1:
        raise ValueError("bhattacharyya_regular needs a scalar parameter; use multiparam_bound")
    if order < 1:
        raise ValueError("order must be >= 1")
    th = pair.f.check_theta(theta)
    trunc = _discrete_truncation(pair, [th], truncation)
    M, path = _lambda_derivatives(pair, T, th, range(1, order + 1), trunc)
    scores = escort_derivative_scores(pair, th, order)
    if np.any(np.isnan(M)):
        # orders above the finite-difference stencils: use the score identity E_f[T S_i]
        mom = _moments(pair.f, th, scores, [T], settings, trunc, _support_breaks(pair, [th]))
        M = np.where(np.isnan(M), mom.cross[0], M)
        path = "score-identity"
    return _assemble(method, pair, T, th, scores, M, lambda_path=path, settings=settings, truncation=trunc,
                     breakpoints=_support_breaks(pair, [th]), order=order, attain_tol=attain_tol)


def naudts_bound(pair: EscortPair, T: Statistic, theta, *, settings=None, truncation=None,
                 attain_tol=None) -> BoundReport:
    """Generalized Cramér-Rao bound M^T N^{-1} M with M = ∇λ(θ)."""
    if pair.f.param_dim == 1:
        return bhattacharyya_regular(pair, T, theta, 1, settings=settings, truncation=truncation,
                                     attain_tol=attain_tol, method="naudts")
    return multiparam_bound(pair, T, theta, 1, settings=settings, truncation=truncation,
                            attain_tol=attain_tol, method="naudts")


def classical_cr(f: ModelSpec, T: Statistic, theta, **kw) -> BoundReport:
    """Classical Cramér-Rao bound (g = f, first order)."""
    return bhattacharyya_regular(EscortPair.self_pair(f), T, theta, 1, method="cr", **kw)


def _check_nodes(pair: EscortPair, th0, nodes_native):
    for t in nodes_native[1:]:
        if not pair.check_containment(th0, t):
            raise SupportError(f"support of g at node {_node_out(t)} is not contained in the support of f "
                               f"at {_node_out(th0)}")


def bhattacharyya_dd(pair: EscortPair, T: Statistic, nodes, *, settings=None, truncation=None,
                     attain_tol=None, method="bhatt-dd") -> BoundReport:
    """Divided-difference bound at θ^0 = nodes[0] with M_i = Δ^i λ(θ^0)."""
    if pair.f.param_dim != 1:
        raise ValueError("bhattacharyya_dd needs a scalar parameter; use multiparam_dd_bound")
    ns = nodes if isinstance(nodes, NodeSet) else NodeSet(nodes, pair.f.param_domain[0])
    th0 = pair.f.check_theta(ns[0])
    native = [pair.g.check_theta(t) for t in ns]
    _check_nodes(pair, th0, native)
    trunc = _discrete_truncation(pair, native, truncation)
    fn, _, path = _lambda_source(pair, T)
    lam = fn if fn is not None else (lambda t: lambda_value(pair, T, t, trunc))
    M = numerics.divided_difference_values(np.array([lam(t) for t in ns]), ns.nodes)
    M = np.array([row[0] for row in M[1:]])
    scores = divided_difference_scores(pair, list(ns))
    return _assemble(method, pair, T, th0, scores, M, lambda_path=path, settings=settings, truncation=trunc,
                     breakpoints=_support_breaks(pair, native), order=ns.k, nodes=list(ns),
                     attain_tol=attain_tol)


def _search_box(pair, theta0, search: SearchSettings):
    lo_dom, hi_dom = pair.f.param_domain[0]
    if search.box is not None:
        lo, hi = search.box
    else:
        half = max(1.0, abs(theta0))
        lo, hi = theta0 - half, theta0 + half
    # keep a margin from an open domain edge
    if np.isfinite(lo_dom):
        lo = max(lo, lo_dom + 1e-3 * (theta0 - lo_dom))
    if np.isfinite(hi_dom):
        hi = min(hi, hi_dom - 1e-3 * (hi_dom - theta0))
    return lo, hi


def bhattacharyya_dd_sup(pair: EscortPair, T: Statistic, theta0, k: int = 1,
                         search: SearchSettings | None = None, *, settings=None, truncation=None,
                         attain_tol=None, method="bhatt-dd-sup") -> BoundReport:
    """Best divided-difference bound over k free nodes (grid, then Nelder-Mead).

    Any feasible node set gives a valid bound, so a partially converged
    search is still sound.
    """
    search = search or SearchSettings()
    theta0 = pair.f.check_theta(theta0)
    lo, hi = _search_box(pair, theta0, search)
    spacing = search.min_spacing * max(1.0, abs(theta0))
    evaluations = {"count": 0, "infeasible": 0}

    def evaluate(free):
        pts = [theta0, *[float(v) for v in free]]
        if any(not lo <= v <= hi for v in pts[1:]):
            return None
        if min(abs(a - b) for a, b in itertools.combinations(pts, 2)) < spacing:
            return None
        evaluations["count"] += 1
        try:
            return bhattacharyya_dd(pair, T, pts, settings=settings, truncation=truncation,
                                    attain_tol=attain_tol, method=method)
        except (NodeError, RegularityError, NotPositiveDefinite, QuadratureError, ValueError):
            evaluations["infeasible"] += 1
            return None

    offsets = np.geomspace(search.min_offset, 1.0, search.grid_points)
    side = [theta0 - (theta0 - lo) * offsets, theta0 + (hi - theta0) * offsets]
    candidates = np.concatenate(side)
    best = None
    for combo in itertools.combinations(sorted(candidates), k):
        rep = evaluate(combo)
        if rep is not None and (best is None or rep.bound > best[1].bound):
            best = (np.array(combo), rep)
    if best is None:
        raise SupportError(f"no feasible node placement for k={k} around theta0={theta0}")

    cache = {}

    def objective(z):
        key = tuple(np.round(z, 15))
        if key not in cache:
            rep = evaluate(z)
            cache[key] = rep
        rep = cache[key]
        return np.inf if rep is None else -rep.bound

    start = best[0]
    simplex = [start]
    for i in range(k):
        step = np.zeros(k)
        step[i] = 0.25 * max(min(abs(start[i] - theta0), hi - lo), spacing)
        cand = start + step if evaluate(start + step) is not None else start - step
        simplex.append(cand)
    res = optimize.minimize(objective, start, method="Nelder-Mead",
                            options={"initial_simplex": np.array(simplex), "maxiter": search.maxiter,
                                     "fatol": search.fatol, "xatol": 1e-10})
    final = best[1]
    for rep in cache.values():
        if rep is not None and rep.bound > final.bound:
            final = rep
    final.diagnostics["argmax_nodes"] = list(final.nodes)
    final.diagnostics["search"] = {"box": [lo, hi], "evaluations": evaluations["count"],
                                   "infeasible": evaluations["infeasible"], "simplex_iterations": int(res.nit)}
    return final


def hcr_bound(f: ModelSpec, T: Statistic, theta0, theta_prime=None, search: SearchSettings | None = None,
              **kw) -> BoundReport:
    """Hammersley-Chapman-Robbins bound: g = f, one perturbed node.

    With ``theta_prime`` given the quotient at that node is returned;
    otherwise the supremum over feasible nodes is searched.
    """
    pair = EscortPair.self_pair(f)
    if theta_prime is not None:
        return bhattacharyya_dd(pair, T, [theta0, theta_prime], method="hcr", **kw)
    return bhattacharyya_dd_sup(pair, T, theta0, 1, search, method="hcr", **kw)


def multiparam_bound(pair: EscortPair, T: Statistic, theta, k: int = 1, *, settings=None, truncation=None,
                     attain_tol=None, method="multi") -> BoundReport:
    """Mixed-partial bound over all multi-indices with 0 < |i| <= k."""
    th = pair.f.check_theta(theta)
    idx = multi_indices(pair.f.param_dim, k)
    trunc = _discrete_truncation(pair, [th], truncation)
    M, path = _lambda_partials(pair, T, th, idx, trunc)
    scores = mixed_partial_scores(pair, th, k)
    rep = _assemble(method, pair, T, th, scores, M, lambda_path=path, settings=settings, truncation=trunc,
                    breakpoints=_support_breaks(pair, [th]), order=k, attain_tol=attain_tol)
    rep.diagnostics["multi_indices"] = [list(a) for a in idx]
    return rep


def multiparam_dd_bound(pair: EscortPair, T: Statistic, theta0, nodes, *, settings=None, truncation=None,
                        attain_tol=None, method="multi-dd") -> BoundReport:
    """Per-coordinate divided-difference bound.

    ``nodes[c]`` lists extra values of coordinate ``c`` (0-based) after
    ``theta0[c]``; ``None`` or an empty list skips that coordinate.  Only
    one coordinate varies within each table.
    """
    th0 = np.atleast_1d(pair.f.check_theta(theta0)).astype(float)
    if len(nodes) != pair.f.param_dim:
        raise ValueError("need one node list (or None) per coordinate")
    fn, _, path = _lambda_source(pair, T)
    all_scores, labels, M, native_all, used_nodes = [], [], [], [], []
    trunc = truncation
    for c, extra in enumerate(nodes):
        if not extra:
            continue
        pts = []
        for v in [th0[c], *extra]:
            p = th0.copy()
            p[c] = v
            pts.append(p)
        NodeSet([p[c] for p in pts], pair.f.param_domain[c])
        native = [pair.g.check_theta(p if pair.f.param_dim > 1 else p[0]) for p in pts]
        _check_nodes(pair, native[0], native)
        native_all.extend(native)
        trunc = _discrete_truncation(pair, native, truncation) if truncation is None else truncation
        lam = fn if fn is not None else (lambda t: lambda_value(pair, T, t, trunc))
        table = numerics.multiparam_divided_difference(
            lambda p: lam(p if pair.f.param_dim > 1 else float(p[0])), pts, c)
        M.extend(table.values[j][0] for j in range(1, len(pts)))
        sc = divided_difference_scores(pair, native, coordinate=c)
        all_scores.extend(sc.scores)
        labels.extend(sc.labels)
        used_nodes.append([float(p[c]) for p in pts])
    if not all_scores:
        raise NodeError("no coordinate has extra nodes")
    scores = ScoreSet(tuple(all_scores), "escort-divided-difference", tuple(labels))
    th = th0 if pair.f.param_dim > 1 else float(th0[0])
    return _assemble(method, pair, T, th, scores, M, lambda_path=path, settings=settings, truncation=trunc,
                     breakpoints=_support_breaks(pair, native_all), order=max(len(n) - 1 for n in used_nodes),
                     nodes=used_nodes, attain_tol=attain_tol)


@dataclass
class SchurResult:
    """J = Σ_TS Σ_S^{-1} Σ_ST, Σ_T and the PSD certificate for Σ_T - J."""

    J: np.ndarray
    sigma_t: np.ndarray
    psd: bool
    failing_pivot: int | None
    min_pivot: float
    directions: list = field(default_factory=list)

    def direction_bound(self, alpha):
        a = np.asarray(alpha, dtype=float)
        return float(a @ self.J @ a), float(a @ self.sigma_t @ a)


def vector_schur_bound(pair: EscortPair, Ts: Sequence[Statistic], scores: ScoreSet | None, theta, *,
                       settings=None, truncation=None, alphas=(), psd_tol=1e-10) -> SchurResult:
    """Matrix inequality Σ_T ⪰ Σ_TS Σ_S^{-1} Σ_ST for a vector of statistics.

    ``scores`` defaults to the first-order escort scores.  The certificate
    factors Σ_T - J + psd_tol·max|Σ_T|·I; success means Σ_T - J is PSD up to
    that tolerance.
    """
    th = pair.f.check_theta(theta)
    scores = scores if scores is not None else mixed_partial_scores(pair, th, 1)
    trunc = _discrete_truncation(pair, [th], truncation)
    mom = _moments(pair.f, th, scores, list(Ts), settings, trunc, _support_breaks(pair, [th]))
    _check_zero_mean(mom, scores.labels)
    S, J = linalg.schur_complement(mom.cov_t, mom.cov_ts, mom.sigma)
    shift = psd_tol * max(np.max(np.abs(mom.cov_t)), 1e-300)
    try:
        L = linalg.cholesky(S + shift * np.eye(len(S)))
        psd, pivot, minp = True, None, float(np.min(np.diag(L)) ** 2)
    except NotPositiveDefinite as exc:
        psd, pivot, minp = False, exc.pivot, float("nan")
    out = SchurResult(J, mom.cov_t, psd, pivot, minp)
    for a in alphas:
        jb, var = out.direction_bound(a)
        out.directions.append({"alpha": list(map(float, a)), "bound": jb, "variance": var, "ok": var >= jb - psd_tol * abs(var)})
    return out


def variance_of(T: Statistic, m: ModelSpec, theta, settings=None, truncation=None, detailed=False):
    """Var_f(T) by quadrature; raises QuadratureError if the second moment does not converge."""
    th = m.check_theta(theta)

    def integrand(x):
        t = T(x)
        return np.array([t, t * t]) * m.density(x, th)

    try:
        res = numerics.integrate_detailed(integrand, m.support, th, settings, truncation=truncation)
    except QuadratureError as exc:
        raise QuadratureError(f"second moment of {T.name} appears divergent: {exc}") from exc
    mean, second = res.value
    var = float(second - mean * mean)
    if detailed:
        return var, {"quad_error": res.error, "truncation": res.truncation, "mean": float(mean)}
    return var


def report_with(report: BoundReport, **changes) -> BoundReport:
    return replace(report, **changes)


__all__ = [
    "BoundReport", "ScoreSet", "SearchSettings", "SchurResult", "generalized_fisher", "naudts_bound",
    "bhattacharyya_regular", "bhattacharyya_dd", "bhattacharyya_dd_sup", "hcr_bound", "classical_cr",
    "multiparam_bound", "multiparam_dd_bound", "vector_schur_bound", "variance_of", "lambda_value",
    "multi_indices", "escort_derivative_scores", "mixed_partial_scores", "divided_difference_scores",
]
