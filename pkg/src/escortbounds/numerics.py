"""Quadrature, numerical differentiation and divided differences.

The integrator is a vectorized adaptive Gauss-Kronrod (7/15) scheme.  All
panels of a refinement round are evaluated in a single call of the
integrand, and the integrand may be vector valued (shape ``(c, m)`` for
``m`` abscissae), so every entry of a covariance matrix can be computed in
one adaptive pass.  Infinite endpoints are mapped to finite ones by the
rational transform ``x = a + s t / (1 - t)``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from math import comb
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, NodeError, QuadratureError

__all__ = [
    "QuadratureSettings",
    "QuadResult",
    "integrate",
    "integrate_detailed",
    "integrate_interval",
    "derivative",
    "NodeSet",
    "DividedDifferenceTable",
    "divided_difference",
    "divided_difference_values",
    "lagrange_divided_difference",
    "multiparam_divided_difference",
    "bell_ratios",
    "leibniz",
]

_EPS = np.finfo(float).eps

# Gauss-Kronrod 15-point abscissae/weights (QUADPACK qk15); G7 uses the odd nodes.
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

GK_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
GK_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
_G_WEIGHTS = np.zeros(15)
_G_WEIGHTS[[1, 3, 5, 7, 9, 11, 13]] = np.concatenate([_WG[:-1], _WG[::-1]])


def _env_float(name, default):
    value = os.environ.get(name)
    return float(value) if value else default


@dataclass(frozen=True)
class QuadratureSettings:
    """Tolerances for :func:`integrate`.

    Defaults can be overridden with the ``ESCORTBOUNDS_ABS_TOL`` and
    ``ESCORTBOUNDS_REL_TOL`` environment variables.
    """

    abs_tol: float = field(default_factory=lambda: _env_float("ESCORTBOUNDS_ABS_TOL", 1e-10))
    rel_tol: float = field(default_factory=lambda: _env_float("ESCORTBOUNDS_REL_TOL", 1e-9))
    max_subdivisions: int = 2000
    scheme: str = "adaptive"

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("abs_tol and rel_tol must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")
        if self.scheme not in ("adaptive", "fixed-composite"):
            raise ValueError(f"unknown quadrature scheme {self.scheme!r}")


DEFAULT_SETTINGS = QuadratureSettings()


@dataclass(frozen=True)
class QuadResult:
    value: np.ndarray | float
    error: float
    panels: int = 0
    truncation: int | None = None


# ---------------------------------------------------------------------------
# one-dimensional adaptive quadrature
# ---------------------------------------------------------------------------


def _segment_map(a, b, scale):
    """Return (t0, t1, x_of_t, dxdt) mapping a finite t-interval onto [a, b]."""
    if np.isfinite(a) and np.isfinite(b):
        return a, b, (lambda t: t), (lambda t: np.ones_like(t))
    if np.isfinite(a):
        return (0.0, 1.0,
                lambda t: a + scale * t / (1.0 - t),
                lambda t: scale / (1.0 - t) ** 2)
    if np.isfinite(b):
        return (0.0, 1.0,
                lambda t: b - scale * t / (1.0 - t),
                lambda t: scale / (1.0 - t) ** 2)
    raise ValueError("doubly infinite segment must be split first")


def _gk_panels(fn, x_of_t, dxdt, lo, hi, ncomp):
    """Apply G7/K15 to every panel [lo_i, hi_i] at once."""
    center = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    t = center[:, None] + half[:, None] * GK_NODES[None, :]
    x = x_of_t(t)
    jac = dxdt(t)
    with np.errstate(invalid="ignore", over="ignore"):
        y = np.asarray(fn(x.ravel()), dtype=float)
    y = y.reshape((ncomp,) + t.shape) if ncomp else y.reshape(t.shape)[None]
    y = y * jac[None]
    if not np.all(np.isfinite(y)):
        raise QuadratureError("non-finite integrand value encountered")
    k15 = np.einsum("cpn,n->pc", y, GK_WEIGHTS) * half[:, None]
    g7 = np.einsum("cpn,n->pc", y, _G_WEIGHTS) * half[:, None]
    resabs = np.einsum("cpn,n->pc", np.abs(y), GK_WEIGHTS) * half[:, None]
    mean = k15 / (2.0 * half[:, None])
    resasc = np.einsum("cpn,n->pc", np.abs(y - mean.T[:, :, None]), GK_WEIGHTS) * half[:, None]
    # QUADPACK error heuristic, including the roundoff floor
    diff = np.abs(k15 - g7)
    with np.errstate(divide="ignore", invalid="ignore"):
        err = np.where(resasc > 0,
                       resasc * np.minimum(1.0, (200.0 * diff / np.where(resasc > 0, resasc, 1.0)) ** 1.5),
                       diff)
    err = np.maximum(err, 50.0 * _EPS * resabs)
    return k15, err, resabs


def integrate_interval(fn, lower, upper, *, breakpoints=(), scale=1.0,
                       settings: QuadratureSettings | None = None, ncomp=None) -> QuadResult:
    """Integrate ``fn`` over ``[lower, upper]`` (endpoints may be infinite).

    ``fn`` receives a 1-D array of abscissae and returns an array of shape
    ``(m,)`` or ``(c, m)``.  ``breakpoints`` interior to the interval are
    honoured: no panel straddles one.
    """
    settings = settings or DEFAULT_SETTINGS
    lower, upper = float(lower), float(upper)
    if not lower < upper:
        if lower == upper:
            probe = np.asarray(fn(np.array([lower if np.isfinite(lower) else 0.0])), dtype=float)
            shape = probe.shape[:-1]
            return QuadResult(np.zeros(shape) if shape else 0.0, 0.0)
        raise ValueError(f"empty interval [{lower}, {upper}]")
    cuts = sorted({float(p) for p in breakpoints if lower < p < upper})
    if not np.isfinite(lower) and not np.isfinite(upper) and not cuts:
        cuts = [0.0]
    edges = [lower, *cuts, upper]
    if ncomp is None:
        probe_x = next((e for e in edges if np.isfinite(e)), 0.0)
        probe = np.asarray(fn(np.array([probe_x, probe_x])), dtype=float)
        ncomp = probe.shape[0] if probe.ndim == 2 else 0
    width = max(ncomp, 1)

    # Each segment has its own coordinate map; panels are grouped by segment.
    seg_maps = [_segment_map(a, b, scale) for a, b in zip(edges[:-1], edges[1:])]
    seg_lo = [np.array([m[0]]) for m in seg_maps]
    seg_hi = [np.array([m[1]]) for m in seg_maps]
    seg_val = [None] * len(seg_maps)
    seg_err = [None] * len(seg_maps)
    seg_abs = [None] * len(seg_maps)
    fresh = [np.ones(1, bool) for _ in seg_maps]

    rounds = 0
    while True:
        for s, (_, _, x_of_t, dxdt) in enumerate(seg_maps):
            idx = np.flatnonzero(fresh[s])
            if idx.size == 0:
                continue
            v, e, ra = _gk_panels(fn, x_of_t, dxdt, seg_lo[s][idx], seg_hi[s][idx], ncomp)
            if seg_val[s] is None:
                seg_val[s], seg_err[s], seg_abs[s] = v, e, ra
            else:
                seg_val[s][idx], seg_err[s][idx], seg_abs[s][idx] = v, e, ra
            fresh[s][:] = False
        total = sum(v.sum(axis=0) for v in seg_val)
        err = sum(e.sum(axis=0) for e in seg_err)
        absint = sum(a.sum(axis=0) for a in seg_abs)
        target = np.maximum(np.maximum(settings.abs_tol, settings.rel_tol * np.abs(total)),
                            100.0 * _EPS * absint)
        npanels = sum(len(lo) for lo in seg_lo)
        if np.all(err <= target):
            break
        if npanels >= settings.max_subdivisions:
            raise QuadratureError(
                f"no convergence after {npanels} panels (error {err.max():.3g} > {target.min():.3g})")
        scaled = [np.max(e / target, axis=1) for e in seg_err]
        share = 1.0 / npanels
        worst = max(s.max() for s in scaled)
        for s, sc in enumerate(scaled):
            split = (sc > share) & (sc >= 1e-3 * worst)
            if not split.any():
                continue
            lo, hi = seg_lo[s], seg_hi[s]
            mid = 0.5 * (lo[split] + hi[split])
            if np.any(mid <= lo[split]) or np.any(mid >= hi[split]):
                raise QuadratureError("panel width underflow")
            keep_hi = hi.copy()
            keep_hi[split] = mid
            seg_lo[s] = np.concatenate([lo, mid])
            seg_hi[s] = np.concatenate([keep_hi, hi[split]])
            seg_val[s] = np.concatenate([seg_val[s], np.zeros((split.sum(), width))])
            seg_err[s] = np.concatenate([seg_err[s], np.zeros((split.sum(), width))])
            seg_abs[s] = np.concatenate([seg_abs[s], np.zeros((split.sum(), width))])
            fresh[s] = np.concatenate([split, np.ones(split.sum(), bool)])
        rounds += 1

    value = total if ncomp else float(total[0])
    return QuadResult(value, float(err.max()), npanels)


def _lattice_sum(fn, points, ncomp=None):
    with np.errstate(invalid="ignore", over="ignore"):
        y = np.asarray(fn(points), dtype=float)
    if not np.all(np.isfinite(y)):
        raise QuadratureError("non-finite summand encountered")
    s = y.sum(axis=-1)
    return s if y.ndim == 2 else float(s)


def _product_integral(fn, supports, theta, settings):
    """Tensor-product composite GK15 over a box, doubling panels until stable."""
    maps = []
    for sup in supports:
        lo, hi = sup.bounds(theta)
        cuts = [] if (np.isfinite(lo) or np.isfinite(hi)) else [0.0]
        edges = [lo, *cuts, hi]
        maps.append([_segment_map(a, b, sup.scale_at(theta)) for a, b in zip(edges[:-1], edges[1:])])

    def rule(panels):
        nodes, weights = [], []
        for segs in maps:
            xs, ws = [], []
            for t0, t1, x_of_t, dxdt in segs:
                grid = np.linspace(t0, t1, panels + 1)
                c = 0.5 * (grid[:-1] + grid[1:])
                h = 0.5 * (grid[1:] - grid[:-1])
                t = (c[:, None] + h[:, None] * GK_NODES[None, :]).ravel()
                w = (h[:, None] * GK_WEIGHTS[None, :]).ravel()
                xs.append(x_of_t(t))
                ws.append(w * dxdt(t))
            nodes.append(np.concatenate(xs))
            weights.append(np.concatenate(ws))
        mesh = np.meshgrid(*nodes, indexing="ij")
        wmesh = np.ones_like(mesh[0])
        for k, w in enumerate(weights):
            shape = [1] * len(weights)
            shape[k] = -1
            wmesh = wmesh * w.reshape(shape)
        x = np.stack([m.ravel() for m in mesh])
        with np.errstate(invalid="ignore", over="ignore"):
            y = np.asarray(fn(x), dtype=float)
        if not np.all(np.isfinite(y)):
            raise QuadratureError("non-finite integrand value encountered")
        return (y * wmesh.ravel()).sum(axis=-1)

    panels = 2
    prev = rule(panels)
    while True:
        panels *= 2
        cur = rule(panels)
        err = np.max(np.abs(cur - prev))
        target = np.max(np.maximum(settings.abs_tol, settings.rel_tol * np.abs(cur)))
        if err <= target:
            return QuadResult(cur if np.ndim(cur) else float(cur), float(err), panels)
        if panels ** len(supports) * 15 ** len(supports) > 4e6 or panels > settings.max_subdivisions:
            raise QuadratureError(f"product quadrature did not converge (error {err:.3g})")
        prev = cur


def integrate_detailed(fn, support, theta, settings: QuadratureSettings | None = None, *,
                       breakpoints=(), truncation=None) -> QuadResult:
    """Integrate (or sum) ``fn`` over ``support`` evaluated at ``theta``.

    ``support`` is a :class:`~escortbounds.model.Support` (or a
    :class:`~escortbounds.model.ProductSupport`).  For discrete supports the
    lattice is truncated by the support's tail rule unless ``truncation``
    overrides it.
    """
    settings = settings or DEFAULT_SETTINGS
    if getattr(support, "kind", None) == "product":
        return _product_integral(fn, support.parts, theta, settings)
    if support.kind == "discrete":
        points, last = support.lattice(theta, truncation)
        return QuadResult(_lattice_sum(fn, points), 0.0, 0, last)
    lo, hi = support.bounds(theta)
    bps = list(support.breakpoints_at(theta)) + list(breakpoints)
    return integrate_interval(fn, lo, hi, breakpoints=bps, scale=support.scale_at(theta),
                              settings=settings)


def integrate(fn, support, theta, settings: QuadratureSettings | None = None, **kw):
    """Integral (or lattice sum) of ``fn`` over ``support(theta)``."""
    return integrate_detailed(fn, support, theta, settings, **kw).value


# ---------------------------------------------------------------------------
# numerical differentiation
# ---------------------------------------------------------------------------

# symmetric, second-order accurate stencils: offsets and weights per order
_STENCILS = {
    1: (np.array([-1.0, 1.0]), np.array([-0.5, 0.5])),
    2: (np.array([-1.0, 0.0, 1.0]), np.array([1.0, -2.0, 1.0])),
    3: (np.array([-2.0, -1.0, 1.0, 2.0]), np.array([-0.5, 1.0, -1.0, 0.5])),
    4: (np.array([-2.0, -1.0, 0.0, 1.0, 2.0]), np.array([1.0, -4.0, 6.0, -4.0, 1.0])),
}


def default_step(theta, order=1):
    """Base step for :func:`derivative`.

    Order 1 uses ``max(1e-4, 1e-4 |theta|)``; higher orders widen the step
    to ``eps**(1/(order+4)) * max(1, |theta|)`` so roundoff stays bounded.
    """
    if order == 1:
        return max(1e-4, 1e-4 * abs(theta))
    return _EPS ** (1.0 / (order + 4)) * max(1.0, abs(theta))


def derivative(fn: Callable[[float], float], theta: float, order: int = 1, step: float | None = None,
               domain: tuple[float, float] | None = None) -> tuple[float, float]:
    """Central-difference derivative with one level of Richardson extrapolation.

    Returns
    -------
    (value, error_estimate)
    """
    if order not in _STENCILS:
        raise ValueError("order must be in 1..4")
    theta = float(theta)
    h = default_step(theta, order) if step is None else float(step)
    if not h > 0 or theta + h == theta:
        raise DomainError(f"step {h!r} underflows at theta={theta!r}")
    offsets, weights = _STENCILS[order]
    reach = 2.0 * h * np.max(np.abs(offsets))
    if domain is not None:
        lo, hi = domain
        if not (lo < theta - reach and theta + reach < hi):
            raise DomainError(f"stencil theta +/- {reach:g} leaves the domain ({lo}, {hi})")

    def central(step_):
        vals = [fn(theta + o * step_) for o in offsets]
        return sum(w * v for w, v in zip(weights, vals)) / step_ ** order

    d1 = central(h)
    d2 = central(2.0 * h)
    value = (4.0 * d1 - d2) / 3.0
    return value, abs(d1 - d2) / 3.0


# ---------------------------------------------------------------------------
# divided differences
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NodeSet:
    """Ordered distinct parameter nodes theta^0, ..., theta^k (k >= 1)."""

    nodes: tuple

    def __init__(self, nodes, domain=None):
        arr = tuple(float(v) for v in nodes)
        if len(arr) < 2:
            raise NodeError("a node set needs at least two nodes")
        if len(set(arr)) != len(arr):
            raise NodeError(f"duplicate nodes in {arr}")
        if domain is not None:
            lo, hi = domain
            bad = [v for v in arr if not lo < v < hi]
            if bad:
                raise NodeError(f"nodes {bad} outside the parameter domain ({lo}, {hi})")
        object.__setattr__(self, "nodes", arr)

    @property
    def k(self):
        return len(self.nodes) - 1

    def __iter__(self):
        return iter(self.nodes)

    def __len__(self):
        return len(self.nodes)

    def __getitem__(self, i):
        return self.nodes[i]


@dataclass(frozen=True)
class DividedDifferenceTable:
    """Triangular table; ``values[j][nu]`` is the j-th difference at theta^nu.

    Row 0 holds the function values, row j has ``k + 1 - j`` entries.
    """

    nodes: NodeSet
    values: tuple
    base: str = ""

    def leading(self, j):
        """The j-th divided difference anchored at theta^0."""
        return self.values[j][0]


def divided_difference_values(values, nodes) -> list:
    """Recursive divided-difference table from precomputed values.

    ``values`` has shape ``(k+1, ...)``; trailing axes are carried along so a
    whole x-grid of densities can be differenced at once.
    """
    t = np.asarray(nodes, dtype=float)
    rows = [np.asarray(values, dtype=float)]
    for j in range(1, len(t)):
        prev = rows[-1]
        denom = (t[j:] - t[:-j]).reshape((-1,) + (1,) * (prev.ndim - 1))
        rows.append((prev[1:] - prev[:-1]) / denom)
    return rows


def divided_difference(h: Callable, nodes: NodeSet | Sequence[float], base: str = "") -> DividedDifferenceTable:
    """Full divided-difference table of ``h`` over ``nodes``."""
    ns = nodes if isinstance(nodes, NodeSet) else NodeSet(nodes)
    vals = np.array([h(t) for t in ns])
    rows = divided_difference_values(vals, ns.nodes)
    return DividedDifferenceTable(ns, tuple(tuple(r) for r in rows), base or getattr(h, "__name__", ""))


def lagrange_divided_difference(values, nodes, order):
    """Closed (Lagrange) form sum_j h(t_j) / prod_{l != j}(t_j - t_l) over nodes 0..order."""
    t = np.asarray(nodes, dtype=float)[: order + 1]
    vals = np.asarray(values, dtype=float)[: order + 1]
    total = np.zeros(vals.shape[1:])
    for j in range(order + 1):
        denom = np.prod([t[j] - t[l] for l in range(order + 1) if l != j])
        total = total + vals[j] / denom
    return total


def multiparam_divided_difference(h: Callable, nodes: Sequence[Sequence[float]], coordinate: int) -> DividedDifferenceTable:
    """Divided differences of ``h`` along one coordinate of a parameter vector.

    Only ``coordinate`` (0-based) varies between nodes; the remaining
    coordinates are frozen at their values in ``nodes[0]``.
    """
    pts = [np.asarray(p, dtype=float) for p in nodes]
    base = pts[0]
    coords = [p[coordinate] for p in pts]
    try:
        ns = NodeSet(coords)
    except NodeError as exc:
        raise NodeError(f"coincident values in coordinate {coordinate}: {coords}") from exc

    def along(c):
        p = base.copy()
        p[coordinate] = c
        return h(p)

    vals = np.array([along(c) for c in ns])
    rows = divided_difference_values(vals, ns.nodes)
    return DividedDifferenceTable(ns, tuple(tuple(r) for r in rows), getattr(h, "__name__", ""))


# ---------------------------------------------------------------------------
# derivative bookkeeping helpers for analytic parameter derivatives
# ---------------------------------------------------------------------------


def bell_ratios(logderivs):
    """Ratios f^(m)/f for m = 0..K from log-derivatives l', ..., l^(K).

    Uses the complete Bell polynomial recurrence
    ``B_{m+1} = sum_i C(m, i) B_{m-i} l^(i+1)``.
    """
    out = [np.ones_like(np.asarray(logderivs[0], dtype=float))] if logderivs else [np.array(1.0)]
    for m in range(len(logderivs)):
        out.append(sum(comb(m, i) * out[m - i] * logderivs[i] for i in range(m + 1)))
    return out


def leibniz(a_derivs, b_derivs, order):
    """The ``order``-th derivative of a product from the derivative lists of its factors."""
    return sum(comb(order, i) * a_derivs[i] * b_derivs[order - i] for i in range(order + 1))
