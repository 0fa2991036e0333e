"""Command-line interface: ``escortbounds <command> ...``.

Exit status is 0 on success, 1 when a computation fails (or a suite
reports failures) and 2 for invalid configuration.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import __version__, bounds, catalog, escort, verify
from .errors import (CatalogError, DomainError, EscortBoundsError, NodeError, NotPositiveDefinite,
                     QuadratureError, RegularityError, SupportError, SynthesisError)
from .model import EscortPair
from .numerics import QuadratureSettings

METHODS = ("naudts", "bhatt", "bhatt-dd", "bhatt-dd-sup", "hcr", "cr", "multi", "multi-dd", "schur")
BASE_COLUMNS = ("bound", "variance", "gap", "attained")


class ConfigError(Exception):
    """Invalid command-line configuration (exit status 2)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _clean(v):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v) if math.isfinite(v) else None
    return v


def emit_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=False, allow_nan=False) + "\n"


def _num(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    if isinstance(v, (list, tuple, dict)):
        return json.dumps(_clean(v), separators=(",", ":"))
    return str(v)


def emit_csv(rows, theta_dim=1) -> str:
    """theta column(s), bound, variance, gap, attained, diagnostics (alphabetical), error."""
    theta_cols = ["theta"] if theta_dim == 1 else [f"theta{i + 1}" for i in range(theta_dim)]
    diag_keys = sorted({k for r in rows if r.get("report") for k in r["report"].diagnostics})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(theta_cols + list(BASE_COLUMNS) + diag_keys + ["error"])
    for r in rows:
        rep = r.get("report")
        theta = list(np.atleast_1d(r["theta"]))
        if rep is None:
            w.writerow([_num(t) for t in theta] + [""] * (len(BASE_COLUMNS) + len(diag_keys)) + [r["error"]])
            continue
        d = rep.to_dict()
        w.writerow([_num(t) for t in theta] + [_num(d[c]) for c in BASE_COLUMNS]
                   + [_num(rep.diagnostics.get(k)) for k in diag_keys] + [""])
    return buf.getvalue()


def emit_pretty(obj, indent=0) -> str:
    pad = "  " * indent
    lines = []
    if isinstance(obj, dict):
        for k, v in obj.items():
            if (isinstance(v, dict) and v) or (isinstance(v, list) and v and not all(
                    isinstance(x, (int, float, str)) or x is None for x in v)):
                lines.append(f"{pad}{k}:")
                lines.append(emit_pretty(v, indent + 1).rstrip("\n"))
            else:
                lines.append(f"{pad}{k}: {_pretty_value(v)}")
    elif isinstance(obj, list):
        for item in obj:
            lines.append(f"{pad}-")
            lines.append(emit_pretty(item, indent + 1).rstrip("\n"))
    else:
        lines.append(f"{pad}{_pretty_value(obj)}")
    return "\n".join(lines) + "\n"


def _pretty_value(v):
    v = _clean(v)
    if isinstance(v, float):
        return f"{v:.10g}"
    if isinstance(v, list):
        return "[" + ", ".join(_pretty_value(x) for x in v) + "]"
    return "null" if v is None else str(v)


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_common(p, output_default="json"):
    p.add_argument("--output", choices=("json", "csv", "pretty"), default=output_default)
    p.add_argument("--out", metavar="FILE", help="write output to FILE instead of standard output")


def _add_model(p):
    p.add_argument("--model", required=True, help="catalog entry name (see list-models)")
    p.add_argument("--hyper", nargs="*", default=[], metavar="KEY=VALUE")


def _add_quadrature(p):
    p.add_argument("--abs-tol", type=float)
    p.add_argument("--rel-tol", type=float)
    p.add_argument("--max-subdivisions", type=int)
    p.add_argument("--scheme", choices=("adaptive", "fixed-composite"))
    p.add_argument("--truncation", type=int, help="lattice truncation index for discrete models")


def _add_bound_args(p):
    _add_model(p)
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--order", type=int, default=1)
    p.add_argument("--nodes", nargs="*", type=float, default=[],
                   help="extra parameter nodes after theta (divided-difference methods)")
    p.add_argument("--pair", choices=("escort", "self"), default="escort",
                   help="use the catalog escort g or g = f")
    p.add_argument("--attain-tol", type=float)
    p.add_argument("--seed", type=int, default=0, help="accepted for reproducible configs; unused by bounds")
    _add_quadrature(p)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="escortbounds", description="Generalized information inequalities with escort densities.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("list-models", help="catalog names with hyperparameter signatures")
    _add_common(p, "pretty")

    p = sub.add_parser("bound", help="one bound report at one parameter point")
    _add_bound_args(p)
    p.add_argument("--theta", required=True, type=float)
    _add_common(p)

    p = sub.add_parser("sweep", help="one CSV row per parameter value")
    _add_bound_args(p)
    p.add_argument("--theta", nargs="*", type=float, default=[])
    _add_common(p, "csv")

    p = sub.add_parser("synth", help="synthesize a location or scale escort for a catalog entry")
    _add_model(p)
    p.add_argument("--kind", choices=("location", "scale"), required=True)
    p.add_argument("--theta", type=float, required=True, help="base parameter of the construction")
    p.add_argument("--grid-points", type=int, default=4097)
    _add_common(p, "csv")

    p = sub.add_parser("verify", help="attainment claims (and optionally Monte Carlo checks) for an entry")
    _add_model(p)
    p.add_argument("--theta", nargs="*", type=float)
    p.add_argument("--mc", action="store_true", help="also cross-check expectations by Monte Carlo")
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=20240101)
    _add_common(p)

    p = sub.add_parser("reduce", help="reduction-chain, clustered-node and nesting checks")
    p.add_argument("--theta", type=float, default=1.0)
    _add_common(p)
    return parser


def _settings(args):
    kw = {k: getattr(args, k) for k in ("abs_tol", "rel_tol", "max_subdivisions", "scheme")
          if getattr(args, k, None) is not None}
    try:
        return QuadratureSettings(**kw) if kw else None
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _entry(args):
    return catalog.catalog_lookup(args.model, catalog.parse_hyper(args.hyper))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _schur_report(entry, pair, theta, settings, truncation):
    res = bounds.vector_schur_bound(pair, [entry.statistic], None, theta, settings=settings, truncation=truncation)
    J, var = float(res.J[0, 0]), float(res.sigma_t[0, 0])
    gap = var - J
    return bounds.BoundReport(
        method="schur", theta=[float(theta)], bound=J, variance=var, gap=gap,
        attained=bool(gap / max(var, 1e-300) <= bounds.CLOSED_FORM_TOL), model=entry.name,
        diagnostics={"argmax_nodes": None, "equality_correlation": None, "psd_certificate": res.psd,
                     "quad_error": None, "sigma_condition": None, "truncation": truncation})


def compute_report(entry, args, theta) -> bounds.BoundReport:
    settings = _settings(args)
    kw = {"settings": settings}
    if args.truncation is not None:
        kw["truncation"] = args.truncation
    elif entry.f.is_discrete:
        kw["truncation"] = 60
    if args.attain_tol is not None and args.method != "schur":
        kw["attain_tol"] = args.attain_tol
    if args.order < 1:
        raise ConfigError("--order must be >= 1")
    self_pair = args.pair == "self"
    pair = EscortPair.self_pair(entry.f) if self_pair else entry.escort
    method = args.method
    nodes = list(args.nodes)
    if method in ("bhatt-dd", "multi-dd") and not nodes:
        raise ConfigError(f"--method {method} needs --nodes")
    if method == "schur":
        rep = _schur_report(entry, pair, theta, settings, kw.get("truncation"))
    elif method == "multi-dd":
        rep = bounds.multiparam_dd_bound(pair, entry.statistic, theta, [nodes], **kw)
    elif method == "bhatt-dd-sup":
        rep = bounds.bhattacharyya_dd_sup(pair, entry.statistic, theta, args.order, **kw)
    else:
        rep = verify.run_method(entry, method, theta, args.order, [theta, *nodes] if nodes else None,
                                self_pair=self_pair, **kw)
    rep.model = entry.name
    rep.hyper = dict(entry.hyper)
    rep.versions = {"schema": bounds.SCHEMA_VERSION, "catalog": catalog.CATALOG_VERSION}
    return rep


def cmd_list_models(args):
    rows = [{"name": n, "hyper": sig, "defaults": d} for n, (sig, d) in catalog.SIGNATURES.items()]
    if args.output == "json":
        return emit_json(rows), 0
    if args.output == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["name", "hyper"])
        for r in rows:
            w.writerow([r["name"], r["hyper"]])
        return buf.getvalue(), 0
    width = max(len(r["name"]) for r in rows)
    return "".join(f"{r['name']:<{width}}  {r['hyper']}\n" for r in rows), 0


def cmd_bound(args):
    entry = _entry(args)
    rep = compute_report(entry, args, args.theta)
    if args.output == "csv":
        return emit_csv([{"theta": args.theta, "report": rep}]), 0
    if args.output == "pretty":
        return emit_pretty(rep.to_dict()), 0
    return emit_json(rep.to_dict()), 0


def cmd_sweep(args):
    entry = _entry(args)
    rows, failed = [], False
    for th in args.theta:
        try:
            rows.append({"theta": th, "report": compute_report(entry, args, th)})
        except (EscortBoundsError, ValueError) as exc:
            if isinstance(exc, (CatalogError, ConfigError)):
                raise
            failed = True
            rows.append({"theta": th, "report": None, "error": f"{type(exc).__name__}: {exc}"})
    if args.output == "csv":
        text = emit_csv(rows)
    else:
        payload = [r["report"].to_dict() if r["report"] else {"theta": [r["theta"]], "error": r["error"]}
                   for r in rows]
        text = emit_json(payload) if args.output == "json" else emit_pretty(payload)
    return text, 1 if failed else 0


def cmd_synth(args):
    entry = _entry(args)
    th = entry.f.check_theta(args.theta)
    lo, hi = entry.f.support.bounds(th) if not entry.f.is_discrete else (None, None)
    if lo is None:
        raise ConfigError("synthesis needs a continuous model")
    T = entry.statistic
    fn = lambda x: entry.f.density(x, th)
    target = T.target(th)
    if args.kind == "location":
        s = escort.synth_location(fn, T, target, (lo, hi), n_grid=args.grid_points, base_name=entry.name)
    else:
        s = escort.synth_scale(fn, T, target, (lo, hi), n_grid=args.grid_points, base_name=entry.name)
    if args.output == "csv":
        return s.to_csv(), 0
    grid = s.grid[(s.grid > s.grid[0]) & (s.grid < s.grid[-1])]
    summary = {"model": entry.name, "hyper": dict(entry.hyper), "kind": args.kind, "theta": float(th),
               "normalizer": s.normalizer, "grid_points": int(s.grid.size),
               "sup_diff_vs_catalog_g": float(np.max(np.abs(s.g(grid) - entry.g.density(grid, th)))),
               "diagnostics": s.diagnostics}
    return (emit_json(summary) if args.output == "json" else emit_pretty(summary)), 0


def cmd_verify(args):
    entry = _entry(args)
    thetas = args.theta if args.theta else list(entry.reference_thetas)
    suite = verify.attainment_suite(entry, thetas)
    out = {"model": entry.name, "hyper": dict(entry.hyper), "passed": suite.passed,
           "rows": [{k: v for k, v in r.items() if k != "report"} | {"bound": r["report"].bound if r["report"] else None}
                    for r in suite.rows]}
    ok = suite.passed
    if args.mc:
        s = verify.McSettings(args.samples, args.seed)
        mc = verify.catalog_mc_checks(entry.name, thetas[0], s, dict(entry.hyper))
        out["mc"] = mc
        ok = ok and all(c["passed"] for c in mc)
        out["passed"] = ok
    if args.output == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "order", "self_pair", "theta", "expected", "attained", "ok", "bound"])
        for r in out["rows"]:
            w.writerow([_num(r[k]) for k in ("method", "order", "self_pair", "theta", "expected", "attained", "ok", "bound")])
        text = buf.getvalue()
    else:
        text = emit_json(out) if args.output == "json" else emit_pretty(out)
    return text, 0 if ok else 1


def cmd_reduce(args):
    res = verify.reduction_suite(args.theta)
    if args.output == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["name", "value", "tol", "passed"])
        for c in res["checks"]:
            w.writerow([c["name"], _num(c["value"]), _num(c["tol"]), _num(c["passed"])])
        text = buf.getvalue()
    else:
        text = emit_json(res) if args.output == "json" else emit_pretty(res)
    return text, 0 if res["passed"] else 1


COMMANDS = {"list-models": cmd_list_models, "bound": cmd_bound, "sweep": cmd_sweep, "synth": cmd_synth,
            "verify": cmd_verify, "reduce": cmd_reduce}


def run(argv=None, stdout=None, stderr=None) -> int:
    """Parse ``argv``, execute, write output; returns the exit status."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        text, status = COMMANDS[args.command](args)
    except (ConfigError, CatalogError) as exc:
        print(f"escortbounds: configuration error: {exc}", file=stderr)
        return 2
    except SupportError as exc:
        print(f"escortbounds: computation failed: {exc}", file=stderr)
        return 1
    except (DomainError, NodeError) as exc:
        print(f"escortbounds: configuration error: {exc}", file=stderr)
        return 2
    except (QuadratureError, NotPositiveDefinite, RegularityError, SynthesisError, EscortBoundsError,
            NotImplementedError, ValueError, ArithmeticError) as exc:
        print(f"escortbounds: computation failed: {type(exc).__name__}: {exc}", file=stderr)
        return 1
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    return status


def main():  # pragma: no cover - console entry point
    sys.exit(run())
