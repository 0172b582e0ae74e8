"""Command-line front end.

JSON goes to stdout, a short human-readable table to stderr.

Exit codes: 0 success, 1 check failed / inconclusive, 2 configuration error,
3 domain or precondition error, 4 nonconvergence or ill-conditioning.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .corpus import builtin_corpus
from .dirset import DirectionSet, make_direction_set, parse_set
from .errors import (
    ConditioningError,
    DomainError,
    ExpressionSyntaxError,
    NonconvergenceError,
    OrientedError,
    PreconditionError,
    UnsupportedOperationError,
)
from .extrema import classify_critical_point
from .fields import ScalarField, load_field, load_vector_field
from .laws import (
    check_chain_rule,
    check_decomposition,
    check_increment_identity,
    check_product_rule,
    check_schwarz,
    mean_value_integral,
    taylor_expand,
)
from .odiff import (
    CONSISTENT,
    StepSchedule,
    directional_derivative_plus,
    higher_derivative,
    oriented_gradient,
    oriented_hessian,
)
from .quadrature import Quadrature
from .report import to_jsonable
from .span import orthosum

SEED_ENV = "ORIENTED_SEED"
EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_DOMAIN, EXIT_NUMERIC = 0, 1, 2, 3, 4


class ConfigError(Exception):
    pass


def exit_code_for(exc) -> int:
    if isinstance(exc, (DomainError, PreconditionError, UnsupportedOperationError)):
        return EXIT_DOMAIN
    if isinstance(exc, (NonconvergenceError, ConditioningError)):
        return EXIT_NUMERIC
    if isinstance(exc, (ConfigError, ExpressionSyntaxError, KeyError, ValueError, TypeError,
                        json.JSONDecodeError, OSError)):
        return EXIT_CONFIG
    return EXIT_CONFIG if not isinstance(exc, OrientedError) else EXIT_DOMAIN


def _error_record(exc):
    rec = {"type": type(exc).__name__, "message": str(exc)}
    for attr in ("point", "details", "trace", "condition", "position"):
        if hasattr(exc, attr):
            rec[attr] = getattr(exc, attr)
    return to_jsonable(rec)


# --- parsing helpers --------------------------------------------------------

def parse_vector(text):
    try:
        return np.array([float(v) for v in str(text).split(",") if v.strip()], dtype=float)
    except ValueError as e:
        raise ConfigError(f"cannot parse vector {text!r}") from e


def build_set(spec, dim) -> DirectionSet:
    if isinstance(spec, DirectionSet):
        return spec
    if isinstance(spec, dict):
        return make_direction_set(spec, dim)
    text = str(spec).strip()
    if text.startswith("{"):
        return make_direction_set(text, dim)
    return parse_set(text, dim)


def build_field(expr=None, builtin=None, field_file=None, domain=None, dim=None) -> ScalarField:
    given = [v is not None for v in (expr, builtin, field_file)]
    if sum(given) != 1:
        raise ConfigError("give exactly one of --expr, --builtin, --field")
    if expr is not None:
        if dim is None:
            raise ConfigError("dimension unknown: pass --at or --dim")
        return ScalarField.from_expression(expr, dim, domain=domain)
    if builtin is not None:
        return load_field(builtin)
    if not os.path.exists(field_file):
        raise ConfigError(f"field file not found: {field_file}")
    return load_field(field_file, dim)


def schedule_from(args) -> StepSchedule:
    base = StepSchedule()
    return StepSchedule(
        t0=args.t0 if args.t0 is not None else base.t0,
        factor=args.factor if args.factor is not None else base.factor,
        levels=args.levels if args.levels is not None else base.levels,
        richardson_order=(args.richardson_order if args.richardson_order is not None
                          else base.richardson_order),
    )


def default_seed():
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return 0
    try:
        return int(raw)
    except ValueError as e:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {raw!r}") from e


def _point_and_field(args):
    x = parse_vector(args.at) if args.at is not None else None
    dim = args.dim if args.dim is not None else (len(x) if x is not None else None)
    fld = build_field(args.expr, args.builtin, args.field, args.domain, dim)
    if x is None:
        ref = fld.reference.get("point")
        if ref is None:
            raise ConfigError("no point given (--at)")
        x = np.asarray(ref, dtype=float)
    if len(x) != fld.dim:
        raise ConfigError(f"point has dimension {len(x)}, field has {fld.dim}")
    S = build_set(args.set, fld.dim)
    return fld, x, S


def _config(args):
    keys = ("command", "expr", "builtin", "field", "domain", "at", "set", "dim", "dir", "order",
            "seed", "t0", "factor", "levels", "richardson_order", "samples", "batch", "jobs")
    return {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}


# --- commands ---------------------------------------------------------------

def cmd_grad(args):
    fld, x, S = _point_and_field(args)
    r = oriented_gradient(fld, x, S, schedule_from(args), args.samples, args.seed)
    result = {
        "gradient": r.g, "coords": r.coords, "basis": r.basis.O.T, "verdict": r.verdict,
        "slope": r.slope, "warning": r.verdict != CONSISTENT, "error_estimate": r.error_estimate,
        "skipped_probes": r.skipped_probes, "condition": r.condition,
        "residual_table": [{"radius": a, "fit_residual": b, "remainder": c}
                           for a, b, c in zip(r.radii, r.residuals, r.remainders)],
    }
    table = [f"gradient  {np.array2string(r.g, precision=10)}",
             f"verdict   {r.verdict} (slope {r.slope:.4g})"]
    if result["warning"]:
        table.append("warning   differentiability not supported by the remainder decay")
    return result, table, EXIT_OK


def cmd_hessian(args):
    fld, x, S = _point_and_field(args)
    n = args.order or 2
    if n == 2:
        h = oriented_hessian(fld, x, S, seed=args.seed)
        result = {"hessian": h.H, "coords": h.coords, "basis": h.basis.O.T,
                  "symmetry_defect": h.symmetry_defect, "error_estimate": h.error_estimate,
                  "noise": h.noise}
        table = [f"hessian\n{np.array2string(h.H, precision=8)}",
                 f"symmetry_defect {h.symmetry_defect:.3e}"]
    else:
        t = higher_derivative(fld, x, S, n, seed=args.seed)
        result = {"order": n, "tensor": t.tensor, "basis": t.basis.O.T,
                  "error_estimate": t.error_estimate, "precision_warning": t.precision_warning}
        table = [f"order {n} tensor (basis coordinates)\n{np.array2string(t.tensor, precision=8)}"]
    return result, table, EXIT_OK


def cmd_ddir(args):
    fld, x, _ = _point_and_field(args)
    if args.dir is None:
        raise ConfigError("ddir needs --dir")
    h = parse_vector(args.dir)
    if len(h) != fld.dim:
        raise ConfigError("direction dimension mismatch")
    r = directional_derivative_plus(fld, x, h, schedule_from(args))
    result = {"value": r.value, "observed_order": r.order, "quotients": r.quotients,
              "steps": r.steps, "skipped_levels": r.skipped_levels,
              "error_estimate": r.error_estimate}
    return result, [f"D+_h = {r.value:.12g} (observed order {r.order:.3g})"], EXIT_OK


def cmd_classify(args):
    fld, x, S = _point_and_field(args)
    v = classify_critical_point(fld, x, S, seed=args.seed, sched=schedule_from(args))
    table = [f"class     {v.verdict}", f"|grad|    {v.gradient_norm:.3e}"]
    if v.definiteness is not None:
        table.append(f"form      {v.definiteness.verdict} (lambda {v.definiteness.lambda_estimate:.4g})")
    if not v.cross_check_agrees:
        table.append("warning   direct sign probes disagree with the verdict")
    code = EXIT_FAIL if v.verdict == "inconclusive" else EXIT_OK
    return v.to_dict(), table, code


# --- verify -----------------------------------------------------------------

LAWS = ("chain_rule", "product_rule", "mean_value", "increment_identity", "decomposition",
        "schwarz", "taylor")


def _item_field(spec, dim=None):
    if spec is None:
        raise ConfigError("item needs 'field'")
    return load_field(spec, dim)


def run_item(item, seed):
    """Run one batch item; returns a JSON-ready record with a status."""
    law = item.get("law")
    if law not in LAWS:
        raise ConfigError(f"unknown law {law!r}; expected one of {', '.join(LAWS)}")
    x = np.asarray(item.get("point", []), dtype=float)
    seed = int(item.get("seed", seed))
    tol = {}
    if "tolerance" in item:
        tol["atol"] = float(item["tolerance"])
    if "rel_tolerance" in item:
        tol["rtol"] = float(item["rel_tolerance"])
    q = item.get("quadrature") or {}
    quad = Quadrature(rule=q.get("rule", "gauss_legendre"), nodes=int(q.get("nodes", 16)))
    dim = len(x) if x.size else None

    if law == "chain_rule":
        inner = load_vector_field(item["inner"])
        outer = _item_field(item["outer"], inner.dim_out)
        S = build_set(item.get("set", "full"), inner.dim_in)
        T = build_set(item.get("outer_set", "full"), inner.dim_out)
        rep = check_chain_rule(inner, outer, x, S, T, seed=seed, **tol)
    else:
        fld = _item_field(item.get("field"), dim)
        d = fld.dim
        if law in ("increment_identity", "decomposition"):
            comps = [build_set(c, d) for c in item.get("components", [])]
            if not comps:
                raise ConfigError(f"{law} needs 'components'")
            osum = orthosum(comps, seed=seed)
            if law == "decomposition":
                rep = check_decomposition(fld, x, osum, seed=seed, **tol)
            else:
                h = np.asarray(item["direction"], dtype=float)
                rep = check_increment_identity(fld, x, osum, h, quad, seed=seed, **tol)
        else:
            S = build_set(item.get("set", "full"), d)
            if law == "product_rule":
                other = _item_field(item.get("field2"), d)
                rep = check_product_rule(fld, other, x, S, seed=seed, **tol)
            elif law == "mean_value":
                h = np.asarray(item["direction"], dtype=float)
                rep = mean_value_integral(fld, x, h, S, quad, seed=seed, **tol)
            elif law == "schwarz":
                rep = check_schwarz(fld, x, S, seed=seed, **tol)
            else:
                h = np.asarray(item["direction"], dtype=float)
                rep, rec = taylor_expand(fld, x, h, S, int(item.get("order", 2)), quad,
                                         seed=seed, **tol)
                if not rec.decay_passed:
                    rep = dataclasses.replace(rep, passed=False)
    out = to_jsonable(rep)
    out["status"] = "passed" if rep.passed else "failed"
    return out


def _safe_item(args):
    index, item, seed = args
    try:
        rec = run_item(item, seed)
    except Exception as exc:  # recorded per item, batch continues
        rec = {"law": item.get("law") if isinstance(item, dict) else None,
               "status": "error", "error": _error_record(exc), "exit_code": exit_code_for(exc)}
    rec["index"] = index
    return rec


def cmd_verify(args):
    if args.batch is None:
        raise ConfigError("verify needs a batch file")
    with open(args.batch) as fh:
        batch = json.load(fh)
    if isinstance(batch, list):
        items = batch
    elif isinstance(batch, dict):
        if batch.get("schema") != 1:
            raise ConfigError(f"unsupported batch schema {batch.get('schema')!r}; expected 1")
        items = batch.get("items", [])
    else:
        raise ConfigError("batch must be an object with 'schema' and 'items'")
    work = [(i, it, args.seed) for i, it in enumerate(items)]
    jobs = max(1, args.jobs or 1)
    if jobs > 1 and len(work) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(_safe_item, work))
    else:
        reports = [_safe_item(w) for w in work]
    counts = {s: sum(r["status"] == s for r in reports) for s in ("passed", "failed", "error")}
    summary = f"passed {counts['passed']} / failed {counts['failed']} / errored {counts['error']}"
    result = {"schema": 1, "summary": summary, "passed": counts["passed"],
              "failed": counts["failed"], "errored": counts["error"], "reports": reports}
    table = [f"[{r['index']:3d}] {str(r.get('law')):20s} {r['status']}"
             + (f"  abs_err={r['abs_err']:.3e}" if isinstance(r.get("abs_err"), float) else "")
             for r in reports]
    table.append(summary)
    code = EXIT_OK if counts["failed"] == 0 and counts["error"] == 0 else EXIT_FAIL
    return result, table, code


# --- corpus -----------------------------------------------------------------

def cmd_corpus(args):
    """Regression report: full-space gradients against closed forms, and the
    one-sided references."""
    rows = []
    for fld in builtin_corpus():
        ref = fld.reference
        x = np.asarray(ref.get("point"), dtype=float)
        if "gradient" in ref:
            try:
                g = oriented_gradient(fld, x, build_set("full", fld.dim), seed=args.seed).g
                exact = np.asarray(ref["gradient"](x), dtype=float)
                err = float(np.linalg.norm(g - exact) / max(1.0, np.linalg.norm(exact)))
                rows.append({"field": fld.label, "set": "full", "point": x, "gradient": g,
                             "reference": exact, "rel_err": err, "ok": err <= args.tolerance})
            except OrientedError as exc:
                rows.append({"field": fld.label, "set": "full", "error": _error_record(exc),
                             "ok": False})
        for o in ref.get("oriented", []):
            S = build_set(o["set"], fld.dim)
            g = oriented_gradient(fld, o["point"], S, seed=args.seed).g
            exact = np.asarray(o["gradient"], dtype=float)
            err = float(np.linalg.norm(g - exact) / max(1.0, np.linalg.norm(exact)))
            rows.append({"field": fld.label, "set": S.to_spec(), "point": o["point"],
                         "gradient": g, "reference": exact, "rel_err": err,
                         "ok": err <= args.tolerance})
    bad = sum(not r["ok"] for r in rows)
    table = [f"{r['field']:16s} {r.get('rel_err', float('nan')):.2e} {'ok' if r['ok'] else 'FAIL'}"
             for r in rows]
    table.append(f"{len(rows) - bad} / {len(rows)} within {args.tolerance:g}")
    return {"rows": rows, "failures": bad}, table, EXIT_OK if bad == 0 else EXIT_FAIL


# --- entry point ------------------------------------------------------------

COMMANDS = {"grad": cmd_grad, "hessian": cmd_hessian, "ddir": cmd_ddir, "verify": cmd_verify,
            "classify": cmd_classify, "corpus": cmd_corpus}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser():
    p = _Parser(prog="oriented", description="Oriented derivatives from the command line. "
                "Points and directions are comma lists; use --at=-1,2 for a leading minus.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, point=True):
        sp.add_argument("--seed", type=int, default=None,
                        help=f"random seed (default: ${SEED_ENV} or 0)")
        sp.add_argument("--output", "-o", help="also write the JSON report to this path")
        if point:
            g = sp.add_argument_group("field and point")
            g.add_argument("--expr", help="expression in x1..xd")
            g.add_argument("--builtin", help="builtin corpus field name")
            g.add_argument("--field", help="JSON field spec file")
            g.add_argument("--domain", help="domain expression, inside where >= 0")
            g.add_argument("--dim", type=int)
            g.add_argument("--at", help="point, e.g. 1,2")
            g.add_argument("--set", default="full",
                           help="direction set, e.g. full, orthant:+-, halfspace:1, ball:0.5, "
                                "cone:1,0, linear:e1;e3, product(orthant:+ & full:1)")
            s = sp.add_argument_group("step schedule")
            s.add_argument("--t0", type=float)
            s.add_argument("--factor", type=float)
            s.add_argument("--levels", type=int)
            s.add_argument("--richardson-order", type=int)
            s.add_argument("--samples", type=int, help="probe directions per level (default 8k)")

    common(sub.add_parser("grad", help="S-oriented gradient"))
    hp = sub.add_parser("hessian", help="S-Hessian or higher S-derivative")
    common(hp)
    hp.add_argument("--order", type=int, help="derivative order 2..4 (default 2)")
    dp = sub.add_parser("ddir", help="one-sided directional derivative")
    common(dp)
    dp.add_argument("--dir", help="direction h")
    common(sub.add_parser("classify", help="classify a critical point"))
    vp = sub.add_parser("verify", help="run a batch of law checks")
    common(vp, point=False)
    vp.add_argument("batch", nargs="?", help="batch JSON file")
    vp.add_argument("--jobs", type=int, default=1, help="worker threads")
    cp = sub.add_parser("corpus", help="regression report over the builtin corpus")
    common(cp, point=False)
    cp.add_argument("--tolerance", type=float, default=1e-6)
    return p


def _emit(payload, table, output):
    text = json.dumps(to_jsonable(payload), indent=2)
    sys.stdout.write(text + "\n")
    if output:
        with open(output, "w") as fh:
            fh.write(text + "\n")
    for line in table:
        sys.stderr.write(line + "\n")


def main(argv=None) -> int:
    parser = build_parser()
    args = None
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise ConfigError("missing command; see --help")
        if args.seed is None:
            args.seed = default_seed()
        result, table, code = COMMANDS[args.command](args)
        payload = {"command": args.command, "config": _config(args), "result": result,
                   "exit_code": code}
    except Exception as exc:
        code = exit_code_for(exc)
        payload = {"command": getattr(args, "command", None),
                   "config": _config(args) if args is not None else {},
                   "error": _error_record(exc), "exit_code": code}
        table = [f"error: {type(exc).__name__}: {exc}"]
    payload["meta"] = {"version": __version__,
                       "timestamp": datetime.now(timezone.utc).isoformat()}
    _emit(payload, table, getattr(args, "output", None) if args is not None else None)
    return code


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
