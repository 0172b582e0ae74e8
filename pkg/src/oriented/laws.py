"""Numerical checks of calculus identities for oriented derivatives.

Each check returns a :class:`LawReport` comparing two independently computed
sides. Violated hypotheses raise :class:`PreconditionError` instead of
producing a failing report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dirset import DirectionSet, s_interior_contains
from .errors import PreconditionError
from .fields import ScalarField, VectorField, compose, evaluate, product
from .odiff import (
    CONSISTENT,
    DEFAULT_SCHEDULE,
    StepSchedule,
    higher_derivatives,
    oriented_derivative_operator,
    oriented_gradient,
    oriented_gradients,
    oriented_hessian,
)
from .quadrature import Quadrature, integrate
from .span import OrthoSum, decompose

ATOL = 1e-6
RTOL = 1e-5
CHAIN_PROBES = 64


@dataclass(frozen=True)
class LawReport:
    law: str
    lhs: object
    rhs: object
    abs_err: float
    rel_err: float
    tolerance: float
    rel_tolerance: float
    passed: bool
    context: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "law": self.law, "lhs": self.lhs, "rhs": self.rhs, "abs_err": self.abs_err,
            "rel_err": self.rel_err, "tolerance": self.tolerance,
            "rel_tolerance": self.rel_tolerance, "pass": self.passed,
            "context": self.context, "diagnostics": self.diagnostics,
        }


def make_report(law, lhs, rhs, atol=ATOL, rtol=RTOL, context=None, diagnostics=None):
    a, b = np.asarray(lhs, dtype=float), np.asarray(rhs, dtype=float)
    abs_err = float(np.max(np.abs(a - b), initial=0.0))
    scale = max(float(np.max(np.abs(a), initial=0.0)), float(np.max(np.abs(b), initial=0.0)))
    rel_err = abs_err / scale if scale > 0 else (0.0 if abs_err == 0 else math.inf)
    passed = abs_err <= atol or rel_err <= rtol
    lhs = a.tolist() if a.ndim else float(a)
    rhs = b.tolist() if b.ndim else float(b)
    return LawReport(law, lhs, rhs, abs_err, rel_err, atol, rtol, bool(passed),
                     dict(context or {}), dict(diagnostics or {}))


def _ctx(fld, x, S, **extra):
    out = {"field": getattr(fld, "label", ""), "point": np.asarray(x, dtype=float).tolist()}
    if S is not None:
        out["set"] = S.to_spec()
    for k, v in extra.items():
        out[k] = np.asarray(v).tolist() if isinstance(v, np.ndarray) else v
    return out


def _require_balanced(S, what="S"):
    if not S.flags.balanced:
        raise PreconditionError(f"{what} must be balanced (kind {S.kind!r})")


def _require_member(S, h):
    if not S.contains(h):
        raise PreconditionError("increment h is not a member of S", h=np.asarray(h).tolist())


def _segment_radius(fld, S, x, h, quad, seed):
    """Check the S-interior condition at the quadrature nodes of [x, x + h]
    and return the smallest verified radius."""
    t, _ = np.polynomial.legendre.leggauss(2 * quad.nodes)
    t = np.concatenate([(t + 1) / 2, [0.0]])
    delta = math.inf
    for ti in t:
        node = x + ti * h
        v = s_interior_contains(fld, S, node, seed=seed)
        if not v.member:
            raise PreconditionError("segment node not verified in the S-interior",
                                    node=node.tolist(), t=float(ti))
        delta = min(delta, v.delta)
    return delta


def _shrunk(sched, radius):
    if radius >= sched.t0:
        return sched
    return StepSchedule(radius, sched.factor, sched.levels, sched.richardson_order)


# --- chain and product rules ------------------------------------------------

def check_chain_rule(phi: VectorField, psi: ScalarField, x, S: DirectionSet, T: DirectionSet,
                     sched: StepSchedule = DEFAULT_SCHEDULE, seed=0, atol=ATOL, rtol=RTOL,
                     probes=CHAIN_PROBES) -> LawReport:
    """D_S(psi o phi)(x) against D_T psi(phi(x)) o D_S phi(x), compared on V."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if isinstance(phi, ScalarField):
        phi = VectorField.from_scalar(phi)
    if phi.dim_out != T.dim or psi.dim != T.dim:
        raise ValueError("dimension mismatch between phi, psi and T")
    # value condition: phi(x + h) - phi(x) in T for h in S near 0
    r = sched.t0 if math.isinf(S.radius_cap) else min(sched.t0, S.radius_cap / 2)
    H = S.sample(r, probes, seed)
    y0 = phi(x)
    Y, ok = phi.eval_many(x + H)
    inc = Y[ok] - y0
    bad = ~T.contains_many(inc)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise PreconditionError(
            "value condition violated: phi(x + h) - phi(x) is not in T",
            violations=int(bad.sum()), probes=int(ok.sum()),
            h=H[ok][i].tolist(), increment=inc[i].tolist(),
        )
    comp = compose(psi, phi)
    lhs = oriented_gradient(comp, x, S, sched, seed=seed)
    gT = oriented_gradient(psi, y0, T, sched, seed=seed)
    D = oriented_derivative_operator(phi, x, S, sched, seed=seed, basis=lhs.basis)
    rhs = D.ambient.T @ gT.g
    diag = {"lhs_verdict": lhs.verdict, "outer_verdict": gT.verdict, "inner_verdict": D.verdict,
            "value_condition_probes": int(ok.sum()),
            "fd_noise": lhs.error_estimate + gT.error_estimate + D.error_estimate}
    return make_report("chain_rule", lhs.g, rhs, atol, rtol,
                       _ctx(comp, x, S, outer_set=T.to_spec()), diag)


def check_product_rule(phi: ScalarField, psi: ScalarField, x, S: DirectionSet,
                       sched: StepSchedule = DEFAULT_SCHEDULE, seed=0, atol=ATOL,
                       rtol=RTOL) -> LawReport:
    """grad_S(phi psi)(x) against psi(x) grad_S phi(x) + phi(x) grad_S psi(x)."""
    x = np.asarray(x, dtype=float).reshape(-1)
    gp = oriented_gradient(phi, x, S, sched, seed=seed)
    gq = oriented_gradient(psi, x, S, sched, seed=seed, basis=gp.basis)
    for name, g in (("phi", gp), ("psi", gq)):
        if g.verdict != CONSISTENT:
            raise PreconditionError(f"{name} is not S-differentiable at x (verdict {g.verdict})",
                                    slope=g.slope)
    pq = product(phi, psi)
    lhs = oriented_gradient(pq, x, S, sched, seed=seed, basis=gp.basis)
    rhs = evaluate(psi, x) * gp.g + evaluate(phi, x) * gq.g
    return make_report("product_rule", lhs.g, rhs, atol, rtol, _ctx(pq, x, S),
                       {"lhs_verdict": lhs.verdict,
                        "fd_noise": lhs.error_estimate + gp.error_estimate + gq.error_estimate})


# --- integral identities ----------------------------------------------------

def _gradient_integral(fld, base, h, S, quad, sched, seed, basis=None, record=None):
    """Quadrature of t -> <grad_S phi(base + t h), h> over [0, 1]."""
    norms = []

    def integrand(t):
        rs = oriented_gradients(fld, base[None, :] + t[:, None] * h[None, :], S, sched,
                                seed=seed, basis=basis, check_interior=False)
        G = np.array([r.g for r in rs])
        norms.append(np.linalg.norm(G, axis=1).max())
        return G @ h

    res = integrate(integrand, quad)
    if record is not None:
        record["sup_gradient_norm"] = float(max(norms))
    return res


def mean_value_integral(phi: ScalarField, x, h, S: DirectionSet, quad: Quadrature = Quadrature(),
                        sched: StepSchedule = DEFAULT_SCHEDULE, seed=0, atol=ATOL,
                        rtol=RTOL) -> LawReport:
    """phi(x + h) - phi(x) against the integral of D_S phi(x + t h)(h) over [0, 1].

    Also reports the bound |phi(x+h) - phi(x)| <= sup_t |D_S phi(x + t h)| |h|
    with the supremum taken over quadrature nodes.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    h = np.asarray(h, dtype=float).reshape(-1)
    _require_balanced(S)
    _require_member(S, h)
    radius = _segment_radius(phi, S, x, h, quad, seed)
    sched = _shrunk(sched, radius)
    lhs = evaluate(phi, x + h) - evaluate(phi, x)
    rec = {}
    res = _gradient_integral(phi, x, h, S, quad, sched, seed, record=rec)
    sup = rec["sup_gradient_norm"] * float(np.linalg.norm(h))
    diag = {"quadrature_rule": res.rule, "quadrature_nodes": res.nodes,
            "refinement_gap": res.refinement_gap, "sup_bound": sup,
            "bound_holds": bool(abs(lhs) <= sup * (1 + 1e-9) + atol)}
    return make_report("mean_value", lhs, float(res.value), atol, rtol,
                       _ctx(phi, x, S, h=h.tolist()), diag)


def check_increment_identity(phi: ScalarField, x, osum: OrthoSum, h,
                             quad: Quadrature = Quadrature(),
                             sched: StepSchedule = DEFAULT_SCHEDULE, seed=0, atol=ATOL,
                             rtol=RTOL) -> LawReport:
    """phi(x + h) - phi(x) against the telescoping sum of per-component integrals
    sum_i int_0^1 D_{S_i} phi(x + h_1 + ... + h_{i-1} + t h_i)(h_i) dt."""
    x = np.asarray(x, dtype=float).reshape(-1)
    h = np.asarray(h, dtype=float).reshape(-1)
    parts = decompose(h, osum)
    for i, Si in enumerate(osum.sets):
        _require_balanced(Si, f"component {i}")
    base = x.copy()
    terms, rules = [], []
    for (Si, Bi), hi in zip(osum.components, parts):
        if np.any(hi):
            _require_member(Si, hi)
            radius = _segment_radius(phi, Si, base, hi, quad, seed)
            res = _gradient_integral(phi, base, hi, Si, quad, _shrunk(sched, radius), seed, basis=Bi)
            terms.append(float(res.value))
            rules.append(res.rule)
        else:
            terms.append(0.0)
            rules.append("none")
        base = base + hi
    lhs = evaluate(phi, x + h) - evaluate(phi, x)
    return make_report("increment_identity", lhs, float(sum(terms)), atol, rtol,
                       _ctx(phi, x, osum.total, h=h.tolist(),
                            components=[p.tolist() for p in parts]),
                       {"terms": terms, "quadrature_rules": rules})


# --- decomposition and symmetry ---------------------------------------------

def stacked_partials(parts, bases):
    """Block-partial view: for components spanned by coordinate axes, the
    gradient restricted to each block of indices, and their concatenation in
    index order (the classical gradient when the blocks cover all axes)."""
    blocks = []
    d = bases[0].d
    stacked = np.full(d, np.nan)
    for g, B in zip(parts, bases):
        O = B.O
        is_axes = np.allclose(np.abs(O), np.round(np.abs(O))) and np.allclose(np.abs(O).sum(axis=0), 1)
        if not is_axes:
            return None
        idx = sorted(int(np.argmax(np.abs(O[:, j]))) for j in range(O.shape[1]))
        blocks.append({"indices": idx, "partial": g[idx].tolist()})
        stacked[idx] = g[idx]
    return {"blocks": blocks, "stacked": stacked.tolist()}


def check_decomposition(phi: ScalarField, x, osum: OrthoSum, sched: StepSchedule = DEFAULT_SCHEDULE,
                        seed=0, atol=ATOL, rtol=RTOL) -> LawReport:
    """grad_S phi(x) against the sum of the component gradients grad_{S_i} phi(x)."""
    x = np.asarray(x, dtype=float).reshape(-1)
    comps = []
    for i, (Si, Bi) in enumerate(osum.components):
        r = oriented_gradient(phi, x, Si, sched, seed=seed, basis=Bi)
        if r.verdict != CONSISTENT:
            raise PreconditionError(f"component {i}: not S_i-differentiable (verdict {r.verdict})",
                                    slope=r.slope)
        comps.append(r)
    total = oriented_gradient(phi, x, osum.total, sched, seed=seed)
    parts = [r.g for r in comps]
    diag = {"components": [p.tolist() for p in parts], "total_verdict": total.verdict,
            "stacked_partials": stacked_partials(parts, osum.bases),
            "fd_noise": total.error_estimate + sum(r.error_estimate for r in comps)}
    return make_report("decomposition", total.g, np.sum(parts, axis=0), atol, rtol,
                       _ctx(phi, x, osum.total), diag)


def check_schwarz(phi: ScalarField, x, S: DirectionSet, seed=0, atol=1e-4, rtol=0.0,
                  noise_factor=100.0) -> LawReport:
    """Symmetry of the S-Hessian: compares H with H^T.

    The absolute tolerance is raised to ``noise_factor`` times the finite
    difference noise estimate when that is larger.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    _require_balanced(S)
    hs = oriented_hessian(phi, x, S, seed=seed)
    P = hs.basis.P
    tol = max(atol, noise_factor * (hs.error_estimate + hs.noise))
    proj = max(float(np.max(np.abs(P @ hs.H - hs.H))), float(np.max(np.abs(hs.H @ P - hs.H))))
    return make_report("schwarz", hs.H, hs.H.T, tol, rtol, _ctx(phi, x, S),
                       {"symmetry_defect": hs.symmetry_defect, "projection_defect": proj,
                        "fd_noise": hs.error_estimate + hs.noise})


# --- Taylor formula ---------------------------------------------------------

@dataclass(frozen=True)
class TaylorRecord:
    order: int
    value: float
    taylor: float
    remainder: float
    terms: list
    decay_scales: list
    decay_remainders: list
    decay_slope: float
    decay_passed: bool


def _derivative_terms(phi, x, h, S, n, sched, seed, basis):
    """[D^k phi(x)(h, ..., h) for k = 1..n] and the D^n error estimate."""
    g = oriented_gradient(phi, x, S, sched, seed=seed, basis=basis, check_interior=False)
    terms = [float(g.g @ h)]
    err = g.error_estimate
    for k in range(2, n + 1):
        D = higher_derivatives(phi, x, S, k, seed=seed, basis=basis, check_interior=False)[0]
        terms.append(D.apply(h))
        err = D.error_estimate
    return terms, err


def _taylor_remainder(phi, x, h, S, n, quad, sched, seed, basis, base_term):
    """Integral of (1-t)^{n-1}/(n-1)! (D^n phi(x + t h) - D^n phi(x))(h^n) over [0, 1]."""
    w = 1.0 / math.factorial(n - 1)

    def integrand(t):
        X = x[None, :] + t[:, None] * h[None, :]
        if n == 1:
            rs = oriented_gradients(phi, X, S, sched, seed=seed, basis=basis, check_interior=False)
            vals = np.array([r.g @ h for r in rs])
        else:
            Ds = higher_derivatives(phi, X, S, n, seed=seed, basis=basis, check_interior=False)
            vals = np.array([D.apply(h) for D in Ds])
        return w * (1 - t) ** (n - 1) * (vals - base_term)

    return integrate(integrand, quad)


def taylor_expand(phi: ScalarField, x, h, S: DirectionSet, n: int, quad: Quadrature = Quadrature(),
                  sched: StepSchedule = DEFAULT_SCHEDULE, seed=0, atol=ATOL, rtol=RTOL,
                  decay_scales=(1.0, 0.5, 0.25, 0.125, 0.0625), decay_margin=0.3):
    """Taylor formula of order n with integral remainder.

    Returns ``(report, record)``. The report compares phi(x + h) with the Taylor
    polynomial plus the remainder; ``record.decay_passed`` states whether the
    remainder at t h decays with log-log slope above n + ``decay_margin``.
    Remainders at the finite-difference noise level are excluded from the
    regression; if all are, the slope is reported as inf (exact expansion).
    """
    from .span import span_basis

    x = np.asarray(x, dtype=float).reshape(-1)
    h = np.asarray(h, dtype=float).reshape(-1)
    if not 1 <= n <= 4:
        raise ValueError("Taylor order n must be in 1..4")
    _require_balanced(S)
    _require_member(S, h)
    radius = _segment_radius(phi, S, x, h, quad, seed)
    sched = _shrunk(sched, radius)
    basis = span_basis(S, seed=seed)
    f0 = evaluate(phi, x)

    def expand(hh):
        terms, err = _derivative_terms(phi, x, hh, S, n, sched, seed, basis)
        taylor = f0 + sum(tk / math.factorial(k + 1) for k, tk in enumerate(terms))
        rem = _taylor_remainder(phi, x, hh, S, n, quad, sched, seed, basis, terms[-1])
        return terms, taylor, float(rem.value), err, rem

    terms, taylor, rem, err, res = expand(h)
    value = evaluate(phi, x + h)

    rems, floors = [], []
    hn = float(np.linalg.norm(h))
    for s in decay_scales:
        _, _, r_s, err_s, _ = expand(s * h)
        rems.append(abs(r_s))
        floors.append(10 * (err_s + 1e3 * np.finfo(float).eps * (1 + abs(f0))) * (s * hn) ** n)
    rems_a, floors_a = np.array(rems), np.array(floors)
    above = rems_a > floors_a
    if above.sum() >= 2:
        slope = float(np.polyfit(np.log(np.array(decay_scales)[above]), np.log(rems_a[above]), 1)[0])
    elif above.sum() == 0:
        slope = math.inf
    else:
        slope = math.nan
    decay_ok = bool(slope > n + decay_margin)

    record = TaylorRecord(n, value, taylor, rem, terms, list(decay_scales), rems, slope, decay_ok)
    report = make_report(
        "taylor", value, taylor + rem, atol, rtol, _ctx(phi, x, S, h=h.tolist(), order=n),
        {"taylor": taylor, "remainder": rem, "decay_slope": slope, "decay_passed": decay_ok,
         "decay_remainders": rems, "quadrature_rule": res.rule, "fd_noise": err},
    )
    return report, record
