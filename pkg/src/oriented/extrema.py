"""Local S-extrema: first-order necessary condition, definiteness on S and
second-order classification of critical points."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dirset import DirectionSet, ZeroSet, s_interior_contains
from .errors import NonconvergenceError, PreconditionError
from .fields import ScalarField, evaluate
from .odiff import (
    CONSISTENT,
    DEFAULT_SCHEDULE,
    EPS,
    FLOOR_FACTOR,
    StepSchedule,
    directional_derivative_plus,
    oriented_gradient,
    oriented_hessian,
    quadratic_model,
)
from .span import span_basis

DEF_TOL = 1e-9
GRAD_TOL = 1e-6

STRONGLY_NEGATIVE = "strongly_negative"
NEGATIVE_SEMI = "negative_semi"
STRONGLY_POSITIVE = "strongly_positive"
POSITIVE_SEMI = "positive_semi"
INDEFINITE = "indefinite"
INCONCLUSIVE = "inconclusive"

STRICT_MAX = "strict_local_max"
STRICT_MIN = "strict_local_min"
NO_EXTREMUM = "no_extremum"
FIRST_ORDER_VIOLATION = "first_order_violation"


def _unit_directions(S, count, seed):
    H = S.sample(1.0, count, seed)
    n = np.linalg.norm(H, axis=1)
    keep = n > 1e-12
    return H[keep] / n[keep, None]


@dataclass(frozen=True)
class NecessaryConditionVerdict:
    passed: bool
    method: str
    worst_value: float
    witness: list
    tolerance: float
    probes: int
    gradient: list


def necessary_condition(phi: ScalarField, x, S: DirectionSet, probes=256, tol=GRAD_TOL,
                        sched: StepSchedule = DEFAULT_SCHEDULE, seed=0, maximum=True
                        ) -> NecessaryConditionVerdict:
    """First-order condition for a local S-maximum (``maximum=False``: minimum).

    With S positively homogeneous and a consistent differentiability verdict the
    test is <grad_S phi(x), h> <= tol on unit probes h of S; otherwise the
    one-sided derivative D_h^+ phi(x) is estimated per probe. The closure of
    coni(S) is approximated by the probes themselves.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    sign = 1.0 if maximum else -1.0
    g = oriented_gradient(phi, x, S, sched, seed=seed)
    if isinstance(S, ZeroSet) or g.basis.k == 0:
        return NecessaryConditionVerdict(True, "trivial", -math.inf, [], tol, 0, g.g.tolist())
    H = _unit_directions(S, probes, seed)
    if S.flags.positively_homogeneous and g.verdict == CONSISTENT:
        vals = sign * (H @ g.g)
        method = "gradient"
    else:
        vals = []
        for h in H[: min(len(H), 64)]:
            try:
                vals.append(sign * directional_derivative_plus(phi, x, h, sched).value)
            except NonconvergenceError:
                vals.append(math.nan)
        vals = np.array(vals)
        H = H[: len(vals)]
        method = "directional"
    finite = np.isfinite(vals)
    if not finite.any():
        raise NonconvergenceError("no one-sided derivative converged", vals.tolist())
    i = int(np.nanargmax(np.where(finite, vals, -np.inf)))
    worst = float(vals[i])
    return NecessaryConditionVerdict(bool(worst <= tol), method, worst, H[i].tolist(), tol,
                                     int(finite.sum()), g.g.tolist())


@dataclass(frozen=True)
class DefinitenessVerdict:
    verdict: str
    lambda_estimate: float
    witnesses: list
    method: str
    symmetry_defect: float
    q_min: float
    q_max: float
    probes: int

    def to_dict(self):
        return {"class": self.verdict, "lambda_estimate": self.lambda_estimate,
                "witnesses": self.witnesses, "method": self.method,
                "symmetry_defect": self.symmetry_defect, "q_min": self.q_min,
                "q_max": self.q_max, "probes": self.probes}


def _classify_values(q, tol):
    lo, hi = float(np.min(q)), float(np.max(q))
    if hi <= -tol:
        return STRONGLY_NEGATIVE, -hi
    if lo >= tol:
        return STRONGLY_POSITIVE, lo
    if lo < -tol and hi > tol:
        return INDEFINITE, min(-lo, hi)
    if hi <= tol and lo < -tol:
        return NEGATIVE_SEMI, 0.0
    if lo >= -tol and hi > tol:
        return POSITIVE_SEMI, 0.0
    return INCONCLUSIVE, 0.0


def definiteness_on_S(L, S: DirectionSet, probes=None, seed=0, tol=DEF_TOL) -> DefinitenessVerdict:
    """Sign pattern of q(h) = <L h, h> / |h|^2 on S minus {0}.

    Sampling uses at least 64 k probes (k = rank of span S). When S is a linear
    subspace the eigenvalues of O^T L O decide instead of the samples.
    """
    L = np.asarray(L, dtype=float)
    defect = float(np.max(np.abs(L - L.T), initial=0.0))
    L = 0.5 * (L + L.T)
    basis = span_basis(S, seed=seed)
    k = basis.k
    if k == 0 or isinstance(S, ZeroSet):
        return DefinitenessVerdict(INCONCLUSIVE, 0.0, [], "zero_set", defect, 0.0, 0.0, 0)
    n = max(64 * k, probes or 0)
    H = _unit_directions(S, n, seed)
    q = np.einsum("ni,ij,nj->n", H, L, H)
    verdict, lam = _classify_values(q, tol)
    lo, hi = int(np.argmin(q)), int(np.argmax(q))
    method = "sampled"
    if verdict == INDEFINITE:
        witnesses = [H[hi].tolist(), H[lo].tolist()]
    elif verdict in (STRONGLY_NEGATIVE, NEGATIVE_SEMI):
        witnesses = [H[hi].tolist()]
    else:
        witnesses = [H[lo].tolist()]
    qmin, qmax = float(q[lo]), float(q[hi])
    if S.is_subspace:
        w, v = np.linalg.eigh(basis.O.T @ L @ basis.O)
        verdict, lam = _classify_values(w, tol)
        vecs = (basis.O @ v).T
        method = "eigen"
        qmin, qmax = float(w[0]), float(w[-1])
        if verdict == INDEFINITE:
            witnesses = [vecs[-1].tolist(), vecs[0].tolist()]
        elif verdict in (STRONGLY_NEGATIVE, NEGATIVE_SEMI):
            witnesses = [vecs[-1].tolist()]
        else:
            witnesses = [vecs[0].tolist()]
    return DefinitenessVerdict(verdict, float(lam), witnesses, method, defect, qmin, qmax, len(H))


@dataclass(frozen=True)
class CriticalPointVerdict:
    verdict: str
    gradient: list
    gradient_norm: float
    gradient_tolerance: float
    definiteness: DefinitenessVerdict = None
    hessian: list = None
    second_order_method: str = ""
    witness: list = None
    probe_records: list = field(default_factory=list)
    cross_check_agrees: bool = True

    def to_dict(self):
        return {"class": self.verdict, "gradient": self.gradient,
                "gradient_norm": self.gradient_norm,
                "gradient_tolerance": self.gradient_tolerance,
                "definiteness": self.definiteness.to_dict() if self.definiteness else None,
                "hessian": self.hessian, "second_order_method": self.second_order_method,
                "witness": self.witness, "probe_records": self.probe_records,
                "cross_check_agrees": self.cross_check_agrees}


def _probe_signs(phi, x, S, radii, count, seed):
    f0 = evaluate(phi, x)
    H = _unit_directions(S, count, seed)
    records = []
    for r in radii:
        v, ok = phi.eval_many(x + r * H)
        d = v[ok] - f0
        floor = FLOOR_FACTOR * EPS * (abs(f0) + 1.0)
        records.append({"radius": float(r), "probes": int(ok.sum()),
                        "min_increment": float(d.min()), "max_increment": float(d.max()),
                        "positive": int(np.sum(d > floor)), "negative": int(np.sum(d < -floor))})
    return records


def _agrees(verdict, records):
    if verdict == STRICT_MAX:
        return all(r["positive"] == 0 and r["negative"] == r["probes"] for r in records)
    if verdict == STRICT_MIN:
        return all(r["negative"] == 0 and r["positive"] == r["probes"] for r in records)
    if verdict == NO_EXTREMUM:
        return all(r["positive"] > 0 and r["negative"] > 0 for r in records)
    return True


def _probe_radius(phi, S, x, seed, r0=1e-2):
    r = r0
    if math.isfinite(S.radius_cap):
        r = min(r, S.radius_cap / 2)
    v = s_interior_contains(phi, S, x, seed=seed)
    if not v.member:
        raise PreconditionError("point not verified to lie in the S-interior", point=x.tolist())
    return min(r, v.delta / 2)


def classify_critical_point(phi: ScalarField, x, S: DirectionSet, seed=0, grad_tol=GRAD_TOL,
                            def_tol=DEF_TOL, probes=None, sched: StepSchedule = DEFAULT_SCHEDULE
                            ) -> CriticalPointVerdict:
    """Classify x as strict local S-max/min, no extremum, or first-order violation.

    The second derivative comes from the central-difference S-Hessian when S is
    balanced and from a least-squares quadratic model on S otherwise. The
    verdict is cross-checked by the signs of phi(x + h) - phi(x) on probes at
    two radii; disagreement is reported, not silently corrected.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    g = oriented_gradient(phi, x, S, sched, seed=seed)
    gnorm = float(np.linalg.norm(g.g))
    tol = grad_tol * (1 + g.error_estimate)
    if g.basis.k == 0:
        return CriticalPointVerdict(INCONCLUSIVE, g.g.tolist(), gnorm, tol)
    r = _probe_radius(phi, S, x, seed)
    records = _probe_signs(phi, x, S, (r, r / 4), max(64, 64 * g.basis.k), seed + 1)
    if gnorm > tol:
        H = _unit_directions(S, max(256, 64 * g.basis.k), seed)
        vals = H @ g.g
        up, down = int(np.argmax(vals)), int(np.argmin(vals))
        if vals[up] > tol and vals[down] < -tol:
            return CriticalPointVerdict(FIRST_ORDER_VIOLATION, g.g.tolist(), gnorm, tol,
                                        witness=[H[up].tolist(), H[down].tolist()],
                                        probe_records=records)
        # nonzero gradient with a one-sided sign on S: outside the second-order criteria
        return CriticalPointVerdict(INCONCLUSIVE, g.g.tolist(), gnorm, tol,
                                    witness=[H[up].tolist()], probe_records=records)
    if S.flags.balanced:
        Hm = oriented_hessian(phi, x, S, seed=seed).H
        method = "hessian"
    else:
        Hm = quadratic_model(phi, x, S, seed=seed).H
        method = "quadratic_model"
    d = definiteness_on_S(Hm, S, probes=probes, seed=seed, tol=def_tol)
    verdict = {STRONGLY_NEGATIVE: STRICT_MAX, STRONGLY_POSITIVE: STRICT_MIN,
               INDEFINITE: NO_EXTREMUM}.get(d.verdict, INCONCLUSIVE)
    return CriticalPointVerdict(verdict, g.g.tolist(), gnorm, tol, d, Hm.tolist(), method,
                                d.witnesses, records, _agrees(verdict, records))


@dataclass(frozen=True)
class SufficientConditionVerdict:
    verdict: str
    hypothesis_holds: bool
    slope: float
    radii: list
    residuals: list
    definiteness: DefinitenessVerdict
    probe_records: list
    witnesses: list

    def to_dict(self):
        return {"class": self.verdict, "hypothesis_holds": self.hypothesis_holds,
                "slope": self.slope, "radii": self.radii, "residuals": self.residuals,
                "definiteness": self.definiteness.to_dict(), "probe_records": self.probe_records,
                "witnesses": self.witnesses}


def sufficient_condition_quadratic(phi: ScalarField, x, S: DirectionSet, L, seed=0, probes=256,
                                   levels=8, slope_threshold=2.3, tol=DEF_TOL
                                   ) -> SufficientConditionVerdict:
    """Second-order sufficient conditions with a given quadratic form L.

    Strongly negative L: tests phi(x+h) <= phi(x) + L(h,h)/2 + o(|h|^2) through
    the decay of the positive part of the residual, then confirms the strict
    maximum by sign probes. Indefinite L: tests the two-sided expansion and the
    opposite signs along the witnesses.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    L = np.asarray(L, dtype=float)
    L = 0.5 * (L + L.T)
    d = definiteness_on_S(L, S, seed=seed, tol=tol)
    if d.verdict not in (STRONGLY_NEGATIVE, INDEFINITE):
        raise PreconditionError(f"L must be strongly negative definite or indefinite on S, "
                                f"got {d.verdict}")
    r0 = _probe_radius(phi, S, x, seed, r0=0.1)
    radii = r0 * 0.5 ** np.arange(levels)
    H = _unit_directions(S, probes, seed)
    f0 = evaluate(phi, x)
    res, floors = [], []
    for r in radii:
        Hr = r * H
        v, ok = phi.eval_many(x + Hr)
        q = 0.5 * np.einsum("ni,ij,nj->n", Hr, L, Hr)
        e = v[ok] - f0 - q[ok]
        e = np.maximum(e, 0.0) if d.verdict == STRONGLY_NEGATIVE else np.abs(e)
        res.append(float(e.max()))
        floors.append(FLOOR_FACTOR * EPS * (abs(f0) + np.abs(v[ok]).max()))
    res_a, fl = np.array(res), np.array(floors)
    above = res_a > fl
    if above.sum() >= 2:
        slope = float(np.polyfit(np.log(radii[above]), np.log(res_a[above]), 1)[0])
    elif above.sum() == 0:
        slope = math.inf
    else:
        slope = math.nan
    holds = bool(slope > slope_threshold)
    records = _probe_signs(phi, x, S, (radii[-3], radii[-1]), probes, seed + 1)
    witnesses = d.witnesses
    verdict = INCONCLUSIVE
    if holds and d.verdict == STRONGLY_NEGATIVE:
        if _agrees(STRICT_MAX, records):
            verdict = STRICT_MAX
    elif holds:
        t = radii[-1]
        up = evaluate(phi, x + t * np.asarray(witnesses[0])) - f0
        down = evaluate(phi, x + t * np.asarray(witnesses[1])) - f0
        if up > 0 > down:
            verdict = NO_EXTREMUM
    return SufficientConditionVerdict(verdict, holds, slope, radii.tolist(), res, d, records,
                                      witnesses)
