"""Finite-difference estimation of S-oriented derivatives.

The gradient estimator fits phi(x + h) - phi(x) ~ <g, O^T h> by least squares
over probe directions h in S at a geometric sequence of radii, reusing the same
directions (scaled) at every radius. The per-level estimates are then a power
series in the radius, so polynomial extrapolation to radius 0 removes the
one-sided bias. The decay of the remainder max_h |phi(x+h) - phi(x) - <g, h>|
across radii is the differentiability diagnostic.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dirset import DirectionSet, ZeroSet, s_interior_contains, uniform_ball
from .errors import (
    ConditioningError,
    DomainError,
    NonconvergenceError,
    PreconditionError,
    UnsupportedOperationError,
)
from .fields import ScalarField, VectorField
from .span import SpanBasis, span_basis

EPS = np.finfo(float).eps
SLOPE_THRESHOLD = 1.3
# remainders below FLOOR_FACTOR * eps * |phi| are treated as rounding noise
FLOOR_FACTOR = 1e3

CONSISTENT = "differentiable_consistent"
INCONSISTENT = "inconsistent"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class StepSchedule:
    """Radii t0 * factor**j, j < levels, extrapolated with ``richardson_order`` terms."""

    t0: float = 1e-2
    factor: float = 0.5
    levels: int = 10
    richardson_order: int = 2

    def __post_init__(self):
        if not self.t0 > 0:
            raise ValueError("t0 must be positive")
        if not 0 < self.factor < 1:
            raise ValueError("factor must lie in (0, 1)")
        if self.levels < 3:
            raise ValueError("levels must be >= 3")
        if not 0 <= self.richardson_order <= self.levels - 2:
            raise ValueError("richardson_order must be in [0, levels - 2]")

    def steps(self, t0=None):
        return (self.t0 if t0 is None else t0) * self.factor ** np.arange(self.levels)


DEFAULT_SCHEDULE = StepSchedule()
HESSIAN_SCHEDULE = StepSchedule(t0=0.05, factor=0.5, levels=6, richardson_order=2)
_TENSOR_T0 = {2: 0.05, 3: 0.1, 4: 0.2}


# --- extrapolation ----------------------------------------------------------

def neville_zero(z, values):
    """Value at z = 0 of the polynomial interpolating ``values[i]`` at ``z[i]``.

    ``values`` has shape (m, ...); the interpolation acts on the leading axis.
    """
    p = [np.asarray(v, dtype=float) for v in values]
    z = list(z)
    m = len(p)
    for span in range(1, m):
        p = [(z[i] * p[i + 1] - z[i + span] * p[i]) / (z[i] - z[i + span]) for i in range(m - span)]
    return p[0]


def extrapolate(z, values, order):
    """Sliding-window extrapolation to z = 0.

    Returns (estimates, errors, best): ``estimates[i]`` extrapolates levels
    i..i+order; ``errors[i]`` is the max-abs change from the previous window
    (trailing axes reduced except the second, the batch axis, if ``values`` is
    at least 2-d), and ``best`` picks the window with the smallest error.
    """
    values = np.asarray(values, dtype=float)
    L = values.shape[0]
    est = np.stack([neville_zero(z[i:i + order + 1], values[i:i + order + 1])
                    for i in range(L - order)])
    diff = np.abs(np.diff(est, axis=0))
    if values.ndim >= 2:
        red = tuple(range(2, values.ndim))
        err = diff.max(axis=red) if red else diff
    else:
        err = diff
    # window 0 has no predecessor: borrow the error of window 1
    err = np.concatenate([err[:1], err], axis=0)
    best = np.argmin(err, axis=0)
    return est, err, best


def _loglog_slope(r, rho, floor):
    """Least-squares slope of log rho vs log r over entries above the floor."""
    above = rho > floor
    n = int(above.sum())
    if n == 0:
        return math.inf, 0
    if n == 1:
        i = int(np.flatnonzero(above)[0])
        if i + 1 < len(r):
            return float(np.log(rho[i] / floor[i + 1]) / np.log(r[i] / r[i + 1])), 1
        return math.nan, 1
    lr, lp = np.log(r[above]), np.log(rho[above])
    slope = np.polyfit(lr, lp, 1)[0]
    return float(slope), n


# --- result types -----------------------------------------------------------

@dataclass(frozen=True)
class DirectionalDerivative:
    value: float
    order: float
    quotients: list
    steps: list
    skipped_levels: list
    error_estimate: float


@dataclass(frozen=True)
class OrientedDerivative:
    """Estimate of the S-gradient with the fit diagnostics."""

    x: np.ndarray
    g: np.ndarray
    basis: SpanBasis
    coords: np.ndarray
    residuals: list
    remainders: list
    radii: list
    slope: float
    verdict: str
    error_estimate: float
    cauchy: bool
    skipped_probes: int = 0
    condition: float = 1.0
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class OrientedOperator:
    """D_S phi(x) for a vector field: ``matrix`` (m x k, basis coordinates) and
    ``ambient`` = matrix @ O^T (m x d)."""

    x: np.ndarray
    matrix: np.ndarray
    ambient: np.ndarray
    basis: SpanBasis
    slope: float
    verdict: str
    error_estimate: float
    skipped_probes: int = 0


@dataclass(frozen=True)
class DifferentiabilityDiagnostic:
    verdict: str
    slope: float
    slope_threshold: float
    radii: list
    remainders: list
    floors: list
    levels_used: int
    cauchy: bool
    gradient: np.ndarray


@dataclass(frozen=True)
class OrientedHessian:
    x: np.ndarray
    H: np.ndarray
    basis: SpanBasis
    symmetry_defect: float
    coords: np.ndarray
    error_estimate: float
    noise: float


@dataclass(frozen=True)
class HigherDerivative:
    x: np.ndarray
    order: int
    tensor: np.ndarray
    basis: SpanBasis
    error_estimate: float
    precision_warning: bool

    def apply(self, *hs):
        """D^n phi(x)(h_1, ..., h_n); a single argument is repeated n times."""
        if len(hs) == 1:
            hs = hs * self.order
        T = self.tensor
        for h in hs:
            T = np.tensordot(self.basis.coords(h), T, axes=(0, 0))
        return float(T)


@dataclass(frozen=True)
class QuadraticModel:
    x: np.ndarray
    g: np.ndarray
    H: np.ndarray
    coords_g: np.ndarray
    coords_H: np.ndarray
    basis: SpanBasis
    error_estimate: float


# --- helpers ----------------------------------------------------------------

def _vector_eval(fld):
    if isinstance(fld, VectorField):
        return fld.eval_many, fld.dim_out
    if isinstance(fld, ScalarField):

        def ev(X):
            v, ok = fld.eval_many(X)
            return v[:, None], ok

        return ev, 1
    raise TypeError("expected a ScalarField or VectorField")


def _interior_radius(fld, S, x, seed):
    verdict = s_interior_contains(fld, S, x, seed=seed)
    if not verdict.member:
        raise PreconditionError(
            "point not verified to lie in the S-interior of the domain",
            point=np.asarray(x).tolist(), probes=verdict.probes,
        )
    return verdict.delta


def _resolve_basis(S, basis, seed):
    if basis is None:
        return span_basis(S, seed=seed)
    if not isinstance(basis, SpanBasis):
        basis = SpanBasis.from_columns(basis)
    return basis


def _draw_directions(S, radius, count, O, rng, max_tries=8):
    """Directions in B_radius cap S with a well-conditioned coordinate matrix."""
    best = None
    for _ in range(max_tries):
        W = S.sample(radius, count, rng)
        C = W @ O / radius
        s = np.linalg.svd(C, compute_uv=False)
        cond = s[0] / s[-1] if s[-1] > 0 else math.inf
        if best is None or cond < best[1]:
            best = (W, cond)
        if cond <= 1e4:
            break
    W, cond = best
    if cond > 1e8:
        raise ConditioningError(
            f"probe design condition number {cond:.3g} exceeds 1e8; increase fit_samples", cond
        )
    return W, cond


def _fit(ev, m_out, X0, W, O, radius, sched, slope_threshold):
    """Core least-squares fit, batched over base points ``X0`` (M x d).

    Returns one dict per base point.
    """
    M, d = X0.shape
    n, k = W.shape[0], O.shape[1]
    scales = sched.factor ** np.arange(sched.levels)
    radii = radius * scales
    L = len(scales)

    F0, ok0 = ev(X0)
    if not ok0.all():
        raise DomainError(X0[np.flatnonzero(~ok0)[0]])
    P = X0[:, None, None, :] + scales[None, :, None, None] * W[None, None, :, :]
    F, okF = ev(P.reshape(-1, d))
    F = F.reshape(M, L, n, m_out)
    valid = okF.reshape(M, L, n).all(axis=1)

    C = W @ O / radius
    out = []
    for b in range(M):
        rows = valid[b]
        if rows.sum() < max(k, 1):
            raise DomainError(X0[b], "too few probes inside the domain")
        Cb = C[rows]
        pinv = np.linalg.pinv(Cb)
        dF = F[b][:, rows, :] - F0[b]                   # (L, n_b, m)
        Q = dF / radii[:, None, None]
        G = np.einsum("kn,lnm->lkm", pinv, Q)           # (L, k, m)
        fit_res = np.abs(Q - np.einsum("nk,lkm->lnm", Cb, G)).max(axis=(1, 2))

        est, err, best = extrapolate(radii, G[:, None], sched.richardson_order)
        gk = est[best[0], 0]
        err_best = float(err[best[0], 0])

        rem = np.abs(dF - radii[:, None, None] * np.einsum("nk,km->nm", Cb, gk)[None]).max(axis=(1, 2))
        scale = np.abs(F0[b]).max() + np.abs(F[b][:, rows]).max(axis=(1, 2))
        floors = FLOOR_FACTOR * EPS * scale
        slope, used = _loglog_slope(radii, rem, floors)

        steps = np.abs(np.diff(G, axis=0)).max(axis=(1, 2))
        noise_g = 10 * floors[1:] / radii[1:]
        cauchy = bool(steps[-1] <= max(0.5 * steps[0], noise_g[-1]))

        if slope > slope_threshold and cauchy:
            verdict = CONSISTENT
        elif slope <= slope_threshold and used >= 3:
            verdict = INCONSISTENT
        else:
            verdict = INCONCLUSIVE
        out.append(dict(
            coords=gk, residuals=fit_res.tolist(), remainders=rem.tolist(),
            floors=floors.tolist(), radii=radii.tolist(), slope=slope, used=used,
            cauchy=cauchy, verdict=verdict, error=err_best,
            skipped=int(n - rows.sum()),
        ))
    return out


def _probe_radius(fld, S, x, sched, check_interior, seed):
    r = sched.t0
    if math.isfinite(S.radius_cap):
        r = min(r, S.radius_cap / 2)
    if check_interior:
        r = min(r, _interior_radius(fld, S, x, seed))
    return r


def _gradient_many(fld, X, S, sched, fit_samples, seed, basis, slope_threshold,
                   check_interior, directions=None):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    basis = _resolve_basis(S, basis, seed)
    k = basis.k
    ev, m_out = _vector_eval(fld)
    if k == 0 or isinstance(S, ZeroSet):
        F0, ok0 = ev(X)
        if not ok0.all():
            raise DomainError(X[np.flatnonzero(~ok0)[0]])
        zero = dict(coords=np.zeros((0, m_out)), residuals=[], remainders=[], floors=[],
                    radii=[], slope=math.inf, used=0, cauchy=True, verdict=CONSISTENT,
                    error=0.0, skipped=0)
        return basis, [dict(zero) for _ in X], 1.0
    n = 8 * k if fit_samples is None else int(fit_samples)
    if n < 4 * k:
        raise ValueError(f"fit_samples must be >= 4k = {4 * k}")
    radius = min(_probe_radius(fld, S, x, sched, check_interior, seed) for x in X)
    rng = np.random.default_rng(seed)
    if directions is None:
        W, cond = _draw_directions(S, radius, n, basis.O, rng)
    else:
        W = directions
        s = np.linalg.svd(W @ basis.O / radius, compute_uv=False)
        cond = s[0] / s[-1] if s[-1] > 0 else math.inf
        if cond > 1e8:
            raise ConditioningError(f"probe design condition number {cond:.3g} exceeds 1e8", cond)
    fits = _fit(ev, m_out, X, W, basis.O, radius, sched, slope_threshold)
    return basis, fits, float(cond)


def _to_derivative(x, basis, fit, cond):
    coords = fit["coords"][:, 0] if fit["coords"].size else np.zeros(basis.k)
    g = basis.O @ coords
    return OrientedDerivative(
        x=np.asarray(x, dtype=float), g=g, basis=basis, coords=coords,
        residuals=fit["residuals"], remainders=fit["remainders"], radii=fit["radii"],
        slope=fit["slope"], verdict=fit["verdict"], error_estimate=fit["error"],
        cauchy=fit["cauchy"], skipped_probes=fit["skipped"], condition=cond,
        diagnostics={"floors": fit["floors"], "levels_used": fit["used"]},
    )


# --- public operations ------------------------------------------------------

def directional_derivative_plus(fld: ScalarField, x, h, sched: StepSchedule = DEFAULT_SCHEDULE
                                ) -> DirectionalDerivative:
    """Right-hand derivative lim_{t -> 0+} (phi(x + t h) - phi(x)) / t."""
    x = np.asarray(x, dtype=float).reshape(-1)
    h = np.asarray(h, dtype=float).reshape(-1)
    if not np.any(h):
        raise ValueError("direction h must be nonzero")
    f0 = fld.eval_many(x[None, :])
    if not f0[1][0]:
        raise DomainError(x)
    f0 = f0[0][0]
    steps = sched.steps()
    vals, ok = fld.eval_many(x[None, :] + steps[:, None] * h[None, :])
    if not ok.any():
        raise DomainError(x + steps[0] * h, "every step leaves the domain")
    t, q = steps[ok], (vals[ok] - f0) / steps[ok]
    skipped = np.flatnonzero(~ok).tolist()
    scale = abs(f0) + np.max(np.abs(vals[ok]))
    noise = FLOOR_FACTOR * EPS * scale / t
    trace = q.tolist()

    diffs = np.abs(np.diff(q))
    if diffs.size >= 2:
        tail = diffs[-min(3, diffs.size):]
        settled = tail[-1] <= max(noise[-1], 0.6 * diffs[0]) and tail[-1] <= 1.1 * tail[0] + noise[-1]
        if not settled:
            raise NonconvergenceError("difference quotients are not Cauchy", trace)

    order = min(sched.richardson_order, len(t) - 1)
    if len(t) >= order + 2:
        est, err, best = extrapolate(t, q, order)
        value, error = float(est[best]), float(err[best])
    else:
        value, error = float(q[-1]), math.nan

    real = diffs > noise[1:]
    if real.sum() >= 2:
        d = diffs[real]
        tt = t[1:][real]
        obs = np.log(d[:-1] / d[1:]) / np.log(tt[:-1] / tt[1:])
        obs_order = float(np.median(obs))
    else:
        obs_order = math.inf
    return DirectionalDerivative(value, obs_order, trace, t.tolist(), skipped, error)


def oriented_gradient(fld: ScalarField, x, S: DirectionSet, sched: StepSchedule = DEFAULT_SCHEDULE,
                      fit_samples: Optional[int] = None, seed=0, basis=None,
                      slope_threshold=SLOPE_THRESHOLD, check_interior=True) -> OrientedDerivative:
    """Estimate the S-gradient of a scalar field at x.

    S = {0} returns exactly 0. ``basis`` may override the span basis of S (any
    orthonormal basis of the same V gives the same ambient gradient).
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != S.dim or fld.dim != S.dim:
        raise ValueError("dimension mismatch between field, point and set")
    basis, fits, cond = _gradient_many(fld, x[None, :], S, sched, fit_samples, seed, basis,
                                       slope_threshold, check_interior)
    return _to_derivative(x, basis, fits[0], cond)


def oriented_gradients(fld: ScalarField, X, S: DirectionSet, sched: StepSchedule = DEFAULT_SCHEDULE,
                       fit_samples=None, seed=0, basis=None, slope_threshold=SLOPE_THRESHOLD,
                       check_interior=True) -> list:
    """Batched :func:`oriented_gradient` at the rows of X with shared probe directions."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    basis, fits, cond = _gradient_many(fld, X, S, sched, fit_samples, seed, basis,
                                       slope_threshold, check_interior)
    return [_to_derivative(x, basis, f, cond) for x, f in zip(X, fits)]


def oriented_gradient_via_projection(fld: ScalarField, x, S: DirectionSet,
                                     sched: StepSchedule = DEFAULT_SCHEDULE, fit_samples=None,
                                     seed=0, basis=None) -> OrientedDerivative:
    """S-gradient fitted on probes p_S(h) with h uniform in a full ball.

    Uses the projection characterisation: phi(x + p(h)) = phi(x) + L(p(h)) + o(|h|).
    """
    if not S.has_projector:
        raise UnsupportedOperationError("set has no exact projector")
    x = np.asarray(x, dtype=float).reshape(-1)
    basis = _resolve_basis(S, basis, seed)
    if basis.k == 0:
        return oriented_gradient(fld, x, S, sched, fit_samples, seed, basis)
    n = 8 * basis.k if fit_samples is None else int(fit_samples)
    radius = _probe_radius(fld, S, x, sched, True, seed)
    rng = np.random.default_rng(seed + 1)
    W = np.empty((0, S.dim))
    while W.shape[0] < n:
        P = S.project(uniform_ball(rng, 4 * n, S.dim, radius))
        P = P[np.linalg.norm(P, axis=1) > 1e-3 * radius]
        W = np.vstack([W, P])
    W = W[:n]
    _, fits, cond = _gradient_many(fld, x[None, :], S, sched, n, seed, basis, SLOPE_THRESHOLD,
                                   False, directions=W)
    return _to_derivative(x, basis, fits[0], cond)


def oriented_derivative_operator(fld: VectorField, x, S: DirectionSet,
                                 sched: StepSchedule = DEFAULT_SCHEDULE, fit_samples=None, seed=0,
                                 basis=None, slope_threshold=SLOPE_THRESHOLD,
                                 check_interior=True) -> OrientedOperator:
    """D_S phi(x) for a vector field, one least-squares fit per output coordinate."""
    if isinstance(fld, ScalarField):
        fld = VectorField.from_scalar(fld)
    x = np.asarray(x, dtype=float).reshape(-1)
    basis, fits, _ = _gradient_many(fld, x[None, :], S, sched, fit_samples, seed, basis,
                                    slope_threshold, check_interior)
    fit = fits[0]
    M = fit["coords"].T if fit["coords"].size else np.zeros((fld.dim_out, 0))
    return OrientedOperator(x, M, M @ basis.O.T, basis, fit["slope"], fit["verdict"],
                            fit["error"], fit["skipped"])


def differentiability_diagnostic(fld: ScalarField, x, S: DirectionSet,
                                 sched: StepSchedule = DEFAULT_SCHEDULE, fit_samples=None, seed=0,
                                 slope_threshold=SLOPE_THRESHOLD) -> DifferentiabilityDiagnostic:
    """Verdict on S-differentiability at x from the decay of the linear remainder.

    ``differentiable_consistent`` requires a log-log slope above the threshold
    and Cauchy per-level estimates; remainders at rounding level everywhere give
    slope = inf (the field is affine on the probed part of S).
    """
    r = oriented_gradient(fld, x, S, sched, fit_samples, seed, slope_threshold=slope_threshold)
    return DifferentiabilityDiagnostic(
        verdict=r.verdict, slope=r.slope, slope_threshold=slope_threshold, radii=r.radii,
        remainders=r.remainders, floors=r.diagnostics.get("floors", []),
        levels_used=r.diagnostics.get("levels_used", 0), cauchy=r.cauchy, gradient=r.g,
    )


def _require_balanced(S):
    if not S.flags.balanced:
        raise PreconditionError(f"set kind {S.kind!r} is not balanced")


def _stencil_radius(fld, S, x, t0, reach, check_interior, seed):
    r = t0
    if math.isfinite(S.radius_cap):
        r = min(r, S.radius_cap / (2 * reach))
    if check_interior:
        r = min(r, _interior_radius(fld, S, x, seed) / (2 * reach))
    return r


def oriented_hessian(fld: ScalarField, x, S: DirectionSet, sched: StepSchedule = HESSIAN_SCHEDULE,
                     seed=0, basis=None, inner_ratio=0.1, check_interior=True) -> OrientedHessian:
    """S-Hessian by nested central differences.

    Entry (i, j) in basis coordinates differentiates the j-th directional
    derivative (inner step t = inner_ratio * s) along o_i (outer step s), so the
    stencil is not symmetric in (i, j) and ``symmetry_defect`` is informative.
    """
    _require_balanced(S)
    x = np.asarray(x, dtype=float).reshape(-1)
    basis = _resolve_basis(S, basis, seed)
    O, k = basis.O, basis.k
    if k == 0:
        return OrientedHessian(x, np.zeros((S.dim, S.dim)), basis, 0.0, np.zeros((0, 0)), 0.0, 0.0)
    s0 = _stencil_radius(fld, S, x, sched.t0, 1 + inner_ratio, check_interior, seed)
    for i in range(k):
        for sign in (1, -1):
            if not S.contains(sign * s0 * O[:, i]):
                raise PreconditionError("S does not contain the basis stencil; not locally a "
                                        "neighbourhood of 0 in V", direction=O[:, i].tolist())
    s = sched.steps(s0)
    t = inner_ratio * s
    signs = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]], dtype=float)
    w = signs[:, 0] * signs[:, 1]
    # points[l, i, j, c] = x + sig_c * s_l o_i + tau_c * t_l o_j
    pts = (x[None, None, None, None, :]
           + (signs[:, 0][None, None, None, :, None] * s[:, None, None, None, None]
              * O.T[None, :, None, None, :])
           + (signs[:, 1][None, None, None, :, None] * t[:, None, None, None, None]
              * O.T[None, None, :, None, :]))
    vals, ok = fld.eval_many(pts.reshape(-1, S.dim))
    if not ok.all():
        raise DomainError(pts.reshape(-1, S.dim)[np.flatnonzero(~ok)[0]])
    vals = vals.reshape(len(s), k, k, 4)
    G = (vals @ w) / (4 * s * t)[:, None, None]
    est, err, best = extrapolate(s ** 2, G[:, None], sched.richardson_order)
    Gc = est[best[0], 0]
    error = float(err[best[0], 0])
    H = O @ Gc @ O.T
    lvl = min(best[0] + sched.richardson_order, len(s) - 1)
    noise = float(4 * EPS * np.abs(vals).max() / (s[lvl] * t[lvl]))
    return OrientedHessian(x, H, basis, float(np.max(np.abs(H - H.T))), Gc, error, noise)


def _tensor_many(fld, X0, O, n, s):
    """n-th directional-derivative tensors (basis coordinates) at rows of X0 for steps s."""
    k = O.shape[1]
    combos = list(itertools.combinations_with_replacement(range(k), n))
    sig = np.array(list(itertools.product((1.0, -1.0), repeat=n)))
    w = np.prod(sig, axis=1)
    # offsets[c, q] = sum_a sig[q, a] * o_{combo[c][a]}
    offs = np.einsum("qa,cad->cqd", sig, O.T[np.array(combos)])
    M, d = X0.shape
    pts = X0[:, None, None, None, :] + s[None, :, None, None, None] * offs[None, None]
    vals, ok = fld.eval_many(pts.reshape(-1, d))
    if not ok.all():
        raise DomainError(pts.reshape(-1, d)[np.flatnonzero(~ok)[0]])
    vals = vals.reshape(M, len(s), len(combos), len(sig))
    T = (vals @ w) / (2 * s[None, :, None]) ** n
    return combos, T, np.abs(vals).max()


def _fill_symmetric(combos, values, k, n):
    T = np.zeros((k,) * n)
    for c, v in zip(combos, values):
        for perm in set(itertools.permutations(c)):
            T[perm] = v
    return T


def higher_derivatives(fld: ScalarField, X, S: DirectionSet, n: int, sched: StepSchedule = None,
                       seed=0, basis=None, tol=1e-6, check_interior=True) -> list:
    """Batched :func:`higher_derivative` at the rows of X with a shared step schedule."""
    _require_balanced(S)
    if not 2 <= n <= 4:
        raise ValueError("order n must be in 2..4")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    basis = _resolve_basis(S, basis, seed)
    O, k = basis.O, basis.k
    if k == 0:
        return [HigherDerivative(x, n, np.zeros((0,) * n), basis, 0.0, False) for x in X]
    if sched is None:
        sched = StepSchedule(t0=_TENSOR_T0[n], factor=0.5, levels=6, richardson_order=2)
    s0 = min(_stencil_radius(fld, S, x, sched.t0, n, check_interior, seed) for x in X)
    for i in range(k):
        if not S.contains(n * s0 * O[:, i]) or not S.contains(-n * s0 * O[:, i]):
            raise PreconditionError("S does not contain the tensor stencil",
                                    direction=O[:, i].tolist())
    s = sched.steps(s0)
    combos, T, _ = _tensor_many(fld, X, O, n, s)
    est, err, best = extrapolate(s ** 2, np.swapaxes(T, 0, 1), sched.richardson_order)
    out = []
    for b, x in enumerate(X):
        vals = est[best[b], b]
        e = float(err[best[b], b])
        out.append(HigherDerivative(x, n, _fill_symmetric(combos, vals, k, n), basis, e, e > tol))
    return out


def higher_derivative(fld: ScalarField, x, S: DirectionSet, n: int, sched: StepSchedule = None,
                      seed=0, basis=None, tol=1e-6, check_interior=True) -> HigherDerivative:
    """n-th S-derivative (2 <= n <= 4) as a symmetric tensor in basis coordinates.

    Entries are mixed central differences along basis directions, extrapolated
    in the squared step. ``precision_warning`` is set when the extrapolation
    error estimate exceeds ``tol``.
    """
    return higher_derivatives(fld, x, S, n, sched, seed, basis, tol, check_interior)[0]


def quadratic_model(fld: ScalarField, x, S: DirectionSet, sched: StepSchedule = HESSIAN_SCHEDULE,
                    samples=None, seed=0, basis=None, check_interior=True) -> QuadraticModel:
    """Least-squares fit phi(x+h) - phi(x) ~ <g, h> + 1/2 <H h, h> over h in S.

    Works for sets that are not balanced (orthants, half-spaces) where central
    stencils are unavailable.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    basis = _resolve_basis(S, basis, seed)
    O, k = basis.O, basis.k
    if k == 0:
        return QuadraticModel(x, np.zeros(S.dim), np.zeros((S.dim, S.dim)), np.zeros(0),
                              np.zeros((0, 0)), basis, 0.0)
    pairs = [(i, j) for i in range(k) for j in range(i, k)]
    p = k + len(pairs)
    n = 8 * p if samples is None else int(samples)
    radius = _probe_radius(fld, S, x, sched, check_interior, seed)
    rng = np.random.default_rng(seed)
    W, _ = _draw_directions(S, radius, n, O, rng)
    C = W @ O / radius
    quad = np.stack([C[:, i] * C[:, j] * (0.5 if i == j else 1.0) for i, j in pairs], axis=1)
    A = np.hstack([C, quad])
    sv = np.linalg.svd(A, compute_uv=False)
    if sv[-1] <= 1e-8 * sv[0]:
        raise ConditioningError("quadratic design is rank deficient on S", sv[0] / max(sv[-1], 1e-300))
    pinv = np.linalg.pinv(A)
    radii = sched.steps(radius)
    scales = radii / radius
    f0 = fld.eval_many(x[None, :])
    if not f0[1][0]:
        raise DomainError(x)
    vals, ok = fld.eval_many((x[None, None, :] + scales[:, None, None] * W[None]).reshape(-1, S.dim))
    if not ok.all():
        raise DomainError(x, "quadratic-model probes leave the domain")
    dF = vals.reshape(len(radii), n) - f0[0][0]
    theta = np.einsum("pn,ln->lp", pinv, dF)
    est_vec = np.hstack([theta[:, :k] / radii[:, None], theta[:, k:] / radii[:, None] ** 2])
    est, err, best = extrapolate(radii, est_vec[:, None], sched.richardson_order)
    v = est[best[0], 0]
    g_c = v[:k]
    Hc = np.zeros((k, k))
    for (i, j), val in zip(pairs, v[k:]):
        Hc[i, j] = Hc[j, i] = val
    return QuadraticModel(x, O @ g_c, O @ Hc @ O.T, g_c, Hc, basis, float(err[best[0], 0]))
