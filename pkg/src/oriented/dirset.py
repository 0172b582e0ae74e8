"""Star-convex direction sets S (center 0) in R^d.

Membership is the ground truth. Samplers and projectors are auxiliary and are
cross-checked against ``contains`` in the test suite.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import UnsupportedOperationError

# relative tolerance for membership in measure-zero sets (cones, subspaces)
MEMBER_TOL = 1e-10


@dataclass(frozen=True)
class Flags:
    balanced: bool
    positively_homogeneous: bool
    convex: bool
    closed: bool

    def __and__(self, other):
        return Flags(
            self.balanced and other.balanced,
            self.positively_homogeneous and other.positively_homogeneous,
            self.convex and other.convex,
            self.closed and other.closed,
        )


ALL_FLAGS = Flags(True, True, True, True)


@dataclass(frozen=True)
class SInteriorVerdict:
    member: bool
    delta: float
    probes: int


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _shrink_into_ball(points, radius):
    """Pull points with |h| >= radius (rounding artefacts) strictly inside."""
    norms = np.linalg.norm(points, axis=1)
    bad = norms >= radius
    if bad.any():
        points[bad] *= (radius * (1 - 1e-12) / norms[bad])[:, None]
    return points


def uniform_ball(rng, count, dim, radius):
    """``count`` points uniformly distributed in the open ball B_radius(0) of R^dim."""
    if dim == 0:
        return np.zeros((count, 0))
    g = rng.standard_normal((count, dim))
    norms = np.linalg.norm(g, axis=1)
    norms[norms == 0] = 1.0
    u = rng.random(count) ** (1.0 / dim)
    return _shrink_into_ball(g / norms[:, None] * (radius * u)[:, None], radius)


def orthonormalize(rows, tol=1e-8):
    """Orthonormal d x k matrix whose columns span the given vectors (rows)."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.size == 0:
        return np.zeros((rows.shape[1] if rows.ndim == 2 else 0, 0))
    _, s, vt = np.linalg.svd(rows, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros((rows.shape[1], 0))
    keep = s > tol * s[0]
    return canonical_signs(vt[keep].T)


def canonical_signs(O):
    """Flip columns so that each column's first nonzero entry is positive."""
    O = np.array(O, dtype=float)
    for j in range(O.shape[1]):
        nz = np.flatnonzero(np.abs(O[:, j]) > 1e-12)
        if nz.size and O[nz[0], j] < 0:
            O[:, j] = -O[:, j]
    return O


class DirectionSet:
    """Base class. Subclasses are immutable after construction."""

    kind = "abstract"

    def __init__(self, dim, flags):
        self.dim = int(dim)
        self.flags = flags

    # --- membership -------------------------------------------------------
    def contains_many(self, H) -> np.ndarray:
        raise NotImplementedError

    def contains(self, h) -> bool:
        h = np.asarray(h, dtype=float).reshape(1, self.dim)
        return bool(self.contains_many(h)[0])

    # --- sampling ---------------------------------------------------------
    def _sample(self, rng, count, radius):
        raise NotImplementedError

    def sample(self, radius, count=1, seed=None) -> np.ndarray:
        """``count`` points of B_radius(0) intersected with S; deterministic in ``seed``."""
        if radius <= 0:
            raise ValueError("radius must be positive")
        return self._sample(_rng(seed), int(count), float(radius))

    # --- projection -------------------------------------------------------
    @property
    def has_projector(self) -> bool:
        return False

    def _project(self, X):
        raise UnsupportedOperationError(f"no exact projector for kind {self.kind!r}")

    def project(self, x) -> np.ndarray:
        """Metric projection onto S (closed convex kinds only)."""
        if not self.has_projector:
            raise UnsupportedOperationError(
                f"no exact projector for {self.kind!r} (needs a closed convex set of a supported kind)"
            )
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        out = self._project(np.atleast_2d(x).reshape(-1, self.dim))
        return out[0] if single else out

    # --- misc -------------------------------------------------------------
    @property
    def radius_cap(self) -> float:
        """Largest radius r for which B_r(0) cap S looks like a cone (inf if homogeneous)."""
        return math.inf

    @property
    def is_subspace(self) -> bool:
        f = self.flags
        return f.balanced and f.convex and f.positively_homogeneous

    def to_spec(self) -> dict:
        raise NotImplementedError

    def __repr__(self):
        return f"DirectionSet({json.dumps(self.to_spec())})"


class FullSet(DirectionSet):
    kind = "full"

    def __init__(self, dim):
        super().__init__(dim, ALL_FLAGS)

    def contains_many(self, H):
        return np.ones(H.shape[0], dtype=bool)

    def _sample(self, rng, count, radius):
        return uniform_ball(rng, count, self.dim, radius)

    has_projector = True

    def _project(self, X):
        return X.copy()

    def to_spec(self):
        return {"kind": "full", "dim": self.dim}


class ZeroSet(DirectionSet):
    kind = "zero"

    def __init__(self, dim):
        super().__init__(dim, ALL_FLAGS)

    def contains_many(self, H):
        return np.all(H == 0, axis=1)

    def _sample(self, rng, count, radius):
        return np.zeros((count, self.dim))

    has_projector = True

    def _project(self, X):
        return np.zeros_like(X)

    def to_spec(self):
        return {"kind": "zero", "dim": self.dim}


class Orthant(DirectionSet):
    """Product of [0, R[ (sign +1) or ]-R, 0] (sign -1) per axis."""

    kind = "orthant"

    def __init__(self, signs, R=None):
        signs = np.asarray(signs, dtype=float)
        if signs.ndim != 1 or signs.size == 0 or not np.all(np.abs(signs) == 1):
            raise ValueError("orthant signs must be a nonempty list of +1/-1")
        self.signs = _readonly(signs)
        self.R = math.inf if R is None else float(R)
        if self.R <= 0:
            raise ValueError("orthant R must be positive")
        finite = math.isfinite(self.R)
        super().__init__(signs.size, Flags(False, not finite, True, not finite))

    def contains_many(self, H):
        s = H * self.signs
        ok = np.all(s >= 0, axis=1)
        if math.isfinite(self.R):
            ok &= np.all(s < self.R, axis=1)
        return ok

    def _sample(self, rng, count, radius):
        return np.abs(uniform_ball(rng, count, self.dim, min(radius, self.R))) * self.signs

    @property
    def has_projector(self):
        return not math.isfinite(self.R)

    def _project(self, X):
        return np.maximum(X * self.signs, 0.0) * self.signs

    @property
    def radius_cap(self):
        return self.R

    def to_spec(self):
        return {"kind": "orthant", "signs": [int(s) for s in self.signs],
                "R": None if not math.isfinite(self.R) else self.R}


class HalfSpace(DirectionSet):
    """{h : <n, h> >= 0}."""

    kind = "halfspace"

    def __init__(self, normal):
        n = np.asarray(normal, dtype=float).reshape(-1)
        norm = np.linalg.norm(n)
        if norm == 0:
            raise ValueError("halfspace normal must be nonzero")
        self.normal = _readonly(n / norm)
        super().__init__(n.size, Flags(False, True, True, True))

    def contains_many(self, H):
        return H @ self.normal >= -MEMBER_TOL * np.linalg.norm(H, axis=1)

    def _sample(self, rng, count, radius):
        P = uniform_ball(rng, count, self.dim, radius)
        s = P @ self.normal
        return P - 2 * np.minimum(s, 0.0)[:, None] * self.normal

    has_projector = True

    def _project(self, X):
        s = X @ self.normal
        return X - np.minimum(s, 0.0)[:, None] * self.normal

    def to_spec(self):
        return {"kind": "halfspace", "normal": self.normal.tolist()}


class Ball(DirectionSet):
    """Closed ball of the given radius."""

    kind = "ball"

    def __init__(self, dim, radius):
        self.radius = float(radius)
        if self.radius <= 0:
            raise ValueError("ball radius must be positive")
        super().__init__(dim, Flags(True, False, True, True))

    def contains_many(self, H):
        return np.linalg.norm(H, axis=1) <= self.radius * (1 + 1e-14)

    def _sample(self, rng, count, radius):
        return uniform_ball(rng, count, self.dim, min(radius, self.radius))

    has_projector = True

    def _project(self, X):
        norms = np.linalg.norm(X, axis=1)
        scale = np.where(norms > self.radius, self.radius / np.where(norms > 0, norms, 1), 1.0)
        return X * scale[:, None]

    @property
    def radius_cap(self):
        return self.radius

    def to_spec(self):
        return {"kind": "ball", "dim": self.dim, "radius": self.radius}


class Cone(DirectionSet):
    """Conic hull {t v : t >= 0} of a single nonzero vector."""

    kind = "cone"

    def __init__(self, vector):
        v = np.asarray(vector, dtype=float).reshape(-1)
        norm = np.linalg.norm(v)
        if norm == 0:
            raise ValueError("cone generator must be nonzero")
        self.unit = _readonly(v / norm)
        super().__init__(v.size, Flags(False, True, True, True))

    def contains_many(self, H):
        t = H @ self.unit
        resid = np.linalg.norm(H - t[:, None] * self.unit, axis=1)
        scale = np.linalg.norm(H, axis=1)
        return (t >= -MEMBER_TOL * scale) & (resid <= MEMBER_TOL * scale)

    def _sample(self, rng, count, radius):
        return (radius * rng.random(count))[:, None] * self.unit

    has_projector = True

    def _project(self, X):
        return np.maximum(X @ self.unit, 0.0)[:, None] * self.unit

    def to_spec(self):
        return {"kind": "cone", "vector": self.unit.tolist()}


class LinearSpan(DirectionSet):
    """The linear subspace spanned by the given vectors."""

    kind = "linear"

    def __init__(self, basis, dim=None):
        rows = np.atleast_2d(np.asarray(basis, dtype=float))
        if dim is None:
            dim = rows.shape[1]
        if rows.size and rows.shape[1] != dim:
            raise ValueError("basis rows must have length dim")
        self.O = _readonly(orthonormalize(rows) if rows.size else np.zeros((dim, 0)))
        self.P = _readonly(self.O @ self.O.T)
        super().__init__(dim, ALL_FLAGS)

    def contains_many(self, H):
        resid = np.linalg.norm(H - H @ self.P, axis=1)
        return resid <= MEMBER_TOL * np.linalg.norm(H, axis=1)

    def _sample(self, rng, count, radius):
        k = self.O.shape[1]
        return uniform_ball(rng, count, k, radius) @ self.O.T

    has_projector = True

    def _project(self, X):
        return X @ self.P

    def to_spec(self):
        return {"kind": "linear", "dim": self.dim, "basis": self.O.T.tolist()}


class Block(DirectionSet):
    """Embeds an inner set acting on the coordinates ``indices``; other coordinates are 0."""

    kind = "block"

    def __init__(self, dim, indices, inner: DirectionSet):
        idx = np.asarray(indices, dtype=int).reshape(-1)
        if idx.size != inner.dim:
            raise ValueError("block indices must match the inner set dimension")
        if idx.size and (idx.min() < 0 or idx.max() >= dim or np.unique(idx).size != idx.size):
            raise ValueError("block indices must be distinct and within range")
        self.indices = idx
        self.inner = inner
        self._rest = np.setdiff1d(np.arange(dim), idx)
        super().__init__(dim, inner.flags)

    def contains_many(self, H):
        rest = np.linalg.norm(H[:, self._rest], axis=1) if self._rest.size else 0.0
        ok = rest <= 1e-14 * np.linalg.norm(H, axis=1)
        return ok & self.inner.contains_many(H[:, self.indices])

    def _embed(self, Y):
        out = np.zeros((Y.shape[0], self.dim))
        out[:, self.indices] = Y
        return out

    def _sample(self, rng, count, radius):
        return self._embed(self.inner._sample(rng, count, radius))

    @property
    def has_projector(self):
        return self.inner.has_projector

    def _project(self, X):
        return self._embed(self.inner._project(X[:, self.indices]))

    @property
    def radius_cap(self):
        return self.inner.radius_cap

    def to_spec(self):
        return {"kind": "block", "dim": self.dim, "indices": self.indices.tolist(),
                "inner": self.inner.to_spec()}


class ProductSet(DirectionSet):
    """Cartesian product T1 x ... x Tn with T_i in R^{d_i}."""

    kind = "product"

    def __init__(self, components):
        if not components:
            raise ValueError("product needs at least one component")
        self.components = tuple(components)
        self._splits = np.cumsum([c.dim for c in components])[:-1]
        flags = ALL_FLAGS
        for c in components:
            flags = flags & c.flags
        super().__init__(sum(c.dim for c in components), flags)

    def _parts(self, H):
        return np.split(H, self._splits, axis=1)

    def contains_many(self, H):
        return np.logical_and.reduce(
            [c.contains_many(p) for c, p in zip(self.components, self._parts(H))]
        )

    def _sample(self, rng, count, radius):
        r = radius / math.sqrt(len(self.components))
        return np.hstack([c._sample(rng, count, r) for c in self.components])

    @property
    def has_projector(self):
        return self.flags.convex and self.flags.closed and all(
            c.has_projector for c in self.components
        )

    def _project(self, X):
        return np.hstack([c._project(p) for c, p in zip(self.components, self._parts(X))])

    @property
    def radius_cap(self):
        return min(c.radius_cap for c in self.components)

    def to_spec(self):
        return {"kind": "product", "components": [c.to_spec() for c in self.components]}


class OrthoSumSet(DirectionSet):
    """S_1 + ... + S_n for pairwise orthogonal S_i in the same R^d.

    Built through :func:`oriented.span.orthosum`, which verifies orthogonality and
    attaches one span basis per component.
    """

    kind = "orthosum"

    def __init__(self, components, bases):
        self.components = tuple(components)
        self.bases = tuple(bases)
        self._P = [b.O @ b.O.T for b in bases]
        self._PV = sum(self._P) if self._P else np.zeros((components[0].dim,) * 2)
        flags = ALL_FLAGS
        for c in components:
            flags = flags & c.flags
        super().__init__(components[0].dim, flags)

    def contains_many(self, H):
        scale = np.linalg.norm(H, axis=1)
        ok = np.linalg.norm(H - H @ self._PV, axis=1) <= MEMBER_TOL * np.maximum(scale, 1e-300)
        ok |= scale == 0
        for c, P in zip(self.components, self._P):
            ok &= c.contains_many(H @ P)
        return ok

    def _sample(self, rng, count, radius):
        r = radius / math.sqrt(len(self.components))
        return sum(c._sample(rng, count, r) for c in self.components)

    @property
    def has_projector(self):
        return self.flags.convex and self.flags.closed and all(
            c.has_projector for c in self.components
        )

    def _project(self, X):
        return sum(c._project(X) for c in self.components)

    @property
    def radius_cap(self):
        return min(c.radius_cap for c in self.components)

    def to_spec(self):
        return {"kind": "orthosum", "components": [c.to_spec() for c in self.components]}


# --- construction -----------------------------------------------------------

def make_direction_set(spec, dim=None) -> DirectionSet:
    """Build a set from a JSON-style dict (or mini-syntax string, see :func:`parse_set`).

    Indices in dicts are 0-based: ``{"kind": "halfspace", "axis": 0, "dim": 2}``.
    """
    if isinstance(spec, DirectionSet):
        return spec
    if isinstance(spec, str):
        text = spec.strip()
        if text.startswith("{"):
            return make_direction_set(json.loads(text), dim)
        return parse_set(text, dim)
    kind = spec["kind"]
    d = spec.get("dim", dim)
    if kind == "full":
        return FullSet(_need(d, kind))
    if kind == "zero":
        return ZeroSet(_need(d, kind))
    if kind == "orthant":
        return Orthant(spec["signs"], spec.get("R"))
    if kind == "halfspace":
        if "normal" in spec:
            return HalfSpace(spec["normal"])
        n = np.zeros(_need(d, kind))
        n[int(spec["axis"])] = float(spec.get("sign", 1))
        return HalfSpace(n)
    if kind == "ball":
        return Ball(_need(d, kind), spec.get("radius", 1.0))
    if kind == "cone":
        return Cone(spec["vector"])
    if kind == "linear":
        basis = spec.get("basis", [])
        if not basis:
            return ZeroSet(_need(d, kind))
        return LinearSpan(basis, d)
    if kind == "block":
        inner = make_direction_set(spec["inner"], len(spec["indices"]))
        return Block(_need(d, kind), spec["indices"], inner)
    if kind == "product":
        return ProductSet([make_direction_set(c) for c in spec["components"]])
    if kind == "orthosum":
        from .span import orthosum

        comps = [make_direction_set(c, d) for c in spec["components"]]
        return orthosum(comps).total
    raise ValueError(f"unknown direction set kind {kind!r}")


def _need(d, kind):
    if d is None:
        raise ValueError(f"set kind {kind!r} needs a dimension")
    return int(d)


def _split_top(text, sep="&"):
    parts, depth, start = [], 0, 0
    for i, ch in enumerate(text):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == sep and depth == 0:
            parts.append(text[start:i].strip())
            start = i + 1
    parts.append(text[start:].strip())
    return [p for p in parts if p]


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def parse_set(text, dim=None) -> DirectionSet:
    """Parse the CLI mini-syntax.

    ``full[:d] | zero[:d] | orthant:+-...[:R] | halfspace:k[:d] | ball:r[:d] |
    cone:v1,...,vd | linear:row;row... | product(A & B ...) | orthosum(A & B ...)``

    Axis numbers (``halfspace:k``, ``e<k>`` rows) are 1-based like ``x1..xd``.
    """
    text = text.strip()
    m = re.fullmatch(r"(product|orthosum)\((.*)\)", text, re.S)
    if m:
        kind, inner = m.groups()
        if kind == "product":
            return ProductSet([parse_set(p) for p in _split_top(inner)])
        from .span import orthosum

        return orthosum([parse_set(p, dim) for p in _split_top(inner)]).total
    head, _, rest = text.partition(":")
    args = rest.split(":") if rest else []
    try:
        if head == "full":
            return FullSet(int(args[0]) if args else _need(dim, head))
        if head == "zero":
            return ZeroSet(int(args[0]) if args else _need(dim, head))
        if head == "orthant":
            signs = [1.0 if ch == "+" else -1.0 for ch in args[0] if ch in "+-"]
            if len(signs) != len(args[0].replace(",", "").strip()):
                raise ValueError("orthant signs must be '+' or '-'")
            if dim is not None and len(signs) == 1 and dim > 1:
                signs = signs * dim
            R = float(args[1]) if len(args) > 1 and args[1] not in ("", "inf") else None
            return Orthant(signs, R)
        if head == "halfspace":
            d = int(args[1]) if len(args) > 1 else _need(dim, head)
            k = int(args[0]) if args else d
            n = np.zeros(d)
            n[k - 1] = 1.0
            return HalfSpace(n)
        if head == "ball":
            d = int(args[1]) if len(args) > 1 else _need(dim, head)
            return Ball(d, float(args[0]) if args and args[0] else 1.0)
        if head == "cone":
            return Cone(_floats(args[0]))
        if head == "linear":
            rows = []
            for row in args[0].split(";"):
                row = row.strip()
                if re.fullmatch(r"e\d+", row):
                    d = _need(dim, head)
                    v = np.zeros(d)
                    v[int(row[1:]) - 1] = 1.0
                    rows.append(v)
                elif row:
                    rows.append(_floats(row))
            return LinearSpan(rows, dim)
    except (IndexError, ValueError) as exc:
        raise ValueError(f"bad direction set {text!r}: {exc}") from exc
    raise ValueError(f"unknown direction set {text!r}")


# --- operations -----------------------------------------------------------

def project_convex(S: DirectionSet, x) -> np.ndarray:
    return S.project(x)


def sample_directions(S: DirectionSet, count, radius, seed=None) -> np.ndarray:
    """``count`` probe points in B_radius(0) cap S; the zero set yields the single point 0."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if isinstance(S, ZeroSet):
        return np.zeros((1, S.dim))
    return S.sample(radius, count, seed)


def _batched_domain(U, dim):
    if hasattr(U, "domain_many"):
        return U.domain_many
    if U is None:
        return lambda X: np.ones(X.shape[0], dtype=bool)

    def batched(X):
        return np.fromiter((bool(U(row)) for row in X), dtype=bool, count=X.shape[0])

    return batched


def s_interior_contains(U, S: DirectionSet, x, probe_budget=64, delta0=1.0,
                        halvings=40, seed=0) -> SInteriorVerdict:
    """Search delta over delta0 * 2^-j for which x + B_delta(0) cap S stays in U.

    ``U`` is a point predicate, ``None`` (all of R^d), or a field (its domain is
    used). A negative verdict means "not verified", not a disproof.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    inside = _batched_domain(U, S.dim)
    if not inside(x[None, :])[0]:
        return SInteriorVerdict(False, 0.0, 1)
    rng = _rng(seed)
    probes = 0
    for j in range(halvings + 1):
        delta = delta0 * 2.0 ** (-j)
        H = S.sample(delta, probe_budget, rng)
        probes += H.shape[0]
        if np.all(inside(x + H)):
            return SInteriorVerdict(True, delta, probes)
    return SInteriorVerdict(False, 0.0, probes)


def flag_violations(S: DirectionSet, probes=1000, seed=0) -> dict:
    """Count sampled counterexamples to each structural flag S claims."""
    rng = _rng(seed)
    H = S.sample(1.0, probes, rng)
    out = {"star": int(np.sum(~S.contains_many(H * rng.random(probes)[:, None])))}
    if S.flags.balanced:
        out["balanced"] = int(np.sum(~S.contains_many(-H)))
    if S.flags.positively_homogeneous:
        t = rng.exponential(10.0, probes)
        out["positively_homogeneous"] = int(np.sum(~S.contains_many(H * t[:, None])))
    if S.flags.convex:
        G = S.sample(1.0, probes, rng)
        t = rng.random(probes)[:, None]
        out["convex"] = int(np.sum(~S.contains_many(t * H + (1 - t) * G)))
    return out
