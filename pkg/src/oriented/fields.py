"""Scalar and vector fields on R^d with domain predicates.

Every field evaluates in batches: ``eval_many(X)`` takes an ``(n, d)`` array and
returns values plus a boolean mask of rows that were inside the domain and
evaluated cleanly. Single-point evaluation raises :class:`DomainError` instead.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np

from .errors import DomainError
from .expression import compile_expression, format_expression, parse_expression


def _as_batch(X, dim):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got shape {X.shape}")
    return X


def _as_point(x, dim):
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != dim:
        raise ValueError(f"expected a point of dimension {dim}, got {x.shape[0]}")
    return x


def _loop_predicate(pred):
    def batched(X):
        return np.fromiter((bool(pred(row)) for row in X), dtype=bool, count=X.shape[0])

    return batched


def _expression_predicate(text, dim):
    compiled = compile_expression(parse_expression(text, dim))

    def batched(X):
        v, ok = compiled(X)
        return ok & (v >= 0)

    return batched


@dataclass(frozen=True)
class ScalarField:
    """A map phi: U -> R with U given as a predicate on R^d.

    ``batch`` maps an ``(n, d)`` array of in-domain points to ``(values, ok)``;
    ``domain_batch`` maps an ``(n, d)`` array to a boolean mask (``None`` means
    all of R^d).
    """

    dim: int
    batch: Callable[[np.ndarray], tuple]
    domain_batch: Optional[Callable[[np.ndarray], np.ndarray]] = None
    label: str = ""
    expression: Any = None
    reference: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_expression(cls, text, dim, domain=None, label=None, reference=None):
        """Build a field from expression text; ``domain`` is an expression with
        ``value >= 0`` meaning inside, or a point predicate."""
        ast = parse_expression(text, dim)
        if isinstance(domain, str):
            domain_batch = _expression_predicate(domain, dim)
        elif domain is not None:
            domain_batch = _loop_predicate(domain)
        else:
            domain_batch = None
        return cls(
            dim=dim,
            batch=compile_expression(ast),
            domain_batch=domain_batch,
            label=label or format_expression(ast),
            expression=ast,
            reference=dict(reference or {}),
        )

    @classmethod
    def from_callable(cls, func, dim, domain=None, label="", vectorized=False, reference=None):
        """Wrap a Python callable. Non-vectorized callables get one row at a time;
        a :class:`DomainError` or non-finite result marks the row invalid."""
        if vectorized:

            def batch(X):
                with np.errstate(all="ignore"):
                    v = np.asarray(func(X), dtype=float).reshape(X.shape[0])
                return v, np.isfinite(v)

        else:

            def batch(X):
                v = np.empty(X.shape[0])
                ok = np.ones(X.shape[0], dtype=bool)
                for i, row in enumerate(X):
                    try:
                        v[i] = float(func(row))
                    except (DomainError, ValueError, ZeroDivisionError, ArithmeticError):
                        ok[i] = False
                        v[i] = np.nan
                return v, ok & np.isfinite(v)

        domain_batch = _loop_predicate(domain) if domain is not None else None
        return cls(dim, batch, domain_batch, label, None, dict(reference or {}))

    def domain_many(self, X) -> np.ndarray:
        X = _as_batch(X, self.dim)
        if self.domain_batch is None:
            return np.ones(X.shape[0], dtype=bool)
        return np.asarray(self.domain_batch(X), dtype=bool)

    def domain(self, x) -> bool:
        return bool(self.domain_many(_as_point(x, self.dim))[0])

    def eval_many(self, X):
        """Evaluate on rows of ``X``; returns ``(values, ok)``. The underlying map is
        only invoked on rows satisfying the domain predicate."""
        X = _as_batch(X, self.dim)
        inside = self.domain_many(X)
        values = np.full(X.shape[0], np.nan)
        ok = np.zeros(X.shape[0], dtype=bool)
        if inside.any():
            v, good = self.batch(X[inside])
            values[inside] = v
            ok[inside] = good
        values[~ok] = np.nan
        return values, ok

    def __call__(self, x) -> float:
        return evaluate(self, x)

    def scaled(self, c: float) -> "ScalarField":
        inner = self.batch

        def batch(X):
            v, ok = inner(X)
            return c * v, ok

        return ScalarField(self.dim, batch, self.domain_batch, f"{c}*({self.label})")


@dataclass(frozen=True)
class VectorField:
    """A map phi: U -> R^m, evaluated in batches like :class:`ScalarField`."""

    dim_in: int
    dim_out: int
    batch: Callable[[np.ndarray], tuple]
    domain_batch: Optional[Callable[[np.ndarray], np.ndarray]] = None
    label: str = ""

    @property
    def dim(self):
        return self.dim_in

    @classmethod
    def from_expressions(cls, texts, dim, domain=None, label=None):
        comps = [compile_expression(parse_expression(t, dim)) for t in texts]

        def batch(X):
            parts = [c(X) for c in comps]
            values = np.stack([p[0] for p in parts], axis=1)
            ok = np.logical_and.reduce([p[1] for p in parts])
            return values, ok

        if isinstance(domain, str):
            domain_batch = _expression_predicate(domain, dim)
        elif domain is not None:
            domain_batch = _loop_predicate(domain)
        else:
            domain_batch = None
        return cls(dim, len(texts), batch, domain_batch, label or "(" + ", ".join(texts) + ")")

    @classmethod
    def from_scalar(cls, f: ScalarField):
        def batch(X):
            v, ok = f.batch(X)
            return v[:, None], ok

        return cls(f.dim, 1, batch, f.domain_batch, f.label)

    @classmethod
    def linear(cls, A, label=None):
        """The linear map x -> A x."""
        A = np.array(A, dtype=float)
        A.setflags(write=False)

        def batch(X):
            return X @ A.T, np.ones(X.shape[0], dtype=bool)

        return cls(A.shape[1], A.shape[0], batch, None, label or "linear")

    def domain_many(self, X):
        X = _as_batch(X, self.dim_in)
        if self.domain_batch is None:
            return np.ones(X.shape[0], dtype=bool)
        return np.asarray(self.domain_batch(X), dtype=bool)

    def eval_many(self, X):
        X = _as_batch(X, self.dim_in)
        inside = self.domain_many(X)
        values = np.full((X.shape[0], self.dim_out), np.nan)
        ok = np.zeros(X.shape[0], dtype=bool)
        if inside.any():
            v, good = self.batch(X[inside])
            v = np.asarray(v, dtype=float).reshape(-1, self.dim_out)
            values[inside] = v
            ok[inside] = good & np.all(np.isfinite(v), axis=1)
        values[~ok] = np.nan
        return values, ok

    def __call__(self, x):
        x = _as_point(x, self.dim_in)
        v, ok = self.eval_many(x[None, :])
        if not ok[0]:
            raise DomainError(x)
        return v[0]


def evaluate(field: ScalarField, x) -> float:
    """phi(x), raising :class:`DomainError` with the offending point."""
    x = _as_point(x, field.dim)
    v, ok = field.eval_many(x[None, :])
    if not ok[0]:
        raise DomainError(x)
    return float(v[0])


def compose(outer: ScalarField, inner: VectorField) -> ScalarField:
    """psi o phi as a scalar field on the domain of ``inner``."""
    if outer.dim != inner.dim_out:
        raise ValueError("dimension mismatch in composition")

    def batch(X):
        y, ok = inner.eval_many(X)
        v = np.full(X.shape[0], np.nan)
        if ok.any():
            vy, oky = outer.eval_many(y[ok])
            v[ok] = vy
            ok = ok.copy()
            ok[ok] = oky
        return v, ok

    return ScalarField(inner.dim_in, batch, inner.domain_batch, f"{outer.label} o {inner.label}")


def product(a: ScalarField, b: ScalarField) -> ScalarField:
    """The pointwise product phi * psi on the intersection of both domains."""
    if a.dim != b.dim:
        raise ValueError("dimension mismatch in product")

    def batch(X):
        va, oka = a.eval_many(X)
        vb, okb = b.eval_many(X)
        return va * vb, oka & okb

    return ScalarField(a.dim, batch, None, f"({a.label})*({b.label})")


def load_field(spec, dim=None) -> ScalarField:
    """Build a field from ``{"dim": d, "expr": "...", "domain": "..."}``,
    ``{"builtin": name}``, a builtin name, or a path to a JSON file."""
    from .corpus import builtin_field

    if isinstance(spec, (str, Path)) and Path(spec).suffix == ".json" and Path(spec).exists():
        spec = json.loads(Path(spec).read_text())
    if isinstance(spec, str):
        return builtin_field(spec)
    if "builtin" in spec:
        return builtin_field(spec["builtin"])
    d = spec.get("dim", dim)
    if d is None:
        raise ValueError("field spec needs 'dim'")
    return ScalarField.from_expression(spec["expr"], int(d), domain=spec.get("domain"))


def load_vector_field(spec) -> VectorField:
    """``{"dim": d, "exprs": [...], "domain": "..."}``."""
    return VectorField.from_expressions(spec["exprs"], int(spec["dim"]), domain=spec.get("domain"))
