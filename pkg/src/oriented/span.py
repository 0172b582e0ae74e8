"""Orthonormal bases of V = span(S), projection matrices and orthogonal sums."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dirset import (
    DirectionSet,
    LinearSpan,
    OrthoSumSet,
    ZeroSet,
    canonical_signs,
)
from .errors import OrthogonalityError, PreconditionError


@dataclass(frozen=True)
class SpanBasis:
    """d x k matrix with orthonormal columns spanning V."""

    O: np.ndarray

    @property
    def k(self) -> int:
        return self.O.shape[1]

    @property
    def d(self) -> int:
        return self.O.shape[0]

    @property
    def P(self) -> np.ndarray:
        return self.O @ self.O.T

    def coords(self, h):
        """Coordinates O^T h of (rows of) h."""
        return np.asarray(h, dtype=float) @ self.O

    @classmethod
    def from_columns(cls, O):
        O = np.array(O, dtype=float)
        O.setflags(write=False)
        return cls(O)


@dataclass(frozen=True)
class ProjectionMatrix:
    P: np.ndarray


def _snap_to_axes(O, tol=1e-10):
    """Replace O by coordinate axes when V is a coordinate subspace."""
    P = O @ O.T
    diag = np.diag(P)
    axes = np.abs(diag - 1) <= tol
    if np.all(axes | (np.abs(diag) <= tol)) and np.max(np.abs(P - np.diag(diag))) <= tol:
        if axes.sum() == O.shape[1]:
            return np.eye(O.shape[0])[:, axes]
    return O


def span_basis(S: DirectionSet, sample_count=None, rank_tol=1e-8, seed=0) -> SpanBasis:
    """Orthonormal basis of span(S) from an SVD of sampled members.

    Kind ``linear`` is orthonormalized directly. When V is spanned by coordinate
    axes the basis is returned as those axes; otherwise the column sign
    convention is "first nonzero entry positive".
    """
    d = S.dim
    if isinstance(S, ZeroSet):
        return SpanBasis.from_columns(np.zeros((d, 0)))
    if isinstance(S, LinearSpan):
        return SpanBasis.from_columns(_snap_to_axes(S.O))
    n = max(4 * d, 64) if sample_count is None else int(sample_count)
    if n < max(4 * d, 64):
        raise ValueError(f"sample_count must be >= {max(4 * d, 64)}")
    H = S.sample(1.0, n, seed)
    _, s, vt = np.linalg.svd(H, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return SpanBasis.from_columns(np.zeros((d, 0)))
    O = vt[s > rank_tol * s[0]].T
    return SpanBasis.from_columns(canonical_signs(_snap_to_axes(O)))


def projection_matrix(B: SpanBasis) -> ProjectionMatrix:
    P = B.O @ B.O.T
    P.setflags(write=False)
    return ProjectionMatrix(P)


@dataclass(frozen=True)
class OrthoSum:
    components: tuple  # of (DirectionSet, SpanBasis)
    total: OrthoSumSet

    @property
    def sets(self):
        return [c[0] for c in self.components]

    @property
    def bases(self):
        return [c[1] for c in self.components]

    @property
    def P(self):
        return sum((b.P for b in self.bases), np.zeros((self.total.dim,) * 2))


def orthosum(components, seed=0, tol=1e-12) -> OrthoSum:
    """Orthogonal sum of direction sets in the same R^d; checks O_i^T O_j = 0."""
    components = list(components)
    if not components:
        raise ValueError("orthosum needs at least one component")
    dims = {c.dim for c in components}
    if len(dims) != 1:
        raise ValueError("orthosum components must share the ambient dimension")
    bases = [span_basis(c, seed=seed) for c in components]
    for i in range(len(bases)):
        for j in range(i + 1, len(bases)):
            defect = np.max(np.abs(bases[i].O.T @ bases[j].O), initial=0.0)
            if defect > tol:
                raise OrthogonalityError(
                    f"components {i} and {j} are not orthogonal (defect {defect:.3e})",
                    defect=float(defect), pair=[i, j],
                )
    total = OrthoSumSet(components, bases)
    return OrthoSum(tuple(zip(components, bases)), total)


def decompose(h, osum: OrthoSum) -> list:
    """Split h in V into its components h_i = P_i h."""
    h = np.asarray(h, dtype=float).reshape(-1)
    defect = float(np.linalg.norm(osum.P @ h - h))
    if defect > 1e-8 * (1 + np.linalg.norm(h)):
        raise PreconditionError(f"h is not in V (defect norm {defect:.3e})", defect=defect)
    return [b.P @ h for b in osum.bases]
