"""Structured matrix representations and kernels.

Covariances and surrogate curvature matrices appear in three forms: diagonal,
diagonal plus low rank (D + F F^T), and a lower-triangular Cholesky factor L
standing for L L^T. The kernels here (matvec, trace-of-product, log-det,
diagonal extraction) exploit that structure; the diag-plus-low-rank path never
materializes a d x d matrix.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class DiagMat:
    """Diagonal matrix stored as its d diagonal entries."""

    entries: np.ndarray

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class LowRankFactor:
    """d x r factor; r = 0 contributes nothing."""

    columns: np.ndarray  # shape (d, r)

    @property
    def dim(self) -> int:
        return self.columns.shape[0]

    @property
    def rank(self) -> int:
        return self.columns.shape[1]


@dataclass(frozen=True)
class DiagPlusLowRank:
    """D + F F^T, symmetric; PSD only required where used as a covariance."""

    diag: DiagMat
    factor: LowRankFactor

    def __post_init__(self):
        if self.diag.dim != self.factor.dim:
            raise DimensionMismatch(
                f"diag dim {self.diag.dim} != factor dim {self.factor.dim}"
            )

    @property
    def dim(self) -> int:
        return self.diag.dim


@dataclass(frozen=True)
class LowerTriangular:
    """Cholesky-style factor; strictly upper entries must be zero."""

    entries: np.ndarray  # shape (d, d)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


def diag_plus_low_rank(diag_entries, factor_columns) -> DiagPlusLowRank:
    d = np.asarray(diag_entries, dtype=float)
    f = np.asarray(factor_columns, dtype=float)
    if f.ndim == 1:
        f = f.reshape(-1, 1)
    return DiagPlusLowRank(DiagMat(d), LowRankFactor(f))


def zero_factor(d: int) -> LowRankFactor:
    return LowRankFactor(np.zeros((d, 0)))


def _check_dim(m_dim: int, x: np.ndarray):
    if x.shape[0] != m_dim:
        raise DimensionMismatch(f"matrix dim {m_dim} vs vector dim {x.shape[0]}")


def matvec(m, x: np.ndarray) -> np.ndarray:
    """m @ x without densifying structured representations."""
    x = np.asarray(x, dtype=float)
    if isinstance(m, DiagMat):
        _check_dim(m.dim, x)
        return m.entries * x
    if isinstance(m, DiagPlusLowRank):
        _check_dim(m.dim, x)
        f = m.factor.columns
        return m.diag.entries * x + f @ (f.T @ x)
    if isinstance(m, LowerTriangular):
        _check_dim(m.dim, x)
        return m.entries @ x
    raise TypeError(f"unsupported matrix type {type(m)!r}")


def _split(b):
    """Return (diag_entries, factor_columns) for DiagMat or DiagPlusLowRank."""
    if isinstance(b, DiagMat):
        return b.entries, np.zeros((b.dim, 0))
    if isinstance(b, DiagPlusLowRank):
        return b.diag.entries, b.factor.columns
    raise TypeError(f"unsupported matrix type {type(b)!r}")


def trace_product(b, sigma) -> float:
    """tr(B Sigma) for B diagonal-or-diag+LR against any structured Sigma.

    A LowerTriangular sigma denotes Sigma = L L^T. Cost is O(d (1+r_b)(1+r_s))
    for structured sigma and O(d^2 r_b) for the Cholesky form.
    """
    d_b, u = _split(b)
    if isinstance(sigma, (DiagMat, DiagPlusLowRank)):
        d_s, f = _split(sigma)
        if d_s.shape[0] != d_b.shape[0]:
            raise DimensionMismatch("trace_product dims disagree")
        total = float(d_b @ d_s)
        if f.size:
            total += float(d_b @ (f * f).sum(axis=1))
        if u.size:
            total += float(d_s @ (u * u).sum(axis=1))
        if f.size and u.size:
            total += float(np.sum((u.T @ f) ** 2))
        return total
    if isinstance(sigma, LowerTriangular):
        ell = sigma.entries
        if ell.shape[0] != d_b.shape[0]:
            raise DimensionMismatch("trace_product dims disagree")
        total = float(d_b @ (ell * ell).sum(axis=1))
        if u.size:
            total += float(np.sum((u.T @ ell) ** 2))
        return total
    raise TypeError(f"unsupported sigma type {type(sigma)!r}")


def logdet(sigma) -> float:
    """log det Sigma for a valid covariance representation."""
    if isinstance(sigma, DiagMat):
        if np.any(sigma.entries <= 0):
            raise ValueError("logdet requires positive diagonal")
        return float(np.sum(np.log(sigma.entries)))
    if isinstance(sigma, DiagPlusLowRank):
        d = sigma.diag.entries
        if np.any(d <= 0):
            raise ValueError("logdet requires positive diagonal")
        f = sigma.factor.columns
        out = float(np.sum(np.log(d)))
        if f.size:
            r = f.shape[1]
            # matrix determinant lemma: det(D + FF^T) = det(D) det(I + F^T D^-1 F)
            small = np.eye(r) + f.T @ (f / d[:, None])
            sign, ld = np.linalg.slogdet(small)
            if sign <= 0:
                raise ValueError("low-rank correction is not positive definite")
            out += float(ld)
        return out
    if isinstance(sigma, LowerTriangular):
        diag = np.diag(sigma.entries)
        if np.any(diag <= 0):
            raise ValueError("logdet requires positive Cholesky diagonal")
        return float(2.0 * np.sum(np.log(diag)))
    raise TypeError(f"unsupported sigma type {type(sigma)!r}")


def diag_of(b) -> np.ndarray:
    """Diagonal entries of a DiagMat or DiagPlusLowRank in O(d r)."""
    d_b, u = _split(b)
    if u.size:
        return d_b + (u * u).sum(axis=1)
    return d_b.copy()
