"""Reparameterizable Gaussian variational families.

Three families are supported:

  * MeanLogScale      -- N(mu, diag(e^{2 psi}))
  * MeanDiagLowRank   -- N(mu, diag(e^{2 psi}) + F F^T)
  * MeanCholesky      -- N(mu, L L^T), L lower triangular

MeanCholesky stores the triangle with the diagonal in log form so that every
parameter is unconstrained; derivative formulas apply the corresponding chain
rule. Gradient vectors are split into a mean block and a scale block; the
scale block flattens psi first, then F column-major, and for the Cholesky
family the lower triangle of L row by row (log-diagonal entries in place).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .structured import (
    DiagMat,
    DiagPlusLowRank,
    DimensionMismatch,
    LowerTriangular,
    LowRankFactor,
    logdet,
)

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class MeanLogScale:
    mean: np.ndarray
    log_scale: np.ndarray  # psi, log standard deviations

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class MeanDiagLowRank:
    mean: np.ndarray
    log_scale: np.ndarray
    factor: np.ndarray  # (d, r_w)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @property
    def rank(self) -> int:
        return self.factor.shape[1]


@dataclass(frozen=True)
class MeanCholesky:
    mean: np.ndarray
    tril: np.ndarray  # lower triangle; diagonal entries store log(L_ii)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


FamilyParams = MeanLogScale | MeanDiagLowRank | MeanCholesky


@dataclass(frozen=True)
class NoiseDraw:
    eps_d: np.ndarray
    eps_r: np.ndarray  # empty unless MeanDiagLowRank


@dataclass(frozen=True)
class WGradient:
    """Gradient w.r.t. variational parameters, split into blocks."""

    mean_block: np.ndarray
    scale_block: np.ndarray

    def __add__(self, other: "WGradient") -> "WGradient":
        return WGradient(self.mean_block + other.mean_block,
                         self.scale_block + other.scale_block)

    def __sub__(self, other: "WGradient") -> "WGradient":
        return WGradient(self.mean_block - other.mean_block,
                         self.scale_block - other.scale_block)

    def __mul__(self, a: float) -> "WGradient":
        return WGradient(self.mean_block * a, self.scale_block * a)

    __rmul__ = __mul__

    def dot(self, other: "WGradient") -> float:
        return float(self.mean_block @ other.mean_block
                     + self.scale_block @ other.scale_block)

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.mean_block, self.scale_block])


def zero_gradient(family: FamilyParams) -> WGradient:
    d = family.dim
    return WGradient(np.zeros(d), np.zeros(num_params(family) - d))


def chol_matrix(family: MeanCholesky) -> np.ndarray:
    """Actual L with positive diagonal recovered from the log-diag storage."""
    ell = np.tril(family.tril, -1)
    ell[np.diag_indices_from(ell)] = np.exp(np.diag(family.tril))
    return ell


def num_params(family: FamilyParams) -> int:
    d = family.dim
    if isinstance(family, MeanLogScale):
        return 2 * d
    if isinstance(family, MeanDiagLowRank):
        return 2 * d + d * family.rank
    if isinstance(family, MeanCholesky):
        return d + d * (d + 1) // 2
    raise TypeError(f"unsupported family {type(family)!r}")


def sample_noise(family: FamilyParams, rng: np.random.Generator) -> NoiseDraw:
    eps_d = rng.standard_normal(family.dim)
    if isinstance(family, MeanDiagLowRank):
        eps_r = rng.standard_normal(family.rank)
    else:
        eps_r = np.zeros(0)
    return NoiseDraw(eps_d, eps_r)


def transform(family: FamilyParams, noise: NoiseDraw) -> np.ndarray:
    """z = T_w(eps); maps the base noise through the family."""
    if noise.eps_d.shape[0] != family.dim:
        raise DimensionMismatch("noise dimension disagrees with family")
    if isinstance(family, MeanLogScale):
        return family.mean + np.exp(family.log_scale) * noise.eps_d
    if isinstance(family, MeanDiagLowRank):
        if noise.eps_r.shape[0] != family.rank:
            raise DimensionMismatch("low-rank noise dimension disagrees")
        return (family.mean + np.exp(family.log_scale) * noise.eps_d
                + family.factor @ noise.eps_r)
    if isinstance(family, MeanCholesky):
        return family.mean + chol_matrix(family) @ noise.eps_d
    raise TypeError(f"unsupported family {type(family)!r}")


def mean_cov(family: FamilyParams):
    """Mean vector and structured covariance (Cholesky form stays a factor)."""
    if isinstance(family, MeanLogScale):
        return family.mean, DiagMat(np.exp(2.0 * family.log_scale))
    if isinstance(family, MeanDiagLowRank):
        return family.mean, DiagPlusLowRank(
            DiagMat(np.exp(2.0 * family.log_scale)),
            LowRankFactor(family.factor),
        )
    if isinstance(family, MeanCholesky):
        return family.mean, LowerTriangular(chol_matrix(family))
    raise TypeError(f"unsupported family {type(family)!r}")


def entropy(family: FamilyParams) -> float:
    _, sigma = mean_cov(family)
    d = family.dim
    return 0.5 * (d * (LOG_2PI + 1.0) + logdet(sigma))


def _dlr_inverse_pieces(family: MeanDiagLowRank):
    """diag(Sigma^-1) and Sigma^-1 F via Woodbury, O(d r^2)."""
    d_inv = np.exp(-2.0 * family.log_scale)
    f = family.factor
    if f.shape[1] == 0:
        return d_inv, np.zeros_like(f)
    dinv_f = f * d_inv[:, None]
    small = np.eye(f.shape[1]) + f.T @ dinv_f
    w = np.linalg.solve(small, dinv_f.T)  # (r, d)
    # Sigma^-1 = D^-1 - D^-1 F small^-1 F^T D^-1
    sigma_inv_f = dinv_f - dinv_f @ (w @ f)
    diag_inv = d_inv - np.sum(dinv_f * w.T, axis=1)
    return diag_inv, sigma_inv_f


def entropy_grad(family: FamilyParams) -> WGradient:
    """Gradient of the closed-form entropy; mean block is exactly zero."""
    d = family.dim
    mean_block = np.zeros(d)
    if isinstance(family, MeanLogScale):
        return WGradient(mean_block, np.ones(d))
    if isinstance(family, MeanDiagLowRank):
        diag_inv, sigma_inv_f = _dlr_inverse_pieces(family)
        psi_block = np.exp(2.0 * family.log_scale) * diag_inv
        return WGradient(mean_block, np.concatenate(
            [psi_block, sigma_inv_f.flatten(order="F")]))
    if isinstance(family, MeanCholesky):
        # H = sum_i log L_ii + const, and L_ii = exp(stored diagonal)
        grad = np.zeros((d, d))
        grad[np.diag_indices(d)] = 1.0
        return WGradient(mean_block, _flatten_lower(grad))
    raise TypeError(f"unsupported family {type(family)!r}")


def _flatten_lower(mat: np.ndarray) -> np.ndarray:
    """Row-major lower triangle (diagonal included)."""
    d = mat.shape[0]
    idx = np.tril_indices(d)
    return mat[idx]


def _unflatten_lower(vec: np.ndarray, d: int) -> np.ndarray:
    out = np.zeros((d, d))
    out[np.tril_indices(d)] = vec
    return out


def jtvp(family: FamilyParams, noise: NoiseDraw, u: np.ndarray) -> WGradient:
    """(d T_w(eps) / d w)^T u."""
    u = np.asarray(u, dtype=float)
    if u.shape[0] != family.dim:
        raise DimensionMismatch("u dimension disagrees with family")
    if isinstance(family, MeanLogScale):
        return WGradient(u.copy(), np.exp(family.log_scale) * noise.eps_d * u)
    if isinstance(family, MeanDiagLowRank):
        psi_block = np.exp(family.log_scale) * noise.eps_d * u
        f_block = np.outer(u, noise.eps_r).flatten(order="F")
        return WGradient(u.copy(), np.concatenate([psi_block, f_block]))
    if isinstance(family, MeanCholesky):
        ell = chol_matrix(family)
        outer = np.tril(np.outer(u, noise.eps_d))
        # chain rule for the log-stored diagonal
        di = np.diag_indices(family.dim)
        outer[di] = outer[di] * ell[di]
        return WGradient(u.copy(), _flatten_lower(outer))
    raise TypeError(f"unsupported family {type(family)!r}")


def scale_shape(family: FamilyParams):
    """Blocks making up the scale part of the flattened parameter vector."""
    d = family.dim
    if isinstance(family, MeanLogScale):
        return [("psi", d)]
    if isinstance(family, MeanDiagLowRank):
        return [("psi", d), ("factor", d * family.rank)]
    if isinstance(family, MeanCholesky):
        return [("tril", d * (d + 1) // 2)]
    raise TypeError(f"unsupported family {type(family)!r}")


def to_vector(family: FamilyParams) -> np.ndarray:
    if isinstance(family, MeanLogScale):
        return np.concatenate([family.mean, family.log_scale])
    if isinstance(family, MeanDiagLowRank):
        return np.concatenate([family.mean, family.log_scale,
                               family.factor.flatten(order="F")])
    if isinstance(family, MeanCholesky):
        return np.concatenate([family.mean, _flatten_lower(family.tril)])
    raise TypeError(f"unsupported family {type(family)!r}")


def from_vector(template: FamilyParams, vec: np.ndarray) -> FamilyParams:
    d = template.dim
    mean = vec[:d]
    rest = vec[d:]
    if isinstance(template, MeanLogScale):
        return MeanLogScale(mean, rest)
    if isinstance(template, MeanDiagLowRank):
        r = template.rank
        return MeanDiagLowRank(mean, rest[:d],
                               rest[d:].reshape((d, r), order="F"))
    if isinstance(template, MeanCholesky):
        return MeanCholesky(mean, _unflatten_lower(rest, d))
    raise TypeError(f"unsupported family {type(template)!r}")
