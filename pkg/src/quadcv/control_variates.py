"""Quadratic-surrogate control variate, its fitting gradients, and baselines.

The surrogate is fhat(z) = b^T (z - z0) + 1/2 (z - z0)^T B (z - z0) with B
stored as diagonal plus low rank. The control variate is the closed-form
gradient of E[fhat] minus its single-sample reparameterization estimate; two
fitting gradients (direct variance objective, and the gradient-residual
proxy) train (b, B). Taylor-expansion baselines for all three families and
the running weight tracker live here as well.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .families import (
    FamilyParams,
    MeanCholesky,
    MeanDiagLowRank,
    MeanLogScale,
    NoiseDraw,
    WGradient,
    chol_matrix,
    jtvp,
    transform,
)
from .models import LogJointModel
from .structured import DiagPlusLowRank, diag_of, matvec, trace_product


@dataclass(frozen=True)
class QuadSurrogate:
    b: np.ndarray          # (d,)
    curvature: DiagPlusLowRank
    z0: np.ndarray         # (d,)

    @property
    def dim(self) -> int:
        return self.b.shape[0]

    @property
    def rank(self) -> int:
        return self.curvature.factor.rank


@dataclass(frozen=True)
class VGradient:
    """Gradient w.r.t. surrogate parameters (b, diag of B, factor of B)."""

    b: np.ndarray
    diag: np.ndarray
    factor: np.ndarray  # (d, r_v)

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.b, self.diag,
                               self.factor.flatten(order="F")])


def _make_b(diag: np.ndarray, factor: np.ndarray) -> DiagPlusLowRank:
    from .structured import DiagMat, LowRankFactor
    return DiagPlusLowRank(DiagMat(diag), LowRankFactor(factor))


def init_surrogate(d: int, rank: int, rng: np.random.Generator) -> QuadSurrogate:
    """b = 0, diag = 0, tiny random factor to break symmetry."""
    factor = 0.01 * rng.standard_normal((d, rank))
    return QuadSurrogate(np.zeros(d), _make_b(np.zeros(d), factor), np.zeros(d))


def surrogate_to_vector(s: QuadSurrogate) -> np.ndarray:
    return np.concatenate([s.b, s.curvature.diag.entries,
                           s.curvature.factor.columns.flatten(order="F")])


def surrogate_from_vector(template: QuadSurrogate, vec: np.ndarray) -> QuadSurrogate:
    d, r = template.dim, template.rank
    b = vec[:d]
    diag = vec[d:2 * d]
    factor = vec[2 * d:].reshape((d, r), order="F")
    return QuadSurrogate(b, _make_b(diag, factor), template.z0)


def quad_grad(s: QuadSurrogate, z: np.ndarray) -> np.ndarray:
    """Gradient of the surrogate at z: b + B (z - z0)."""
    z = np.asarray(z, dtype=float)
    if z.shape[0] != s.dim:
        raise ValueError("dimension mismatch")
    return s.b + matvec(s.curvature, z - s.z0)


def expected_quadratic(s: QuadSurrogate, family: FamilyParams) -> float:
    """Closed-form E_q[fhat(z)] from the family mean and covariance."""
    from .families import mean_cov
    mu, sigma = mean_cov(family)
    m = mu - s.z0
    return float(s.b @ m
                 + 0.5 * trace_product(s.curvature, sigma)
                 + 0.5 * m @ matvec(s.curvature, m))


def grad_expected_quadratic(s: QuadSurrogate, family: FamilyParams) -> WGradient:
    """Analytic gradient of E_q[fhat] w.r.t. w, with z0 held constant."""
    m = family.mean - s.z0
    mean_block = s.b + matvec(s.curvature, m)
    if isinstance(family, MeanLogScale):
        psi = diag_of(s.curvature) * np.exp(2.0 * family.log_scale)
        return WGradient(mean_block, psi)
    if isinstance(family, MeanDiagLowRank):
        psi = diag_of(s.curvature) * np.exp(2.0 * family.log_scale)
        bf = _apply_b(s.curvature, family.factor)
        return WGradient(mean_block,
                         np.concatenate([psi, bf.flatten(order="F")]))
    if isinstance(family, MeanCholesky):
        ell = chol_matrix(family)
        bl = np.tril(_apply_b(s.curvature, ell))
        di = np.diag_indices(family.dim)
        bl[di] = bl[di] * ell[di]  # log-diagonal chain rule
        from .families import _flatten_lower
        return WGradient(mean_block, _flatten_lower(bl))
    raise TypeError(f"unsupported family {type(family)!r}")


def _apply_b(b: DiagPlusLowRank, mat: np.ndarray) -> np.ndarray:
    """B @ mat column-wise without densifying B."""
    u = b.factor.columns
    out = b.diag.entries[:, None] * mat
    if u.size:
        out = out + u @ (u.T @ mat)
    return out


def cv_value(s: QuadSurrogate, family: FamilyParams, noise: NoiseDraw) -> WGradient:
    """Zero-mean control variate: exact gradient minus its one-sample estimate."""
    z = transform(family, noise)
    return grad_expected_quadratic(s, family) - jtvp(family, noise, quad_grad(s, z))


def fit_grad_method2(s: QuadSurrogate, family: FamilyParams, noise: NoiseDraw,
                     grad_f_at_z: np.ndarray) -> VGradient:
    """Gradient of 1/2 ||grad f(z) - grad fhat(z)||^2 w.r.t. (b, diag, U)."""
    z = transform(family, noise)
    delta = z - s.z0
    r = np.asarray(grad_f_at_z, dtype=float) - quad_grad(s, z)
    if r.shape[0] != s.dim:
        raise ValueError("dimension mismatch")
    u = s.curvature.factor.columns
    g_factor = -(np.outer(r, delta @ u) + np.outer(delta, r @ u))
    return VGradient(-r, -r * delta, g_factor)


class _VAccumulator:
    """Accumulates d(phi)/d(b, diag, U) for phi built from bilinear pieces."""

    def __init__(self, s: QuadSurrogate):
        self.u = s.curvature.factor.columns
        self.g_b = np.zeros(s.dim)
        self.g_diag = np.zeros(s.dim)
        self.g_factor = np.zeros_like(self.u)

    def add_b(self, vec, coef=1.0):
        self.g_b += coef * vec

    def add_bilinear(self, left, right, coef=1.0):
        # d/dv of left^T B right with B = diag + U U^T
        self.g_diag += coef * left * right
        if self.u.size:
            self.g_factor += coef * (np.outer(left, right @ self.u)
                                     + np.outer(right, left @ self.u))

    def add_diag_weighted(self, weights, coef=1.0):
        # d/dv of sum_i diag(B)_i weights_i
        self.g_diag += coef * weights
        if self.u.size:
            self.g_factor += coef * 2.0 * self.u * weights[:, None]

    def result(self, scale=1.0) -> VGradient:
        return VGradient(scale * self.g_b, scale * self.g_diag,
                         scale * self.g_factor)


def fit_grad_method1(s: QuadSurrogate, family: FamilyParams, noise: NoiseDraw,
                     g: WGradient) -> VGradient:
    """Gradient of ||g + c_v||^2 w.r.t. v, with g the base estimator sample.

    c_v is affine in (b, diag of B) and quadratic in U, so the gradient is
    2 J^T (g + c) with J assembled block by block.
    """
    y = g + cv_value(s, family, noise)
    z = transform(family, noise)
    delta = z - s.z0
    m = family.mean - s.z0
    acc = _VAccumulator(s)
    # mean block of c is B (m - delta); b cancels between the two terms
    acc.add_bilinear(y.mean_block, m - delta)
    if isinstance(family, MeanLogScale):
        y_psi = y.scale_block
        sd = np.exp(family.log_scale)
        acc.add_diag_weighted(np.exp(2.0 * family.log_scale) * y_psi)
        u_vec = sd * noise.eps_d * y_psi
        acc.add_b(u_vec, -1.0)
        acc.add_bilinear(u_vec, delta, -1.0)
    elif isinstance(family, MeanDiagLowRank):
        d = family.dim
        y_psi = y.scale_block[:d]
        y_f = y.scale_block[d:].reshape((d, family.rank), order="F")
        sd = np.exp(family.log_scale)
        acc.add_diag_weighted(np.exp(2.0 * family.log_scale) * y_psi)
        u_vec = sd * noise.eps_d * y_psi
        acc.add_b(u_vec, -1.0)
        acc.add_bilinear(u_vec, delta, -1.0)
        # closed-form F block: tr(y_F^T B F)
        f = family.factor
        for j in range(family.rank):
            acc.add_bilinear(y_f[:, j], f[:, j])
        # sampled F block: -(q eps_r^T) . y_F = -q^T (y_F eps_r)
        u_vec = y_f @ noise.eps_r
        acc.add_b(u_vec, -1.0)
        acc.add_bilinear(u_vec, delta, -1.0)
    elif isinstance(family, MeanCholesky):
        from .families import _unflatten_lower
        d = family.dim
        ell = chol_matrix(family)
        y_l = _unflatten_lower(y.scale_block, d)
        di = np.diag_indices(d)
        y_l[di] = y_l[di] * ell[di]  # absorb the log-diagonal chain rule
        for j in range(d):
            acc.add_bilinear(y_l[:, j], ell[:, j])
        u_vec = y_l @ noise.eps_d
        acc.add_b(u_vec, -1.0)
        acc.add_bilinear(u_vec, delta, -1.0)
    else:
        raise TypeError(f"unsupported family {type(family)!r}")
    return acc.result(scale=2.0)


def taylor_cv(family: FamilyParams, noise: NoiseDraw,
              model: LogJointModel) -> WGradient:
    """Taylor-expansion control variate: second order for the mean block,
    zero order for the scale blocks. One hvp and one grad call at the mean.
    Signed so that adding it to the base estimator reduces variance."""
    if model.dim != family.dim:
        raise ValueError("model and family dimensions disagree")
    mu = family.mean
    grad_mu = model.grad(mu)
    z = transform(family, noise)
    mean_block = -model.hvp(mu, z - mu)
    if isinstance(family, MeanLogScale):
        scale = np.exp(family.log_scale) * noise.eps_d * grad_mu
        return WGradient(mean_block, -scale)
    if isinstance(family, MeanDiagLowRank):
        psi = grad_mu * np.exp(family.log_scale) * noise.eps_d
        f_block = np.outer(grad_mu, noise.eps_r).flatten(order="F")
        return WGradient(mean_block, -np.concatenate([psi, f_block]))
    if isinstance(family, MeanCholesky):
        from .families import _flatten_lower
        ell = chol_matrix(family)
        outer = np.tril(np.outer(grad_mu, noise.eps_d))
        di = np.diag_indices(family.dim)
        outer[di] = outer[di] * ell[di]
        return WGradient(mean_block, -_flatten_lower(outer))
    raise TypeError(f"unsupported family {type(family)!r}")


def taylor_scale_cv_zero_order(family: MeanLogScale, noise: NoiseDraw,
                               grad_mu: np.ndarray) -> np.ndarray:
    """Constant-gradient form of the scale-block control variate."""
    return np.exp(family.log_scale) * noise.eps_d * grad_mu


def taylor_scale_cv_baseline(family: MeanLogScale, noises: list[NoiseDraw],
                             model: LogJointModel) -> list[np.ndarray]:
    """Per-sample scale-block control variates in the minibatch-baseline form:
    the curvature term of each sample minus a leave-one-out estimate of its
    expectation. Summed over the minibatch the curvature terms cancel."""
    n = len(noises)
    if n < 2:
        raise ValueError("baseline form needs at least 2 samples")
    sd = np.exp(family.log_scale)
    grad_mu = model.grad(family.mean)
    hess_terms = []
    for noise in noises:
        hv = model.hvp(family.mean, sd * noise.eps_d)
        hess_terms.append(hv * noise.eps_d * sd)
    out = []
    for i, noise in enumerate(noises):
        first = (grad_mu * noise.eps_d * sd) + hess_terms[i]
        baseline = sum(hess_terms[j] for j in range(n) if j != i) / (n - 1)
        out.append(first - baseline)
    return out


@dataclass(frozen=True)
class GammaTracker:
    """Running estimate of the optimal control-variate weight
    -E[c^T g] / E[c^T c], via exponential moving averages."""

    decay: float = 0.9
    floor: float = 1e-12
    gamma_max: float = 10.0
    ema_cg: float = 0.0
    ema_cc: float = 0.0
    updates: int = 0

    def update(self, c: WGradient, g: WGradient) -> "GammaTracker":
        cg = c.dot(g)
        cc = c.dot(c)
        return replace(
            self,
            ema_cg=self.decay * self.ema_cg + (1.0 - self.decay) * cg,
            ema_cc=self.decay * self.ema_cc + (1.0 - self.decay) * cc,
            updates=self.updates + 1,
        )

    @property
    def gamma(self) -> float:
        if self.updates == 0:
            return 0.0
        raw = -self.ema_cg / max(self.ema_cc, self.floor)
        return float(np.clip(raw, -self.gamma_max, self.gamma_max))


def gamma_update(t: GammaTracker, c: WGradient, g: WGradient) -> GammaTracker:
    return t.update(c, g)


def gamma_value(t: GammaTracker) -> float:
    return t.gamma
