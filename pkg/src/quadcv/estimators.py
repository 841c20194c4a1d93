"""ELBO gradient estimators and the variance statistics built on them."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .control_variates import QuadSurrogate, cv_value, taylor_cv
from .families import (
    FamilyParams,
    NoiseDraw,
    WGradient,
    entropy,
    entropy_grad,
    jtvp,
    sample_noise,
    transform,
    zero_gradient,
)
from .models import LogJointModel


@dataclass(frozen=True)
class GradSample:
    """One draw's worth of estimator state."""

    g: WGradient            # base estimator, entropy gradient included
    c: WGradient            # control variate (zero if none is in play)
    z: np.ndarray
    f_value: float
    noise: NoiseDraw
    grad_f: np.ndarray      # model gradient at z, reused by the dual step


def base_grad(model: LogJointModel, family: FamilyParams,
              noise: NoiseDraw) -> GradSample:
    """Plain reparameterization gradient plus the closed-form entropy term."""
    z = transform(family, noise)
    grad_f = model.grad(z)
    g = jtvp(family, noise, grad_f) + entropy_grad(family)
    return GradSample(g=g, c=zero_gradient(family), z=z,
                      f_value=model.log_joint(z), noise=noise, grad_f=grad_f)


def corrected_grad(sample: GradSample, gamma: float) -> WGradient:
    return sample.g + gamma * sample.c


class ControlVariateSpec:
    """How to attach a control variate to each base sample."""

    def prepare(self, family: FamilyParams):
        pass

    def value(self, family: FamilyParams, sample: GradSample) -> WGradient:
        raise NotImplementedError


class NoCV(ControlVariateSpec):
    def value(self, family, sample):
        return zero_gradient(family)


class QuadraticCV(ControlVariateSpec):
    def __init__(self, surrogate: QuadSurrogate):
        self.surrogate = surrogate

    def value(self, family, sample):
        return cv_value(self.surrogate, family, sample.noise)


class TaylorCV(ControlVariateSpec):
    def __init__(self, model: LogJointModel):
        self.model = model

    def value(self, family, sample):
        return taylor_cv(family, sample.noise, self.model)


def multi_sample(model: LogJointModel, family: FamilyParams,
                 cv_spec: ControlVariateSpec, M: int,
                 rng: np.random.Generator,
                 gamma: float = 0.0) -> tuple[WGradient, list[GradSample]]:
    """Average of M corrected single-sample estimators, deterministic order."""
    if M < 1:
        raise ValueError("M must be >= 1")
    cv_spec.prepare(family)
    samples = []
    for _ in range(M):
        noise = sample_noise(family, rng)
        sample = base_grad(model, family, noise)
        c = cv_spec.value(family, sample)
        samples.append(GradSample(sample.g, c, sample.z, sample.f_value,
                                  sample.noise, sample.grad_f))
    total = samples[0].g + gamma * samples[0].c
    for s in samples[1:]:
        total = total + s.g + gamma * s.c
    return (1.0 / M) * total, samples


def _restrict(grad: WGradient, blocks: str) -> np.ndarray:
    if blocks == "all":
        return grad.flatten()
    if blocks == "mean":
        return grad.mean_block
    if blocks == "scale":
        return grad.scale_block
    raise ValueError(f"unknown block selector {blocks!r}")


def empirical_variance(samples: list[WGradient], blocks: str = "all") -> float:
    """Var X = E||X||^2 - ||E X||^2 on the requested block."""
    if len(samples) < 2:
        raise ValueError("need at least 2 samples")
    vecs = np.stack([_restrict(s, blocks) for s in samples])
    mean_sq = float(np.mean(np.sum(vecs ** 2, axis=1)))
    sq_mean = float(np.sum(np.mean(vecs, axis=0) ** 2))
    return mean_sq - sq_mean


def elbo_estimate(samples: list[GradSample], family: FamilyParams) -> float:
    if not samples:
        raise ValueError("need at least 1 sample")
    return float(np.mean([s.f_value for s in samples])) + entropy(family)
