"""Double-descent training loop, Adam, and the experiment drivers.

One iteration draws M noise samples, takes an Adam ascent step on the
variational parameters with the weighted estimator, updates the running
control-variate weight from the per-sample (c, g) pairs, snapshots the
surrogate expansion point to the new mean, and takes an Adam descent step on
the surrogate parameters reusing the primary step's model evaluations.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import models as mdl
from .control_variates import (
    GammaTracker,
    QuadSurrogate,
    fit_grad_method1,
    fit_grad_method2,
    init_surrogate,
    surrogate_from_vector,
    surrogate_to_vector,
)
from .estimators import (
    ControlVariateSpec,
    NoCV,
    QuadraticCV,
    TaylorCV,
    base_grad,
    corrected_grad,
    elbo_estimate,
    empirical_variance,
    multi_sample,
)
from .families import (
    FamilyParams,
    MeanCholesky,
    MeanDiagLowRank,
    MeanLogScale,
    from_vector,
    sample_noise,
    to_vector,
)
from .trace import RunTrace, TraceRow

CV_KINDS = ("none", "quadratic_m1", "quadratic_m2", "taylor")
FAMILY_KINDS = ("diag", "diag_lowrank", "cholesky")


# ---------------------------------------------------------------------------
# Adam


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int
    alpha: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def create(cls, n: int, alpha: float) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), 0, alpha)


def adam_step(state: AdamState, params: np.ndarray, grad: np.ndarray,
              ascend: bool) -> tuple[AdamState, np.ndarray]:
    """One bias-corrected Adam update; ascent adds, descent subtracts."""
    if params.shape != grad.shape or params.shape != state.m.shape:
        raise ValueError("size mismatch in adam_step")
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * grad ** 2
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    step = state.alpha * m_hat / (np.sqrt(v_hat) + state.eps)
    new_params = params + step if ascend else params - step
    return replace(state, m=m, v=v, t=t), new_params


# ---------------------------------------------------------------------------
# run configuration


@dataclass
class RunConfig:
    model: str
    family: str
    dataset: str | None = None
    target_column: str = "quality"
    delimiter: str = ","
    n: int = 200
    p: int = 19
    n_e: int = 3
    n_p: int = 31
    hidden: int = 50
    dim: int = 5
    data_seed: int = 0
    r_w: int = 10
    cv: str = "none"
    r_v: int = 10
    M: int = 10
    iterations: int = 1000
    step_size: float = 1e-3
    dual_step_size: float = 0.01
    gamma_decay: float = 0.9
    gamma_max: float = 10.0
    seed: int = 0
    out: str | None = None
    probe_interval: int = 500
    probe_samples: int = 1000
    init_sigma: float = 0.1
    timing: str = "wall"

    def __post_init__(self):
        if self.r_v < 0:
            raise ValueError("r_v must be >= 0")
        if self.M < 1:
            raise ValueError("M must be >= 1")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.cv not in CV_KINDS:
            raise ValueError(f"unknown cv {self.cv!r}")
        if self.family not in FAMILY_KINDS:
            raise ValueError(f"unknown family {self.family!r}")
        if self.timing not in ("wall", "off"):
            raise ValueError(f"unknown timing mode {self.timing!r}")


def build_model(config: RunConfig) -> mdl.LogJointModel:
    name = config.model
    if name == "gaussian":
        return mdl.standard_normal_model(config.dim)
    if name == "synth_logistic":
        return mdl.build_logistic(
            mdl.synth_logistic(config.n, config.p, config.data_seed))
    if name == "synth_frisk":
        return mdl.build_hierarchical(
            mdl.synth_frisk(config.n_e, config.n_p, config.data_seed))
    if name == "synth_regression":
        return mdl.build_bnn(
            mdl.synth_regression(config.n, config.p, config.data_seed),
            config.hidden)
    if name == "logistic":
        return mdl.build_logistic(mdl.load_libsvm(config.dataset))
    if name == "hierarchical":
        return mdl.build_hierarchical(mdl.load_frisk(config.dataset))
    if name == "bnn":
        return mdl.build_bnn(
            mdl.load_csv(config.dataset, config.target_column,
                         config.delimiter),
            config.hidden)
    raise ValueError(f"unknown model {name!r}")


def init_family(kind: str, d: int, r_w: int, sigma: float) -> FamilyParams:
    mean = np.zeros(d)
    psi = np.full(d, np.log(sigma))
    if kind == "diag":
        return MeanLogScale(mean, psi)
    if kind == "diag_lowrank":
        return MeanDiagLowRank(mean, psi, np.zeros((d, r_w)))
    if kind == "cholesky":
        tril = np.zeros((d, d))
        tril[np.diag_indices(d)] = np.log(sigma)
        return MeanCholesky(mean, tril)
    raise ValueError(f"unknown family {kind!r}")


# ---------------------------------------------------------------------------
# algorithm state and one iteration


@dataclass
class Alg1State:
    model: mdl.LogJointModel
    config: RunConfig
    family: FamilyParams
    adam_w: AdamState
    rng: np.random.Generator
    surrogate: QuadSurrogate | None = None
    adam_v: AdamState | None = None
    tracker: GammaTracker = field(default_factory=GammaTracker)
    iteration: int = 0

    @property
    def uses_quadratic(self) -> bool:
        return self.config.cv in ("quadratic_m1", "quadratic_m2")

    @property
    def gamma(self) -> float:
        return self.tracker.gamma if self.config.cv != "none" else 0.0

    def cv_spec(self) -> ControlVariateSpec:
        if self.config.cv == "none":
            return NoCV()
        if self.uses_quadratic:
            return QuadraticCV(self.surrogate)
        return TaylorCV(self.model)


def init_run(config: RunConfig, model: mdl.LogJointModel | None = None) -> Alg1State:
    model = model if model is not None else build_model(config)
    family = init_family(config.family, model.dim, config.r_w,
                         config.init_sigma)
    root = np.random.SeedSequence(config.seed)
    train_seq, surr_seq = root.spawn(2)
    rng = np.random.default_rng(train_seq)
    state = Alg1State(
        model=model,
        config=config,
        family=family,
        adam_w=AdamState.create(to_vector(family).shape[0], config.step_size),
        rng=rng,
        tracker=GammaTracker(decay=config.gamma_decay,
                             gamma_max=config.gamma_max),
    )
    if state.uses_quadratic:
        surr_rng = np.random.default_rng(surr_seq)
        state.surrogate = init_surrogate(model.dim, config.r_v, surr_rng)
        state.adam_v = AdamState.create(
            surrogate_to_vector(state.surrogate).shape[0],
            config.dual_step_size)
    return state


def alg1_step(state: Alg1State) -> Alg1State:
    """One full double-descent iteration; returns the advanced state."""
    config = state.config
    gamma = state.gamma  # pre-update value, per the declared convention
    mean_grad, samples = multi_sample(state.model, state.family,
                                      state.cv_spec(), config.M, state.rng,
                                      gamma=gamma)
    flat = mean_grad.flatten()
    if not np.all(np.isfinite(flat)):
        raise FloatingPointError(
            f"non-finite gradient at iteration {state.iteration}")
    adam_w, w_vec = adam_step(state.adam_w, to_vector(state.family), flat,
                              ascend=True)
    old_family = state.family
    new_family = from_vector(old_family, w_vec)

    tracker = state.tracker
    if config.cv != "none":
        for s in samples:
            tracker = tracker.update(s.c, s.g)

    surrogate, adam_v = state.surrogate, state.adam_v
    if state.uses_quadratic:
        # snapshot the expansion point to the post-step mean, then reuse the
        # primary step's model evaluations for the dual gradient
        surrogate = replace(surrogate, z0=new_family.mean.copy())
        acc = None
        for s in samples:
            if config.cv == "quadratic_m2":
                h = fit_grad_method2(surrogate, old_family, s.noise, s.grad_f)
            else:
                h = fit_grad_method1(surrogate, old_family, s.noise, s.g)
            acc = h.flatten() if acc is None else acc + h.flatten()
        acc /= config.M
        adam_v, v_vec = adam_step(adam_v, surrogate_to_vector(surrogate), acc,
                                  ascend=False)
        surrogate = surrogate_from_vector(surrogate, v_vec)

    return replace(state, family=new_family, adam_w=adam_w, tracker=tracker,
                   surrogate=surrogate, adam_v=adam_v,
                   iteration=state.iteration + 1)


# ---------------------------------------------------------------------------
# probing and the main run driver


def probe(state: Alg1State, rng: np.random.Generator,
          n_samples: int) -> tuple[float, float, float, float]:
    """(elbo, var_total, var_mean, var_scale) from fresh evaluation samples."""
    spec = state.cv_spec()
    spec.prepare(state.family)
    gamma = state.gamma
    grads, samples = [], []
    for _ in range(n_samples):
        noise = sample_noise(state.family, rng)
        s = base_grad(state.model, state.family, noise)
        c = spec.value(state.family, s)
        s = replace(s, c=c)
        samples.append(s)
        grads.append(corrected_grad(s, gamma))
    elbo = elbo_estimate(samples, state.family)
    return (elbo,
            empirical_variance(grads, "all"),
            empirical_variance(grads, "mean"),
            empirical_variance(grads, "scale"))


def run(config: RunConfig, model: mdl.LogJointModel | None = None) -> RunTrace:
    """Execute a configured optimization run, probing on a fixed interval."""
    state = init_run(config, model)
    probe_rng = np.random.default_rng(
        np.random.SeedSequence(config.seed).spawn(3)[2])
    trace = RunTrace()
    start = time.monotonic()
    for k in range(config.iterations):
        if k % config.probe_interval == 0:
            elapsed = (int(1000 * (time.monotonic() - start))
                       if config.timing == "wall" else 0)
            elbo, v_all, v_mean, v_scale = probe(state, probe_rng,
                                                 config.probe_samples)
            trace.append(TraceRow(k, elapsed, elbo, v_all, v_mean, v_scale,
                                  state.gamma))
        state = alg1_step(state)
    if config.out is not None:
        trace.write_csv(config.out)
    return trace


# ---------------------------------------------------------------------------
# sigma sweep (fit-to-completion variance profile)


def fit_surrogate(model: mdl.LogJointModel, family: FamilyParams,
                  method: str, r_v: int, fit_iters: int,
                  rng: np.random.Generator,
                  step_size: float = 0.01) -> QuadSurrogate:
    """Train the surrogate at fixed w (z0 = current mean), M = 1 per step."""
    surrogate = init_surrogate(model.dim, r_v, rng)
    surrogate = replace(surrogate, z0=family.mean.copy())
    adam = AdamState.create(surrogate_to_vector(surrogate).shape[0], step_size)
    for _ in range(fit_iters):
        noise = sample_noise(family, rng)
        if method == "quadratic_m2":
            from .families import transform
            z = transform(family, noise)
            h = fit_grad_method2(surrogate, family, noise, model.grad(z))
        else:
            s = base_grad(model, family, noise)
            h = fit_grad_method1(surrogate, family, noise, s.g)
        adam, v_vec = adam_step(adam, surrogate_to_vector(surrogate),
                                h.flatten(), ascend=False)
        surrogate = surrogate_from_vector(surrogate, v_vec)
    return surrogate


def sigma_sweep(model: mdl.LogJointModel, family_kind: str,
                sigmas: list[float], cvs: list[str], fit_iters: int = 20000,
                r_w: int = 0, r_v: int = 10, probe_samples: int = 1000,
                seed: int = 0) -> list[dict]:
    """Variance of each estimator at w fixed to mean 0, covariance sigma^2 I,
    with the surrogate trained to completion per sigma and weight fixed at 1."""
    rows = []
    for i_sigma, sigma in enumerate(sigmas):
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        family = init_family(family_kind, model.dim, r_w, sigma)
        for i_cv, cv in enumerate(cvs):
            rng = np.random.default_rng(
                np.random.SeedSequence((seed, i_sigma, i_cv)))
            if cv in ("quadratic_m1", "quadratic_m2"):
                surrogate = fit_surrogate(model, family, cv, r_v, fit_iters,
                                          rng)
                spec: ControlVariateSpec = QuadraticCV(surrogate)
            elif cv == "taylor":
                spec = TaylorCV(model)
            elif cv == "none":
                spec = NoCV()
            else:
                raise ValueError(f"unknown cv {cv!r}")
            grads = []
            for _ in range(probe_samples):
                noise = sample_noise(family, rng)
                s = base_grad(model, family, noise)
                c = spec.value(family, s)
                grads.append(s.g + c)  # fixed weight gamma = 1
            rows.append({
                "sigma": sigma,
                "estimator": cv,
                "var_total": empirical_variance(grads, "all"),
                "var_mean_block": empirical_variance(grads, "mean"),
                "var_scale_block": empirical_variance(grads, "scale"),
            })
    return rows
