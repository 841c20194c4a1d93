"""Flat key=value run configuration, gradient self-checks, and the CLI."""
from __future__ import annotations

import argparse
import dataclasses
import sys

import numpy as np

from . import models as mdl
from .control_variates import (
    fit_grad_method1,
    fit_grad_method2,
    grad_expected_quadratic,
    init_surrogate,
    surrogate_from_vector,
    surrogate_to_vector,
)
from .estimators import base_grad
from .families import (
    entropy,
    entropy_grad,
    from_vector,
    jtvp,
    sample_noise,
    to_vector,
    transform,
)
from .trainer import RunConfig, init_family, run, sigma_sweep
from .trace import RunTrace


class ConfigError(ValueError):
    pass


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}
_REQUIRED = ("model", "family")


def _convert(field: dataclasses.Field, raw: str, lineno: int):
    target = field.type
    try:
        if target in ("int", int):
            return int(raw)
        if target in ("float", float):
            return float(raw)
        if target in ("str | None",):
            return raw
        return raw
    except ValueError as exc:
        raise ConfigError(
            f"line {lineno}: bad value {raw!r} for key {field.name}") from exc


def parse_config(path) -> RunConfig:
    """Parse a one-key-per-line `key = value` file with `#` comments."""
    values: dict[str, object] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ConfigError(f"line {lineno}: expected key=value")
            key, raw = (part.strip() for part in stripped.split("=", 1))
            if key not in _FIELDS:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            if key in values:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            values[key] = _convert(_FIELDS[key], raw, lineno)
    for key in _REQUIRED:
        if key not in values:
            raise ConfigError(f"missing required key {key!r}")
    try:
        return RunConfig(**values)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def serialize_config(config: RunConfig) -> str:
    lines = []
    for f in dataclasses.fields(RunConfig):
        value = getattr(config, f.name)
        if value is None:
            continue
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# finite-difference self-checks


def _central_diff(fn, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    out = np.zeros_like(x)
    for i in range(x.shape[0]):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        out[i] = (fn(xp) - fn(xm)) / (2.0 * h)
    return out


def _rel_err(approx: np.ndarray, exact: np.ndarray) -> float:
    denom = max(float(np.linalg.norm(exact)), 1e-12)
    return float(np.linalg.norm(approx - exact)) / denom


def gradient_checks(seed: int = 0) -> list[tuple[str, float, float, bool]]:
    """(name, rel_err, tolerance, passed) for every analytic-derivative path."""
    rng = np.random.default_rng(seed)
    checks = []

    def record(name, err, tol):
        checks.append((name, err, tol, err <= tol))

    model_specs = [
        ("logistic", mdl.build_logistic(mdl.synth_logistic(40, 5, seed))),
        ("hierarchical", mdl.build_hierarchical(mdl.synth_frisk(3, 4, seed))),
        ("bnn", mdl.build_bnn(mdl.synth_regression(20, 3, seed), hidden=4)),
    ]
    for name, model in model_specs:
        z = 0.3 * rng.standard_normal(model.dim)
        fd = _central_diff(model.log_joint, z)
        record(f"{name}.grad", _rel_err(fd, model.grad(z)), 1e-5)
        v = rng.standard_normal(model.dim)
        h = 1e-5
        hvp_fd = (model.grad(z + h * v) - model.grad(z - h * v)) / (2.0 * h)
        record(f"{name}.hvp", _rel_err(hvp_fd, model.hvp(z, v)), 1e-4)

    for kind in ("diag", "diag_lowrank", "cholesky"):
        d = 5
        family = init_family(kind, d, 2, 0.8)
        vec = to_vector(family) + 0.1 * rng.standard_normal(
            to_vector(family).shape[0])
        family = from_vector(family, vec)
        fd = _central_diff(lambda w: entropy(from_vector(family, w)),
                           to_vector(family))
        record(f"{kind}.entropy_grad",
               _rel_err(fd, entropy_grad(family).flatten()), 1e-6)

        noise = sample_noise(family, rng)
        u = rng.standard_normal(d)
        fd = _central_diff(
            lambda w: float(u @ transform(from_vector(family, w), noise)),
            to_vector(family))
        record(f"{kind}.jtvp",
               _rel_err(fd, jtvp(family, noise, u).flatten()), 1e-6)

        surrogate = init_surrogate(d, 2, rng)
        surrogate = dataclasses.replace(
            surrogate,
            b=rng.standard_normal(d),
            z0=0.1 * rng.standard_normal(d))
        s_vec = surrogate_to_vector(surrogate)
        surrogate = surrogate_from_vector(
            surrogate, s_vec + 0.3 * rng.standard_normal(s_vec.shape[0]))
        from .control_variates import expected_quadratic
        fd = _central_diff(
            lambda w: expected_quadratic(surrogate, from_vector(family, w)),
            to_vector(family))
        record(f"{kind}.grad_expected_quadratic",
               _rel_err(fd, grad_expected_quadratic(surrogate,
                                                    family).flatten()), 1e-6)

        model = model_specs[0][1]
        model_family = init_family(kind, model.dim, 2, 0.5)
        m_noise = sample_noise(model_family, rng)
        m_surr = init_surrogate(model.dim, 2, rng)
        m_vec = surrogate_to_vector(m_surr)
        m_surr = surrogate_from_vector(
            m_surr, m_vec + 0.2 * rng.standard_normal(m_vec.shape[0]))
        z = transform(model_family, m_noise)
        grad_f = model.grad(z)

        def m2_obj(v):
            s = surrogate_from_vector(m_surr, v)
            from .control_variates import quad_grad
            r = grad_f - quad_grad(s, z)
            return 0.5 * float(r @ r)

        fd = _central_diff(m2_obj, surrogate_to_vector(m_surr))
        record(f"{kind}.fit_grad_method2",
               _rel_err(fd, fit_grad_method2(m_surr, model_family, m_noise,
                                             grad_f).flatten()), 1e-5)

        g = base_grad(model, model_family, m_noise).g

        def m1_obj(v):
            s = surrogate_from_vector(m_surr, v)
            from .control_variates import cv_value
            y = g + cv_value(s, model_family, m_noise)
            return float(y.flatten() @ y.flatten())

        fd = _central_diff(m1_obj, surrogate_to_vector(m_surr))
        record(f"{kind}.fit_grad_method1",
               _rel_err(fd, fit_grad_method1(m_surr, model_family, m_noise,
                                             g).flatten()), 1e-5)
    return checks


# ---------------------------------------------------------------------------
# CLI


def _add_common(parser):
    parser.add_argument("--config", required=True)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", default=None)
    parser.add_argument("--threads", type=int, default=1)


def _load(args) -> RunConfig:
    config = parse_config(args.config)
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    if args.out is not None:
        config = dataclasses.replace(config, out=args.out)
    return config


def cli_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="quadcv",
        description="Variational inference with a quadratic-surrogate "
                    "control variate")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one optimization run")
    _add_common(p_run)

    p_sig = sub.add_parser("sweep-sigma",
                           help="variance profile at fixed isotropic scales")
    _add_common(p_sig)
    p_sig.add_argument("--sigmas", default="0.1,0.3,1.0")
    p_sig.add_argument("--cvs", default="none,taylor,quadratic_m1,quadratic_m2")
    p_sig.add_argument("--fit-iters", type=int, default=20000)

    p_step = sub.add_parser("sweep-stepsize",
                            help="grid of primary step sizes, one trace each")
    _add_common(p_step)
    p_step.add_argument("--step-sizes", default="1e-4,1e-3,1e-2")

    p_chk = sub.add_parser("check-grads",
                           help="finite-difference checks of every "
                                "analytic derivative")
    p_chk.add_argument("--seed", type=int, default=0)

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        if args.command == "run":
            config = _load(args)
            run(config)
            return 0
        if args.command == "sweep-sigma":
            config = _load(args)
            from .trainer import build_model
            model = build_model(config)
            sigmas = [float(s) for s in args.sigmas.split(",")]
            cvs = args.cvs.split(",")
            rows = sigma_sweep(model, config.family, sigmas, cvs,
                               fit_iters=args.fit_iters, r_w=config.r_w,
                               r_v=config.r_v,
                               probe_samples=config.probe_samples,
                               seed=config.seed)
            out = config.out or "sigma_sweep.csv"
            _write_sweep(out, rows)
            return 0
        if args.command == "sweep-stepsize":
            config = _load(args)
            base_out = config.out or "trace"
            for alpha in (float(s) for s in args.step_sizes.split(",")):
                cfg = dataclasses.replace(
                    config, step_size=alpha,
                    out=f"{base_out}_alpha{alpha:g}.csv")
                run(cfg)
            return 0
        if args.command == "check-grads":
            checks = gradient_checks(args.seed)
            width = max(len(name) for name, *_ in checks)
            ok = True
            for name, err, tol, passed in checks:
                status = "PASS" if passed else "FAIL"
                ok = ok and passed
                print(f"{name:<{width}}  rel_err={err:.3e}  tol={tol:.0e}  "
                      f"{status}")
            return 0 if ok else 1
    except (ConfigError, mdl.ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 2


def _write_sweep(path, rows):
    import csv
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sigma", "estimator", "var_total", "var_mean_block",
                        "var_scale_block"])
        for row in rows:
            writer.writerow([row["sigma"], row["estimator"],
                             repr(row["var_total"]),
                             repr(row["var_mean_block"]),
                             repr(row["var_scale_block"])])


def main():  # console entry point
    raise SystemExit(cli_main())
