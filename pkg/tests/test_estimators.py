import numpy as np
import pytest

from quadcv.control_variates import init_surrogate
from quadcv.estimators import (
    NoCV,
    QuadraticCV,
    TaylorCV,
    base_grad,
    corrected_grad,
    elbo_estimate,
    empirical_variance,
    multi_sample,
)
from quadcv.families import (
    MeanLogScale,
    NoiseDraw,
    WGradient,
    entropy,
    from_vector,
    sample_noise,
    to_vector,
)
from quadcv.models import (
    QuadraticModel,
    build_logistic,
    standard_normal_model,
    synth_logistic,
)

from helpers import central_diff, densify, rel_err
from test_families import make_family


class TestBaseGrad:
    def test_hand_value_at_zero_noise(self):
        # f = -z^2/2, z = m: mean block -m, scale block 0 + entropy's 1
        model = standard_normal_model(1)
        fam = MeanLogScale(np.array([1.5]), np.zeros(1))
        noise = NoiseDraw(np.zeros(1), np.zeros(0))
        sample = base_grad(model, fam, noise)
        assert sample.g.mean_block[0] == pytest.approx(-1.5)
        assert sample.g.scale_block[0] == pytest.approx(1.0)
        assert sample.f_value == pytest.approx(-0.5 * 1.5 ** 2)
        np.testing.assert_allclose(sample.grad_f, [-1.5])

    def test_hand_value_nonzero_noise(self):
        # z = 2: g = (-2, 1 - 4) for the unit family at the origin
        model = standard_normal_model(1)
        fam = MeanLogScale(np.zeros(1), np.zeros(1))
        noise = NoiseDraw(np.array([2.0]), np.zeros(0))
        sample = base_grad(model, fam, noise)
        assert sample.g.mean_block[0] == pytest.approx(-2.0)
        assert sample.g.scale_block[0] == pytest.approx(-3.0)

    def test_control_variate_slot_starts_zero(self):
        model = standard_normal_model(2)
        fam = MeanLogScale(np.zeros(2), np.zeros(2))
        sample = base_grad(model, fam,
                           sample_noise(fam, np.random.default_rng(0)))
        assert np.all(sample.c.flatten() == 0.0)


def test_corrected_grad_combines_linearly():
    model = standard_normal_model(1)
    fam = MeanLogScale(np.zeros(1), np.zeros(1))
    noise = NoiseDraw(np.array([1.0]), np.zeros(0))
    base = base_grad(model, fam, noise)
    c = WGradient(np.array([2.0]), np.array([3.0]))
    sample = type(base)(base.g, c, base.z, base.f_value, base.noise,
                        base.grad_f)
    out = corrected_grad(sample, -0.5)
    np.testing.assert_allclose(out.flatten(),
                               base.g.flatten() - 0.5 * c.flatten())


class TestMultiSample:
    def test_single_sample_matches_base_grad(self):
        model = build_logistic(synth_logistic(10, 2, 0))
        fam = make_family("diag", np.random.default_rng(1), d=3)
        mean1, samples = multi_sample(model, fam, NoCV(), 1,
                                      np.random.default_rng(2))
        direct = base_grad(model, fam,
                           sample_noise(fam, np.random.default_rng(2)))
        np.testing.assert_array_equal(mean1.flatten(), direct.g.flatten())
        assert len(samples) == 1

    def test_deterministic_given_generator_state(self):
        model = build_logistic(synth_logistic(10, 2, 0))
        fam = make_family("diag_lowrank", np.random.default_rng(3), d=3)
        cv = QuadraticCV(init_surrogate(3, 1, np.random.default_rng(9)))
        a, _ = multi_sample(model, fam, cv, 4, np.random.default_rng(7),
                            gamma=0.5)
        b, _ = multi_sample(model, fam, cv, 4, np.random.default_rng(7),
                            gamma=0.5)
        np.testing.assert_array_equal(a.flatten(), b.flatten())

    def test_mean_is_average_of_corrected_samples(self):
        model = build_logistic(synth_logistic(10, 2, 0))
        fam = make_family("cholesky", np.random.default_rng(4), d=3)
        gamma = -0.7
        mean, samples = multi_sample(model, fam, TaylorCV(model), 5,
                                     np.random.default_rng(5), gamma=gamma)
        manual = np.mean([corrected_grad(s, gamma).flatten()
                          for s in samples], axis=0)
        np.testing.assert_allclose(mean.flatten(), manual, atol=1e-12)

    def test_rejects_zero_samples(self):
        model = standard_normal_model(2)
        fam = MeanLogScale(np.zeros(2), np.zeros(2))
        with pytest.raises(ValueError):
            multi_sample(model, fam, NoCV(), 0, np.random.default_rng(0))

    def test_unbiased_against_closed_form_gradient(self):
        # quadratic model: ELBO(w) has a closed form, FD it and compare
        rng = np.random.default_rng(6)
        d = 3
        a = rng.uniform(0.5, 2.0, d)
        model = QuadraticModel(rng.standard_normal(d), np.diag(a))
        fam = make_family("diag", rng, d=d)

        def closed_elbo(w):
            f = from_vector(fam, w)
            from quadcv.families import mean_cov
            mu, sigma = mean_cov(f)
            delta = mu - model.mean
            return (-0.5 * float(delta @ (a * delta))
                    - 0.5 * float(np.trace(np.diag(a) @ densify(sigma)))
                    + entropy(f))

        exact = central_diff(closed_elbo, to_vector(fam))
        mean, _ = multi_sample(model, fam, NoCV(), 200_000,
                               np.random.default_rng(8))
        assert rel_err(mean.flatten(), exact) < 0.02


class TestEmpiricalVariance:
    def test_hand_value_two_points(self):
        # values 0 and 2 in one coordinate: E x^2 - (E x)^2 = 2 - 1 = 1
        a = WGradient(np.array([0.0]), np.zeros(0))
        b = WGradient(np.array([2.0]), np.zeros(0))
        assert empirical_variance([a, b]) == pytest.approx(1.0)

    def test_matches_two_pass_oracle(self):
        rng = np.random.default_rng(10)
        samples = [WGradient(rng.standard_normal(3), rng.standard_normal(2))
                   for _ in range(50)]
        vecs = np.stack([s.flatten() for s in samples])
        oracle = float(np.sum(vecs.var(axis=0)))
        assert empirical_variance(samples) == pytest.approx(oracle, rel=1e-10)

    def test_block_selectors_sum_to_total(self):
        rng = np.random.default_rng(11)
        samples = [WGradient(rng.standard_normal(3), rng.standard_normal(4))
                   for _ in range(30)]
        total = empirical_variance(samples)
        split = (empirical_variance(samples, "mean")
                 + empirical_variance(samples, "scale"))
        assert total == pytest.approx(split, rel=1e-12)

    def test_rejects_single_sample(self):
        with pytest.raises(ValueError):
            empirical_variance([WGradient(np.zeros(1), np.zeros(0))])

    def test_unknown_block_selector(self):
        samples = [WGradient(np.zeros(1), np.zeros(0))] * 2
        with pytest.raises(ValueError):
            empirical_variance(samples, "bogus")


class TestVarianceIdentity:
    def test_corrected_variance_decomposition(self):
        # empirical moments obey the identity exactly, to rounding error
        model = build_logistic(synth_logistic(15, 3, 0))
        rng = np.random.default_rng(12)
        fam = make_family("diag", rng, d=4)
        _, samples = multi_sample(model, fam, TaylorCV(model), 40, rng)
        gs = np.stack([s.g.flatten() for s in samples])
        cs = np.stack([s.c.flatten() for s in samples])
        for gamma in (-1.0, 0.3, 2.0):
            lhs = empirical_variance(
                [corrected_grad(s, gamma) for s in samples])
            var_g = empirical_variance([s.g for s in samples])
            var_c = empirical_variance([s.c for s in samples])
            cov = (float(np.mean(np.sum(gs * cs, axis=1)))
                   - float(gs.mean(axis=0) @ cs.mean(axis=0)))
            rhs = var_g + 2.0 * gamma * cov + gamma ** 2 * var_c
            assert abs(lhs - rhs) < 1e-8 * max(abs(rhs), 1.0)


class TestElboEstimate:
    def test_rejects_empty(self):
        fam = MeanLogScale(np.zeros(1), np.zeros(1))
        with pytest.raises(ValueError):
            elbo_estimate([], fam)

    def test_matches_closed_form_quadratic(self):
        rng = np.random.default_rng(13)
        d = 3
        a = rng.uniform(0.5, 2.0, d)
        model = QuadraticModel(rng.standard_normal(d), np.diag(a))
        fam = make_family("diag", rng, d=d)
        _, samples = multi_sample(model, fam, NoCV(), 100_000,
                                  np.random.default_rng(14))
        from quadcv.families import mean_cov
        mu, sigma = mean_cov(fam)
        delta = mu - model.mean
        closed = (-0.5 * float(delta @ (a * delta))
                  - 0.5 * float(np.trace(np.diag(a) @ densify(sigma)))
                  + entropy(fam))
        assert elbo_estimate(samples, fam) == pytest.approx(closed, abs=0.05)
