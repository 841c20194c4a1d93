import numpy as np
import pytest

from quadcv.families import (
    MeanCholesky,
    MeanDiagLowRank,
    MeanLogScale,
    NoiseDraw,
    chol_matrix,
    entropy,
    entropy_grad,
    from_vector,
    jtvp,
    mean_cov,
    num_params,
    sample_noise,
    to_vector,
    transform,
)

from helpers import central_diff, densify, rel_err


def make_family(kind, rng, d=5, r=2):
    mean = rng.standard_normal(d)
    if kind == "diag":
        return MeanLogScale(mean, 0.3 * rng.standard_normal(d))
    if kind == "diag_lowrank":
        return MeanDiagLowRank(mean, 0.3 * rng.standard_normal(d),
                               0.5 * rng.standard_normal((d, r)))
    if kind == "cholesky":
        tril = 0.3 * np.tril(rng.standard_normal((d, d)))
        return MeanCholesky(mean, tril)
    raise ValueError(kind)


ALL_KINDS = ("diag", "diag_lowrank", "cholesky")


class TestSampleNoise:
    def test_shapes_diag(self):
        fam = MeanLogScale(np.zeros(3), np.zeros(3))
        noise = sample_noise(fam, np.random.default_rng(0))
        assert noise.eps_d.shape == (3,)
        assert noise.eps_r.shape == (0,)

    def test_shapes_low_rank(self):
        fam = MeanDiagLowRank(np.zeros(3), np.zeros(3), np.zeros((3, 2)))
        noise = sample_noise(fam, np.random.default_rng(0))
        assert noise.eps_d.shape == (3,)
        assert noise.eps_r.shape == (2,)

    def test_standard_normal_moments(self):
        fam = MeanLogScale(np.zeros(2), np.zeros(2))
        rng = np.random.default_rng(11)
        n = 100_000
        draws = np.stack([sample_noise(fam, rng).eps_d for _ in range(n)])
        assert np.all(np.abs(draws.mean(axis=0)) < 3.0 / np.sqrt(n))
        assert np.all(np.abs(draws.var(axis=0) - 1.0) < 0.05)


class TestTransform:
    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_zero_noise_gives_mean(self, kind):
        fam = make_family(kind, np.random.default_rng(1))
        noise = NoiseDraw(np.zeros(fam.dim),
                          np.zeros(getattr(fam, "rank", 0)))
        np.testing.assert_allclose(transform(fam, noise), fam.mean)

    def test_identity_scale(self):
        fam = MeanLogScale(np.zeros(2), np.zeros(2))
        noise = NoiseDraw(np.array([1.0, -2.0]), np.zeros(0))
        np.testing.assert_array_equal(transform(fam, noise), [1.0, -2.0])

    def test_empirical_covariance_low_rank(self):
        rng = np.random.default_rng(2)
        fam = make_family("diag_lowrank", rng, d=4, r=2)
        n = 100_000
        zs = np.stack([transform(fam, sample_noise(fam, rng))
                       for _ in range(n)])
        _, sigma = mean_cov(fam)
        target = densify(sigma)
        emp = np.cov(zs.T)
        err = np.linalg.norm(emp - target) / np.linalg.norm(target)
        assert err < 0.05


class TestMeanCov:
    def test_unit_diag(self):
        fam = MeanLogScale(np.zeros(3), np.zeros(3))
        _, sigma = mean_cov(fam)
        np.testing.assert_allclose(densify(sigma), np.eye(3))

    def test_scaled_low_rank_with_zero_factor(self):
        fam = MeanDiagLowRank(np.zeros(3), np.full(3, np.log(2.0)),
                              np.zeros((3, 1)))
        _, sigma = mean_cov(fam)
        np.testing.assert_allclose(densify(sigma), 4.0 * np.eye(3))

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_matches_sampling(self, kind):
        rng = np.random.default_rng(5)
        fam = make_family(kind, rng, d=3)
        n = 100_000
        zs = np.stack([transform(fam, sample_noise(fam, rng))
                       for _ in range(n)])
        mu, sigma = mean_cov(fam)
        assert np.linalg.norm(zs.mean(axis=0) - mu) < 0.05 * (
            1.0 + np.linalg.norm(mu))
        target = densify(sigma)
        err = np.linalg.norm(np.cov(zs.T) - target) / np.linalg.norm(target)
        assert err < 0.05


class TestEntropy:
    def test_unit_gaussian_1d(self):
        fam = MeanLogScale(np.zeros(1), np.zeros(1))
        assert entropy(fam) == pytest.approx(1.4189385, abs=1e-6)

    def test_identity_cholesky_2d(self):
        fam = MeanCholesky(np.zeros(2), np.zeros((2, 2)))
        assert entropy(fam) == pytest.approx(2.8378771, abs=1e-6)

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_grad_matches_finite_differences(self, kind):
        rng = np.random.default_rng(6)
        fam = make_family(kind, rng, d=6, r=2)
        fd = central_diff(lambda w: entropy(from_vector(fam, w)),
                          to_vector(fam))
        assert rel_err(fd, entropy_grad(fam).flatten()) < 1e-6

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_grad_mean_block_is_zero(self, kind):
        fam = make_family(kind, np.random.default_rng(7))
        assert np.all(entropy_grad(fam).mean_block == 0.0)


class TestJtvp:
    def test_zero_vector(self):
        rng = np.random.default_rng(8)
        fam = make_family("diag_lowrank", rng)
        noise = sample_noise(fam, rng)
        out = jtvp(fam, noise, np.zeros(fam.dim))
        assert np.all(out.flatten() == 0.0)

    def test_scalar_case(self):
        fam = MeanLogScale(np.zeros(1), np.zeros(1))
        noise = NoiseDraw(np.array([2.0]), np.zeros(0))
        out = jtvp(fam, noise, np.array([3.0]))
        assert out.mean_block[0] == pytest.approx(3.0)
        assert out.scale_block[0] == pytest.approx(6.0)

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_linearity(self, kind):
        rng = np.random.default_rng(9)
        fam = make_family(kind, rng)
        noise = sample_noise(fam, rng)
        u, v = rng.standard_normal(fam.dim), rng.standard_normal(fam.dim)
        a, b = 1.7, -0.3
        combo = jtvp(fam, noise, a * u + b * v).flatten()
        parts = (a * jtvp(fam, noise, u) + b * jtvp(fam, noise, v)).flatten()
        np.testing.assert_allclose(combo, parts, atol=1e-12)

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_matches_finite_differences(self, kind):
        rng = np.random.default_rng(10)
        fam = make_family(kind, rng, d=4)
        noise = sample_noise(fam, rng)
        u = rng.standard_normal(4)
        fd = central_diff(
            lambda w: float(u @ transform(from_vector(fam, w), noise)),
            to_vector(fam))
        assert rel_err(fd, jtvp(fam, noise, u).flatten()) < 1e-6

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_composite_gradient(self, kind):
        # phi(z) = sum sin(z); d phi(T_w(eps)) / dw == jtvp(w, eps, cos(z))
        rng = np.random.default_rng(12)
        fam = make_family(kind, rng, d=4)
        noise = sample_noise(fam, rng)
        fd = central_diff(
            lambda w: float(np.sum(np.sin(
                transform(from_vector(fam, w), noise)))),
            to_vector(fam))
        z = transform(fam, noise)
        assert rel_err(fd, jtvp(fam, noise, np.cos(z)).flatten()) < 1e-5


def test_num_params():
    assert num_params(MeanLogScale(np.zeros(3), np.zeros(3))) == 6
    assert num_params(
        MeanDiagLowRank(np.zeros(3), np.zeros(3), np.zeros((3, 2)))) == 12
    assert num_params(MeanCholesky(np.zeros(3), np.zeros((3, 3)))) == 9


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_vector_round_trip(kind):
    rng = np.random.default_rng(13)
    fam = make_family(kind, rng)
    vec = to_vector(fam)
    again = to_vector(from_vector(fam, vec))
    np.testing.assert_array_equal(vec, again)
    assert vec.shape == (num_params(fam),)


def test_chol_matrix_positive_diagonal():
    rng = np.random.default_rng(14)
    fam = make_family("cholesky", rng)
    ell = chol_matrix(fam)
    assert np.all(np.diag(ell) > 0)
    assert np.allclose(np.triu(ell, 1), 0.0)
