import math

import numpy as np
import pytest

from ecobo import gp


def naive_posterior_mean(X, y, params, Xq):
    """Dense-solve oracle: no Cholesky, no standardization shortcuts."""
    def k(a, b):
        r = math.sqrt(sum(((ai - bi) / li) ** 2
                          for ai, bi, li in zip(a, b, params.lengthscales)))
        s5 = math.sqrt(5.0)
        return params.signal_variance * (1 + s5 * r + 5 * r * r / 3) * math.exp(-s5 * r)

    n = len(X)
    K = np.array([[k(X[i], X[j]) for j in range(n)] for i in range(n)])
    K += params.noise_variance * np.eye(n)
    mu, sd = y.mean(), y.std() if y.std() > 1e-12 else 1.0
    alpha = np.linalg.solve(K, (y - mu) / sd)
    ks = np.array([[k(q, X[i]) for i in range(n)] for q in Xq])
    return mu + sd * (ks @ alpha)


@pytest.fixture(scope="module")
def sin_model():
    X = np.linspace(0, 1, 8)[:, None]
    y = np.sin(2 * np.pi * X[:, 0])
    return X, y, gp.fit(X, y, seed=0)


class TestKernel:
    def test_zero_distance_is_signal_variance(self):
        params = gp.KernelParams(2.0, np.array([0.4, 0.7]), 1e-6)
        x = np.array([0.3, 0.9])
        assert gp.kernel_matern52(x, x, params) == pytest.approx(2.0, abs=1e-15)

    def test_unit_scaled_distance_closed_form(self):
        params = gp.KernelParams(1.0, np.array([1.0]), 1e-6)
        expected = (1 + math.sqrt(5) + 5 / 3) * math.exp(-math.sqrt(5))
        assert gp.kernel_matern52([0.0], [1.0], params) == pytest.approx(expected, abs=1e-12)

    def test_symmetry(self):
        rng = np.random.default_rng(1)
        params = gp.KernelParams(1.3, rng.uniform(0.2, 2.0, 3), 1e-6)
        for _ in range(20):
            a, b = rng.random(3), rng.random(3)
            assert gp.kernel_matern52(a, b, params) == gp.kernel_matern52(b, a, params)

    def test_decays_to_zero(self):
        params = gp.KernelParams(1.0, np.array([0.1]), 1e-6)
        assert gp.kernel_matern52([0.0], [50.0], params) < 1e-12

    def test_dimension_mismatch(self):
        params = gp.KernelParams(1.0, np.array([1.0]), 1e-6)
        with pytest.raises(ValueError):
            gp.kernel_matern52([0.0, 1.0], [1.0], params)


class TestKernelParams:
    def test_positivity_enforced(self):
        with pytest.raises(ValueError):
            gp.KernelParams(-1.0, np.array([1.0]), 1e-6)
        with pytest.raises(ValueError):
            gp.KernelParams(1.0, np.array([0.0]), 1e-6)

    def test_noise_floor_enforced(self):
        with pytest.raises(ValueError):
            gp.KernelParams(1.0, np.array([1.0]), 1e-9)


class TestFit:
    def test_constant_targets(self):
        X = np.linspace(0, 1, 6)[:, None]
        model = gp.fit(X, np.full(6, 3.7), seed=1)
        assert model.params.signal_variance <= model.params.noise_variance
        mu, _ = gp.predict(model, np.array([[0.23], [0.77]]))
        np.testing.assert_allclose(mu, 3.7, atol=1e-9)

    def test_noise_free_interpolation(self, sin_model):
        # the 1e-6 noise floor bounds the standardized miss at floor*|alpha|,
        # a few 1e-6 here; see the acceptance suite for the raw-units gate
        X, y, model = sin_model
        mu, _ = gp.predict(model, X)
        assert np.abs((mu - y) / model.y_std).max() < 1e-5

    def test_matches_dense_solve_oracle(self, sin_model):
        X, y, model = sin_model
        Xq = np.array([[0.05], [0.41], [0.93]])
        mu, _ = gp.predict(model, Xq)
        np.testing.assert_allclose(mu, naive_posterior_mean(X, y, model.params, Xq),
                                   rtol=1e-9, atol=1e-9)

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        X = rng.random((12, 2))
        y = rng.standard_normal(12)
        m1 = gp.fit(X, y, seed=99)
        m2 = gp.fit(X, y, seed=99)
        assert m1.params.signal_variance == m2.params.signal_variance
        np.testing.assert_array_equal(m1.params.lengthscales, m2.params.lengthscales)
        assert m1.params.noise_variance == m2.params.noise_variance

    def test_cholesky_reconstructs_kernel(self, sin_model):
        X, _, model = sin_model
        from ecobo import backend
        K = backend.cross_covariance(X, X, model.params.lengthscales,
                                     model.params.signal_variance)
        K[np.diag_indices_from(K)] += model.params.noise_variance
        rec = model.chol @ model.chol.T
        assert np.abs(rec - K).max() / np.abs(K).max() < 1e-8

    def test_too_few_points(self):
        with pytest.raises(gp.GpFitError):
            gp.fit(np.array([[0.5]]), np.array([1.0]), seed=0)

    def test_non_finite_targets(self):
        X = np.linspace(0, 1, 4)[:, None]
        with pytest.raises(gp.GpFitError):
            gp.fit(X, np.array([1.0, np.nan, 2.0, 3.0]), seed=0)

    def test_duplicate_points_survive_via_jitter(self):
        X = np.array([[0.5], [0.5], [0.5], [0.9]])
        model = gp.fit(X, np.array([1.0, 1.0, 1.0, 2.0]), seed=0)
        mu, var = gp.predict(model, np.array([0.5]))
        assert math.isfinite(mu) and var >= 0


class TestPredict:
    def test_prior_reversion_far_away(self, sin_model):
        _, _, model = sin_model
        mu, var = gp.predict(model, np.array([200.0]))
        assert mu == pytest.approx(model.y_mean, abs=1e-9)
        prior = model.y_std ** 2 * (model.params.signal_variance
                                    + model.params.noise_variance)
        assert var == pytest.approx(prior, rel=1e-9)

    def test_variance_nonnegative_everywhere(self, sin_model):
        _, _, model = sin_model
        Xq = np.random.default_rng(5).random((1000, 1))
        _, var = gp.predict(model, Xq)
        assert np.all(var >= 0)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(8)
        X = rng.random((10, 2))
        y = rng.standard_normal(10)
        perm = rng.permutation(10)
        m1 = gp.fit(X, y, seed=4)
        m2 = gp.fit(X[perm], y[perm], seed=4)
        Xq = rng.random((7, 2))
        mu1, v1 = gp.predict(m1, Xq)
        mu2, v2 = gp.predict(m2, Xq)
        np.testing.assert_allclose(mu1, mu2, rtol=1e-6)
        np.testing.assert_allclose(v1, v2, rtol=1e-5, atol=1e-10)

    def test_affine_consistency(self):
        rng = np.random.default_rng(11)
        X = rng.random((14, 2))
        y = np.cos(4 * X[:, 0]) + X[:, 1]
        a, b = 3.5, -2.0
        m1 = gp.fit(X, y, seed=6)
        m2 = gp.fit(X, a * y + b, seed=6)
        Xq = rng.random((25, 2))
        mu1, _ = gp.predict(m1, Xq)
        mu2, _ = gp.predict(m2, Xq)
        np.testing.assert_allclose(mu2, a * mu1 + b, rtol=1e-6, atol=1e-6)

    def test_dimension_mismatch(self, sin_model):
        _, _, model = sin_model
        with pytest.raises(ValueError):
            gp.predict(model, np.array([0.1, 0.2]))


class TestLogMarginalLikelihood:
    def test_single_point_closed_form(self):
        # 1x1 case: K + noise = 1, y = 0  ->  -0.5 log(2 pi)
        params = gp.KernelParams(1.0 - 1e-6, np.array([1.0]), 1e-6)
        lml = gp.log_marginal_likelihood(np.array([[0.3]]), np.array([0.0]), params)
        assert lml == pytest.approx(-0.5 * math.log(2 * math.pi), abs=1e-12)

    def test_finite_across_noise_levels(self):
        rng = np.random.default_rng(2)
        X = rng.random((9, 2))
        y = rng.standard_normal(9)
        for noise in (1e-6, 1e-3, 1e-1, 1.0, 10.0):
            params = gp.KernelParams(1.0, np.array([0.5, 0.5]), noise)
            assert math.isfinite(gp.log_marginal_likelihood(X, y, params))

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(13)
        X = rng.random((12, 2))
        y = np.sin(5 * X[:, 0]) * X[:, 1]
        z = (y - y.mean()) / y.std()
        params = gp.KernelParams(1.4, np.array([0.3, 0.8]), 1e-3)
        _, grad = gp.log_marginal_likelihood(X, z, params, return_grad=True)

        theta = np.log(np.concatenate(([params.signal_variance],
                                       params.lengthscales,
                                       [params.noise_variance])))
        h = 1e-6
        for j in range(len(theta)):
            tp, tm = theta.copy(), theta.copy()
            tp[j] += h
            tm[j] -= h
            def lml_at(t):
                p = gp.KernelParams(float(np.exp(t[0])), np.exp(t[1:-1]),
                                    float(np.exp(t[-1])))
                return gp.log_marginal_likelihood(X, z, p)
            fd = (lml_at(tp) - lml_at(tm)) / (2 * h)
            assert grad[j] == pytest.approx(fd, rel=1e-4)
