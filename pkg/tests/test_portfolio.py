import numpy as np
import pytest

from ersecov.erse import erse
from ersecov.errors import SingularCovarianceError
from ersecov.portfolio import WeightVector, ew_weights, gmv_weights, unit_cost_portfolio
from ersecov.spectral import deviation_degree, moments_from_covariance


def _random_pd(n, rng):
    A = rng.normal(size=(n, n))
    return A @ A.T + 0.1 * np.eye(n)


class TestGmv:
    @pytest.mark.parametrize("cov, expected", [
        (np.eye(2), [0.5, 0.5]),
        (np.diag([1.0, 3.0]), [0.75, 0.25]),
        (np.array([[2.0, 1.0], [1.0, 2.0]]), [0.5, 0.5]),
    ])
    def test_examples(self, cov, expected):
        np.testing.assert_allclose(gmv_weights(cov).weights, expected, atol=1e-14)

    def test_accepts_estimate(self):
        est = erse(moments_from_covariance(np.array([[1.0, 0.8], [0.8, 1.0]])))
        w = gmv_weights(est)
        assert w.strategy_label == "ERSE"
        np.testing.assert_allclose(w.weights, [0.5, 0.5])

    def test_residual_and_sum(self, rng):
        for _ in range(50):
            n = int(rng.integers(2, 40))
            S = _random_pd(n, rng)
            w = gmv_weights(S).weights
            assert abs(w.sum() - 1) < 1e-10
            g = S @ w
            assert np.linalg.norm(g - g.mean()) <= 1e-8 * np.linalg.norm(S)

    def test_optimal_against_random_budgets(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            n = int(rng.integers(2, 7))
            S = _random_pd(n, rng)
            w = gmv_weights(S).weights
            v = rng.normal(size=(10_000, n)) * rng.uniform(0.01, 3, size=(10_000, 1))
            v = v - v.mean(axis=1, keepdims=True) + 1.0 / n
            var_v = np.einsum("ki,ij,kj->k", v, S, v)
            assert w @ S @ w <= var_v.min() + 1e-12

    def test_scale_invariance(self, rng):
        S = _random_pd(8, rng)
        base = gmv_weights(S).weights
        for c in (1e-4, 0.3, 7.0, 1e5):
            np.testing.assert_allclose(gmv_weights(c * S).weights, base, atol=1e-10)

    def test_singular_rejected(self):
        with pytest.raises(SingularCovarianceError, match="smallest eigenvalue"):
            gmv_weights(np.ones((3, 3)))
        with pytest.raises(SingularCovarianceError):
            gmv_weights(np.diag([1.0, -1.0]))


class TestSimpleWeights:
    def test_equal(self):
        np.testing.assert_array_equal(ew_weights(4).weights, [0.25] * 4)
        np.testing.assert_array_equal(ew_weights(1).weights, [1.0])
        for n in (3, 7, 11, 999):
            assert abs(ew_weights(n).weights.sum() - 1) < 1e-12
        with pytest.raises(ValueError):
            ew_weights(0)

    def test_weight_vector_checks_budget(self):
        with pytest.raises(ValueError, match="sum"):
            WeightVector([0.5, 0.6])
        with pytest.raises(ValueError, match="finite"):
            WeightVector([np.nan, 1.0])


class TestUnitCost:
    def test_uniform(self):
        w = unit_cost_portfolio(np.full(4, 0.5)).weights
        np.testing.assert_allclose(w, [0.25] * 4)
        assert np.linalg.norm(w) == pytest.approx(0.5)

    def test_two_assets(self):
        w = unit_cost_portfolio([0.6, 0.8]).weights
        np.testing.assert_allclose(w, [3 / 7, 4 / 7])
        assert np.linalg.norm(w) == pytest.approx(1 / 1.4)
        assert deviation_degree([0.6, 0.8]) == pytest.approx(1.96)

    def test_zero_projection(self):
        with pytest.raises(ValueError, match="orthogonal"):
            unit_cost_portfolio([np.sqrt(0.5), -np.sqrt(0.5)])

    def test_norm_identity_and_threshold_equivalence(self):
        rng = np.random.default_rng(6)
        for _ in range(1000):
            n = int(rng.integers(2, 30))
            q = rng.normal(size=n)
            q /= np.linalg.norm(q)
            if abs(q.sum()) < 1e-6:
                continue
            T = deviation_degree(q)
            norm = np.linalg.norm(unit_cost_portfolio(q).weights)
            assert abs(norm * np.sqrt(T) - 1) < 1e-10
            for delta in (0.05, 0.25, 1.0):
                if abs(T - delta) > 1e-9:
                    assert (T >= delta) == (norm <= 1 / np.sqrt(delta))
