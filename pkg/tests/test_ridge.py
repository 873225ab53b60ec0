import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lmmbench.ridge import (
    Mode,
    SingularGramError,
    fit_dual,
    fit_primal,
    kernel_ridge_fit,
    kernel_ridge_predict,
    predict,
    scaled_gram,
)
from lmmbench.spectrum import EigenSpectrum, active_features


def test_scalar_example():
    sol = fit_dual(np.array([[2.0]]), np.array([3.0]), 0.0)
    assert sol.dual_coef[0] == pytest.approx(0.75)
    assert sol.beta()[0] == pytest.approx(1.5)
    assert predict(sol, np.array([2.0])) == pytest.approx(3.0)
    assert sol.mode is Mode.DUAL


def test_zero_test_vector():
    rng = np.random.default_rng(0)
    sol = fit_dual(rng.standard_normal((5, 9)), rng.standard_normal(5), 0.1)
    assert predict(sol, np.zeros(9)) == 0.0


def test_large_gamma_shrinks_to_zero():
    rng = np.random.default_rng(1)
    X, y = rng.standard_normal((6, 10)), rng.standard_normal(6)
    sol = fit_dual(X, y, 1e8)
    np.testing.assert_allclose(sol.dual_coef, y / (6 * 1e8), rtol=1e-6)
    assert np.max(np.abs(predict(sol, X))) < 1e-6


def test_primal_dual_on_many_vectors():
    rng = np.random.default_rng(2)
    X, y = rng.standard_normal((30, 60)), rng.standard_normal(30)
    dual, primal = fit_dual(X, y, 0.1), fit_primal(X, y, 0.1)
    x_test = rng.standard_normal((100, 60))
    np.testing.assert_allclose(predict(dual, x_test), predict(primal, x_test), rtol=1e-9)


@given(st.integers(1, 20), st.integers(1, 40), st.sampled_from([1e-3, 1e-1, 2.0]), st.integers(0, 2**32 - 1))
@settings(max_examples=40)
def test_push_through_identity(n, p, gamma, seed):
    rng = np.random.default_rng(seed)
    X, y = rng.standard_normal((n, p)), rng.standard_normal(n)
    np.testing.assert_allclose(fit_dual(X, y, gamma).beta(), fit_primal(X, y, gamma).beta(), rtol=1e-8, atol=1e-12)


def test_interpolation():
    rng = np.random.default_rng(3)
    X, y = rng.standard_normal((12, 40)), rng.standard_normal(12)
    sol = fit_dual(X, y, 0.0)
    assert np.linalg.norm(predict(sol, X) - y) <= 1e-8 * np.linalg.norm(y)
    assert sol.min_eig_A > 0


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.integers(0, 1000))
@settings(max_examples=30)
def test_shrinkage_monotone(g1, g2, seed):
    lo, hi = sorted((g1, g2))
    rng = np.random.default_rng(seed)
    X, y = rng.standard_normal((8, 20)), rng.standard_normal(8)
    assert np.linalg.norm(fit_dual(X, y, lo).dual_coef) >= np.linalg.norm(fit_dual(X, y, hi).dual_coef) * (1 - 1e-12)


def test_kernel_oracle_with_orthonormal_W():
    rng = np.random.default_rng(4)
    spec = EigenSpectrum.finite(6)
    n, p, gamma = 10, 50, 0.05
    z, z_test = rng.uniform(0, math.pi, n), rng.uniform(0, math.pi, 25)
    Phi, phi_test = active_features(spec, z), active_features(spec, z_test)
    W, _ = np.linalg.qr(rng.standard_normal((p, 6)))
    X = math.sqrt(p) * Phi @ W.T
    y = rng.standard_normal(n)
    lmm = predict(fit_dual(X, y, gamma), math.sqrt(p) * phi_test @ W.T)
    kern = kernel_ridge_predict(kernel_ridge_fit(Phi, y, n * gamma), phi_test)
    np.testing.assert_allclose(lmm, kern, rtol=1e-8, atol=1e-12)


def test_singular_gram():
    X = np.array([[1.0, 0.0], [2.0, 0.0], [0.0, 1.0]])
    y = np.array([1.0, 2.0, 3.0])
    with pytest.raises(SingularGramError, match="singular Gram"):
        fit_dual(X, y, 0.0)
    sol = fit_dual(X, y, 0.0, pinv=True)
    np.testing.assert_allclose(predict(sol, X), y, atol=1e-10)
    np.testing.assert_allclose(sol.beta(), np.linalg.pinv(X / math.sqrt(2)) @ y, atol=1e-10)


def test_dimension_errors():
    rng = np.random.default_rng(5)
    sol = fit_dual(rng.standard_normal((4, 7)), rng.standard_normal(4), 0.1)
    with pytest.raises(ValueError):
        predict(sol, np.zeros(6))
    with pytest.raises(ValueError):
        fit_dual(rng.standard_normal((4, 7)), np.zeros(3), 0.1)
    with pytest.raises(ValueError):
        fit_dual(rng.standard_normal((4, 7)), np.zeros(4), -1.0)


def test_blocked_gram_matches_direct():
    rng = np.random.default_rng(6)
    X = rng.standard_normal((5, 20_000))
    np.testing.assert_allclose(scaled_gram(X), X @ X.T / X.shape[1], rtol=1e-12, atol=1e-14)


class TestKernelRidge:
    def test_zero_response(self):
        Phi = np.random.default_rng(7).standard_normal((5, 3))
        assert not np.any(kernel_ridge_fit(Phi, np.zeros(5), 0.3))

    def test_rank_one_two_by_two(self):
        Phi = np.array([[1.0], [2.0]])
        y = np.array([1.0, -1.0])
        reg = 0.5
        # (Phi Phi^T + reg I) = [[1.5, 2], [2, 4.5]], det = 2.75
        alpha = np.array([4.5 * 1 - 2 * (-1), -2 * 1 + 1.5 * (-1)]) / 2.75
        assert kernel_ridge_fit(Phi, y, reg)[0] == pytest.approx(alpha[0] + 2 * alpha[1], abs=1e-12)

    def test_needs_positive_reg(self):
        with pytest.raises(ValueError):
            kernel_ridge_fit(np.eye(2), np.ones(2), 0.0)
