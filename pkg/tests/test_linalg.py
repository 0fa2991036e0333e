"""Cholesky, inverse quadratic forms and Schur complements."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from escortbounds import linalg
from escortbounds.errors import NotPositiveDefinite


class TestCholesky:
    def test_reconstructs(self):
        A = np.array([[4.0, 2.0], [2.0, 3.0]])
        L = linalg.cholesky(A)
        np.testing.assert_allclose(L @ L.T, A, rtol=1e-15)
        assert L[0, 1] == 0.0

    def test_indefinite_fails_at_second_pivot(self):
        with pytest.raises(NotPositiveDefinite) as info:
            linalg.cholesky([[1.0, 2.0], [2.0, 1.0]])
        assert info.value.pivot == 2

    def test_singular_rank_one(self):
        v = np.array([1.0, 2.0, 3.0])
        with pytest.raises(NotPositiveDefinite) as info:
            linalg.cholesky(np.outer(v, v))
        assert info.value.pivot == 2
        assert linalg.largest_pd_block(np.outer(v, v)) == 1

    def test_not_square(self):
        with pytest.raises(ValueError):
            linalg.cholesky(np.ones((2, 3)))

    def test_dimension_cap(self):
        with pytest.raises(ValueError):
            linalg.cholesky(np.eye(linalg.MAX_DIM + 1))


class TestQuadraticForm:
    def test_identity(self):
        assert linalg.quadratic_form_inv(np.eye(2), [3.0, 4.0]) == pytest.approx(25.0, rel=1e-15)

    def test_scalar_uniform_max(self):
        # N = 4/3 and lambda' = 2/3 for uniform-max n=1 at theta=1
        assert linalg.quadratic_form_inv([[4.0 / 3.0]], [2.0 / 3.0]) == pytest.approx(1.0 / 3.0, rel=1e-15)

    def test_scalar_normal_x4(self):
        assert linalg.quadratic_form_inv([[6.0]], [8.0]) == pytest.approx(32.0 / 3.0, rel=1e-15)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            linalg.quadratic_form_inv(np.eye(2), [1.0])

    def test_solve(self):
        A = np.array([[4.0, 1.0], [1.0, 3.0]])
        np.testing.assert_allclose(A @ linalg.solve(A, [1.0, 2.0]), [1.0, 2.0], rtol=1e-14)


def _gram(rng, m, extra=3):
    X = rng.standard_normal((m, m + extra))
    return X @ X.T


class TestSchur:
    def test_diagonal_example(self):
        S, J = linalg.schur_complement([[2.0]], [[1.0]], [[1.0]])
        assert J[0, 0] == 1.0 and S[0, 0] == 1.0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            linalg.schur_complement(np.eye(2), np.ones((2, 3)), np.eye(2))

    def test_random_gram_blocks_positive_definite(self):
        rng = np.random.default_rng(42)
        for _ in range(100):
            q, r = rng.integers(1, 4), rng.integers(1, 5)
            G = _gram(rng, q + r)
            S, _ = linalg.schur_complement(G[:q, :q], G[:q, q:], G[q:, q:])
            assert linalg.is_positive_definite(S)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 6), st.integers(0, 2 ** 32 - 1))
    def test_quadratic_form_matches_explicit_inverse(self, m, seed):
        rng = np.random.default_rng(seed)
        A = _gram(rng, m) + 0.1 * np.eye(m)
        M = rng.standard_normal(m)
        ref = M @ np.linalg.inv(A) @ M
        np.testing.assert_allclose(linalg.quadratic_form_inv(A, M), ref, rtol=1e-8)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 3), st.integers(1, 4), st.integers(0, 2 ** 32 - 1))
    def test_schur_matches_explicit_inverse(self, q, r, seed):
        rng = np.random.default_rng(seed)
        G = _gram(rng, q + r) + 0.1 * np.eye(q + r)
        S, J = linalg.schur_complement(G[:q, :q], G[:q, q:], G[q:, q:])
        ref = G[:q, q:] @ np.linalg.inv(G[q:, q:]) @ G[q:, :q]
        np.testing.assert_allclose(J, ref, rtol=1e-8, atol=1e-10)
        np.testing.assert_allclose(S + J, G[:q, :q], rtol=1e-12)


def test_condition_estimate():
    assert linalg.condition_estimate(np.diag([1.0, 100.0])) == pytest.approx(100.0)
