import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import sym3_eigen
from pcahmm.pca import (
    CovarianceAccumulator,
    FeatureSequence,
    PCAError,
    ProjectionMatrix,
    concat_features,
    eigh_descending,
    fit_pca,
    project,
    stack,
    variance_retained,
)
from pcahmm.segment import SegmentSpec, segment


def random_U(seed, M=8, N=40):
    return np.random.default_rng(seed).standard_normal((M, N)) * np.linspace(3, 0.5, M)[:, None]


class TestFitPCA:
    def test_three_by_eight_against_closed_form(self):
        U = np.array([
            [2.0, -1.0, 0.5, 3.0, 1.5, -2.0, 0.0, 1.0],
            [1.0, 0.0, -1.5, 2.0, 2.5, -1.0, 0.5, -0.5],
            [0.5, 2.0, 1.0, -1.0, 0.0, 1.5, -2.5, 0.5],
        ])
        W = fit_pca(U, 2)
        R = np.cov(U)
        vals, vecs = sym3_eigen(R)
        np.testing.assert_allclose(W.eigenvalues, vals, rtol=0, atol=1e-10 * np.abs(vals).max())
        np.testing.assert_allclose(W.W, vecs[:, :2].T, rtol=0, atol=1e-10)

    def test_covariance_normalization(self):
        U = random_U(1)
        R = np.cov(U)  # 1/(N-1), windows as observations
        W = fit_pca(U, 3)
        np.testing.assert_allclose(np.sort(W.eigenvalues)[::-1], np.linalg.eigvalsh(R)[::-1], rtol=1e-12)
        np.testing.assert_allclose(W.mean, U.mean(axis=1), rtol=1e-12)

    def test_uncentered_uses_second_moment(self):
        U = random_U(2) + 5.0
        W = fit_pca(U, 3, center=False)
        R = U @ U.T / U.shape[1]
        np.testing.assert_allclose(W.eigenvalues, np.linalg.eigvalsh(R)[::-1], rtol=1e-11)
        np.testing.assert_array_equal(W.mean, 0.0)
        assert not W.centered

    def test_segment_matrix_and_pool(self):
        x = np.random.default_rng(3).standard_normal(400)
        spec = SegmentSpec(8, 4)
        a, b = segment(x[:200], spec), segment(x[200:], spec)
        pooled = fit_pca([a, b], 3)
        direct = fit_pca(np.hstack([a.U, b.U]), 3)
        np.testing.assert_allclose(pooled.W, direct.W, atol=1e-12)
        np.testing.assert_allclose(pooled.eigenvalues, direct.eigenvalues, rtol=1e-11)

    def test_p_not_below_m(self):
        with pytest.raises(PCAError, match="p < M"):
            fit_pca(random_U(0), 8)

    def test_needs_more_windows_than_length(self):
        with pytest.raises(PCAError, match="more windows"):
            fit_pca(np.ones((8, 8)), 2)

    def test_constant_columns(self):
        U = np.tile(np.arange(4.0)[:, None], (1, 9))
        W = fit_pca(U, 2)
        np.testing.assert_array_equal(W.eigenvalues, 0.0)
        np.testing.assert_allclose(W.W @ W.W.T, np.eye(2), atol=1e-12)
        assert variance_retained(W) == 1.0

    def test_sign_convention(self):
        W = fit_pca(random_U(4), 5)
        for row in W.W:
            assert row[np.argmax(np.abs(row))] >= 0

    def test_equal_eigenvalues_keep_index_order(self):
        vals, vecs = eigh_descending(np.diag([2.0, 5.0, 2.0, 1.0]))
        np.testing.assert_array_equal(vals, [5.0, 2.0, 2.0, 1.0])
        np.testing.assert_array_equal(np.abs(vecs[:, 0]), [0, 1, 0, 0])

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 7))
    def test_invariants(self, seed, p):
        U = random_U(seed)
        W = fit_pca(U, p)
        R = np.cov(U)
        assert np.all(np.diff(W.eigenvalues) <= 0)
        assert W.eigenvalues.min() >= -1e-9
        np.testing.assert_allclose(W.W @ W.W.T, np.eye(p), atol=1e-9)
        for j in range(p):
            resid = np.linalg.norm(R @ W.W[j] - W.eigenvalues[j] * W.W[j])
            assert resid <= 1e-8 * np.linalg.norm(R, 2)
        V = project(W, U).vectors
        np.testing.assert_allclose(V.var(axis=0, ddof=1), W.eigenvalues[:p], rtol=1e-8)
        Uc = U - U.mean(axis=1, keepdims=True)
        rec = np.linalg.norm(Uc - W.W.T @ (W.W @ Uc)) ** 2 / np.linalg.norm(Uc) ** 2
        assert abs(rec - (1 - variance_retained(W))) <= 1e-6


class TestProject:
    def test_identity_rows(self):
        M = 5
        W = ProjectionMatrix(W=np.eye(M)[:2], eigenvalues=np.ones(M), mean=np.zeros(M), centered=False)
        U = np.arange(15.0).reshape(5, 3)
        np.testing.assert_array_equal(project(W, U).vectors, U[:2].T)

    def test_hand_product(self):
        Wm = np.array([[1.0, 0.0, -1.0, 2.0], [0.5, 1.0, 0.0, 0.0]])
        U = np.array([[1.0, 2.0, 0.0], [0.0, 1.0, 3.0], [2.0, 0.0, 1.0], [1.0, 1.0, 1.0]])
        W = ProjectionMatrix(W=Wm, eigenvalues=np.zeros(4), mean=np.zeros(4), centered=False)
        # column n of U mapped through W, by hand
        expected = np.array([[1 - 2 + 2, 0.5], [2 + 2, 1 + 1], [-1 + 2, 3]])
        np.testing.assert_array_equal(project(W, U, source=7).vectors, expected)
        assert project(W, U, source=7).source == 7

    def test_subtracts_training_mean(self):
        mean = np.array([1.0, 2.0])
        W = ProjectionMatrix(W=np.eye(2)[:1], eigenvalues=np.ones(2), mean=mean, centered=True)
        U = np.array([[3.0, 1.0], [0.0, 0.0]])
        np.testing.assert_array_equal(project(W, U).vectors[:, 0], [2.0, 0.0])

    def test_shape_mismatch_names_shapes(self):
        W = fit_pca(random_U(0), 2)
        with pytest.raises(PCAError, match=r"\(2, 8\).*\(5, 3\)"):
            project(W, np.zeros((5, 3)))


class TestVarianceRetained:
    def _pm(self, vals, p):
        M = len(vals)
        return ProjectionMatrix(W=np.eye(M)[:p], eigenvalues=np.asarray(vals, float), mean=np.zeros(M))

    def test_hand_spectrum(self):
        assert variance_retained(self._pm([4, 3, 2, 1], 2)) == pytest.approx(0.7, abs=1e-15)

    def test_full_retention(self):
        assert variance_retained(self._pm([4, 3, 2, 1], 4)) == 1.0

    def test_negative_roundoff_clamped(self):
        assert variance_retained(self._pm([2, 1, -1e-12], 2)) == 1.0


class TestConcat:
    def test_hand(self):
        out = concat_features([FeatureSequence([[1.0, 2.0]], source=3), FeatureSequence([[3.0]], source=3)])
        np.testing.assert_array_equal(out.vectors, [[1, 2, 3]])
        assert out.source == 3 and out.dim == 3

    def test_two_ten_dim(self):
        a = FeatureSequence(np.zeros((5, 10)))
        assert concat_features([a, a]).dim == 20

    def test_single_is_identity(self):
        a = FeatureSequence(np.arange(6.0).reshape(3, 2), source=1)
        out = concat_features([a])
        np.testing.assert_array_equal(out.vectors, a.vectors)
        assert out.source == 1

    def test_length_mismatch(self):
        with pytest.raises(PCAError, match="lengths"):
            concat_features([FeatureSequence(np.zeros((2, 1))), FeatureSequence(np.zeros((3, 1)))])

    def test_source_mismatch(self):
        with pytest.raises(PCAError, match="sources"):
            concat_features([FeatureSequence(np.zeros((2, 1)), 1), FeatureSequence(np.zeros((2, 1)), 2)])

    def test_stack(self):
        X, lengths = stack([FeatureSequence(np.zeros((2, 3))), FeatureSequence(np.ones((4, 3)))])
        assert X.shape == (6, 3) and lengths == [2, 4]


class TestAccumulator:
    def test_offset_signal_conditioning(self):
        U = random_U(9) + 1e6
        acc = CovarianceAccumulator(8)
        for part in np.array_split(U, 4, axis=1):
            acc.add(part)
        np.testing.assert_allclose(acc.covariance(), np.cov(U), rtol=1e-8, atol=1e-8)

    def test_wrong_length(self):
        with pytest.raises(PCAError, match="window length"):
            CovarianceAccumulator(4).add(np.zeros((3, 5)))
