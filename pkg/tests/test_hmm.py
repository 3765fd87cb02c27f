import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_loglik, brute_viterbi, gauss_logpdf, viterbi_tie_free
from pcahmm import hmm
from pcahmm.cluster import Clustering, kmeans
from pcahmm.hmm import HMMError, HmmModel, baum_welch, forward_loglik, init_from_clusters, log_emission, viterbi
from pcahmm.pca import FeatureSequence


def random_model(rng, S, d, sparse=False):
    A = rng.dirichlet(np.ones(S), size=S)
    pi = rng.dirichlet(np.ones(S))
    if sparse and S > 1:
        A[0, -1] = 0.0
        A[0] /= A[0].sum()
    return HmmModel(A=A, pi=pi, means=rng.normal(0, 2, (S, d)), variances=rng.uniform(0.3, 2.0, (S, d)),
                    var_floor=np.full(d, 1e-6))


def two_state(sep=6.0):
    return HmmModel(A=np.array([[0.9, 0.1], [0.2, 0.8]]), pi=np.array([0.5, 0.5]),
                    means=np.array([[0.0, 0.0], [sep, -sep]]), variances=np.ones((2, 2)), var_floor=np.full(2, 1e-6))


def as_lists(m):
    return m.A.tolist(), m.pi.tolist(), m.means.tolist(), m.variances.tolist()


class TestHmmModel:
    def test_shape_check(self):
        with pytest.raises(HMMError, match="shapes"):
            HmmModel(A=np.eye(2), pi=np.ones(3) / 3, means=np.zeros((2, 1)), variances=np.ones((2, 1)),
                     var_floor=np.ones(1))

    def test_floor_positive(self):
        with pytest.raises(HMMError, match="floor"):
            HmmModel(A=np.eye(1), pi=np.ones(1), means=np.zeros((1, 1)), variances=np.ones((1, 1)),
                     var_floor=np.zeros(1))

    def test_check_rows(self):
        m = HmmModel(A=np.array([[0.5, 0.4], [0.5, 0.5]]), pi=np.array([0.5, 0.5]), means=np.zeros((2, 1)),
                     variances=np.ones((2, 1)), var_floor=np.ones(1) * 1e-3)
        with pytest.raises(HMMError, match="rows"):
            m.check()


class TestForward:
    def test_against_brute_force(self):
        rng = np.random.default_rng(0)
        for trial in range(30):
            S, d, T = rng.integers(1, 4), rng.integers(1, 3), rng.integers(1, 7)
            m = random_model(rng, S, d, sparse=trial % 3 == 0)
            X = rng.normal(0, 2, (T, d))
            ref = brute_loglik(*as_lists(m), X.tolist())
            assert forward_loglik(m, X) == pytest.approx(ref, rel=1e-10, abs=0)

    def test_single_state_factorizes(self):
        rng = np.random.default_rng(1)
        m = random_model(rng, 1, 3)
        X = rng.normal(size=(20, 3))
        ref = math.fsum(gauss_logpdf(x, m.means[0], m.variances[0]) for x in X)
        assert forward_loglik(m, X) == pytest.approx(ref, rel=1e-12)

    def test_append_bound(self):
        rng = np.random.default_rng(2)
        m = random_model(rng, 3, 2)
        X = rng.normal(0, 2, (30, 2))
        for T in range(1, 29):
            lhs = forward_loglik(m, X[: T + 1])
            rhs = forward_loglik(m, X[:T]) + log_emission(m, X[T : T + 1]).max()
            assert lhs <= rhs + 1e-9

    def test_long_sequence_matches_extended_precision(self):
        rng = np.random.default_rng(3)
        m = random_model(rng, 3, 2)
        _, X = hmm.sample(m, 500, rng)
        ll = forward_loglik(m, X)
        # log-space recursion in extended precision as the reference
        lb = log_emission(m, X).astype(np.longdouble)
        lA = np.log(m.A.astype(np.longdouble))
        la = np.log(m.pi.astype(np.longdouble)) + lb[0]
        for t in range(1, len(X)):
            z = la[:, None] + lA
            mx = z.max(axis=0)
            la = mx + np.log(np.exp(z - mx).sum(axis=0)) + lb[t]
        mx = la.max()
        ref = float(mx + np.log(np.exp(la - mx).sum()))
        assert math.isfinite(ll)
        assert ll == pytest.approx(ref, rel=1e-6)

    def test_far_outlier_stays_finite(self):
        m = two_state()
        X = np.array([[0.0, 0.0], [1e6, 1e6], [0.0, 0.0]])
        assert math.isfinite(forward_loglik(m, X))

    def test_accepts_feature_sequence(self):
        X = np.zeros((4, 2))
        assert forward_loglik(two_state(), FeatureSequence(X)) == forward_loglik(two_state(), X)

    def test_dimension_mismatch(self):
        with pytest.raises(HMMError, match="dimension"):
            forward_loglik(two_state(), np.zeros((3, 3)))

    def test_empty_sequence(self):
        with pytest.raises(HMMError, match="empty"):
            forward_loglik(two_state(), np.zeros((0, 2)))


class TestViterbi:
    def test_against_exhaustive(self):
        rng = np.random.default_rng(4)
        checked = 0
        for _ in range(30):
            S, d, T = rng.integers(1, 4), rng.integers(1, 3), rng.integers(1, 7)
            m = random_model(rng, S, d)
            X = rng.normal(0, 2, (T, d))
            path, score = viterbi(m, X, return_score=True)
            ref_path, ref_score = brute_viterbi(*as_lists(m), X.tolist())
            assert score == pytest.approx(ref_score, rel=1e-10, abs=1e-10)
            if viterbi_tie_free(*as_lists(m), X.tolist()):
                assert path.tolist() == ref_path
                checked += 1
        assert checked >= 25

    def test_exact_tie_goes_to_lowest_index(self):
        m = HmmModel(A=np.full((2, 2), 0.5), pi=np.array([0.5, 0.5]), means=np.zeros((2, 1)),
                     variances=np.ones((2, 1)), var_floor=np.ones(1) * 1e-6)
        assert viterbi(m, np.zeros((4, 1))).tolist() == [0, 0, 0, 0]

    def test_single_state(self):
        m = random_model(np.random.default_rng(5), 1, 2)
        assert viterbi(m, np.random.default_rng(6).normal(size=(9, 2))).tolist() == [0] * 9

    def test_recovers_separated_states(self):
        rng = np.random.default_rng(7)
        m = two_state()
        states, X = hmm.sample(m, 400, rng)
        assert np.mean(viterbi(m, X) == states) >= 0.95

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_score_below_forward(self, seed):
        rng = np.random.default_rng(seed)
        m = random_model(rng, int(rng.integers(1, 5)), 2)
        X = rng.normal(0, 2, (int(rng.integers(1, 40)), 2))
        _, score = viterbi(m, X, return_score=True)
        assert score <= forward_loglik(m, X) + 1e-9


class TestInitFromClusters:
    def test_dwell_time(self):
        rng = np.random.default_rng(8)
        regimes = HmmModel(A=np.array([[0.95, 0.05], [0.05, 0.95]]), pi=np.array([0.5, 0.5]),
                           means=np.array([[0.0, 0.0], [6.0, -6.0]]), variances=np.ones((2, 2)),
                           var_floor=np.full(2, 1e-6))
        states, X = hmm.sample(regimes, 600, rng)
        model = init_from_clusters(kmeans(X, 2, seed=0), X)
        assert np.all(np.diag(model.A) > 0.8)
        model.check()

    def test_single_cluster(self):
        X = np.random.default_rng(9).normal(size=(20, 2))
        model = init_from_clusters(kmeans(X, 1), X)
        np.testing.assert_array_equal(model.A, [[1.0]])
        np.testing.assert_array_equal(model.pi, [1.0])

    def test_counts_with_laplace_smoothing(self):
        X = np.array([[0.0], [0.1], [5.0], [5.1], [0.2], [5.2]])
        cl = Clustering(k=2, centroids=np.array([[0.1], [5.1]]), assignments=np.array([0, 0, 1, 1, 0, 1]), wcss=0.0)
        model = init_from_clusters(cl, X, lengths=[4, 2])
        # within-sequence transitions: 0->0, 0->1, 1->1 and 0->1; plus one for every cell
        np.testing.assert_allclose(model.A, [[2 / 5, 3 / 5], [1 / 3, 2 / 3]])
        # first states 0 and 0, plus one each
        np.testing.assert_allclose(model.pi, [3 / 4, 1 / 4])
        np.testing.assert_array_equal(model.means, cl.centroids)

    def test_singleton_cluster_is_floored(self):
        X = np.array([[0.0, 0.0], [1.0, 2.0], [2.0, 4.0], [9.0, 9.0]])
        cl = Clustering(k=2, centroids=np.array([[1.0, 2.0], [9.0, 9.0]]), assignments=np.array([0, 0, 0, 1]),
                        wcss=0.0)
        model = init_from_clusters(cl, X)
        np.testing.assert_array_equal(model.variances[1], model.var_floor)
        assert np.all(model.var_floor > 0)

    def test_lengths_must_add_up(self):
        X = np.zeros((4, 1))
        cl = Clustering(k=1, centroids=np.zeros((1, 1)), assignments=np.zeros(4, dtype=int), wcss=0.0)
        with pytest.raises(HMMError, match="add up"):
            init_from_clusters(cl, X, lengths=[3])


class TestBaumWelch:
    def test_single_state_is_gaussian_fit(self):
        rng = np.random.default_rng(10)
        seqs = [rng.normal([1.0, -2.0], [0.5, 2.0], (int(n), 2)) for n in rng.integers(5, 40, 6)]
        X = np.vstack(seqs)
        init = HmmModel(A=np.ones((1, 1)), pi=np.ones(1), means=np.zeros((1, 2)), variances=np.ones((1, 2)),
                        var_floor=hmm.variance_floor(X))
        model, trace = baum_welch(init, seqs)
        np.testing.assert_allclose(model.means[0], X.mean(0), rtol=1e-9)
        np.testing.assert_allclose(model.variances[0], X.var(0), rtol=1e-9)

    def test_monotone_and_stochastic_each_iteration(self):
        rng = np.random.default_rng(11)
        truth = random_model(rng, 3, 2)
        seqs = [hmm.sample(truth, 50, rng)[1] for _ in range(5)]
        model = random_model(rng, 3, 2)
        for _ in range(15):
            model, trace = baum_welch(model, seqs, max_iter=1, tol=0)
            model.check()
        model, trace = baum_welch(model, seqs, tol=0, max_iter=30)
        assert np.all(np.diff(trace.ll_history) >= -1e-8)
        assert len(trace.ll_history) == trace.iterations + 1

    def test_history_scores_returned_model(self):
        rng = np.random.default_rng(12)
        truth = two_state()
        seqs = [hmm.sample(truth, 60, rng)[1] for _ in range(4)]
        model, trace = baum_welch(random_model(rng, 2, 2), seqs)
        total = sum(forward_loglik(model, s) for s in seqs)
        assert trace.ll_history[-1] == pytest.approx(total, rel=1e-12)
        assert trace.converged

    def test_variance_floor_holds(self):
        X = [np.vstack([np.zeros((10, 1)), np.ones((10, 1))])]
        init = HmmModel(A=np.full((2, 2), 0.5), pi=np.array([0.5, 0.5]), means=np.array([[0.0], [1.0]]),
                        variances=np.ones((2, 1)), var_floor=np.array([1e-3]))
        model, _ = baum_welch(init, X)
        assert np.all(model.variances >= 1e-3)

    def test_errors(self):
        with pytest.raises(HMMError, match="max_iter"):
            baum_welch(two_state(), [np.zeros((3, 2))], max_iter=0)
        with pytest.raises(HMMError, match="no training"):
            baum_welch(two_state(), [])
        with pytest.raises(HMMError, match="empty"):
            baum_welch(two_state(), [np.zeros((0, 2))])


def test_brute_force_oracle_self_check():
    # the oracle itself: a 1-state, 1-step model is just a Gaussian density
    assert brute_loglik([[1.0]], [1.0], [[0.0]], [[1.0]], [[0.0]]) == pytest.approx(-0.5 * math.log(2 * math.pi))
    paths = list(itertools.product(range(2), repeat=2))
    assert brute_viterbi([[0.5, 0.5], [0.5, 0.5]], [0.5, 0.5], [[0.0], [0.0]], [[1.0], [1.0]], [[0.0], [0.0]])[0] == list(paths[0])
