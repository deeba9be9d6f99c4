import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import ergodic_matrices
from markov_fusion import (
    EqualityPartition,
    count_transitions,
    fit,
    mle,
    simulate_sequence,
    stationary_distribution,
    validate_matrix,
)
from markov_fusion.datasets import SIMULATION_TRUTH
from markov_fusion.errors import MismatchError, ShapeError
from markov_fusion.metrics import (
    asymptotic_covariance,
    difference_variance,
    exact_partition,
    frobenius_distance,
    fused_mask,
    purity,
    selection_accuracy,
)
from markov_fusion.penalized import pair_set

PAIRS3 = pair_set(3)


def relabel_partition(part, perm):
    # perm maps old state (1-based) to new state
    groups = [[(perm[i - 1], perm[j - 1]) for (i, j) in cls] for cls in part.classes]
    return EqualityPartition.from_groups(part.m, groups)


def relabel_matrix(P, perm):
    m = P.m
    Q = np.empty((m, m))
    for i in range(m):
        for j in range(m):
            Q[perm[i] - 1, perm[j] - 1] = P.entries[i, j]
    return validate_matrix(Q, P.mode)


class TestPurity:
    def test_identical(self):
        part = exact_partition(SIMULATION_TRUTH)
        assert purity(part, part) == 1.0

    def test_hand_example(self):
        truth = EqualityPartition.from_groups(2, [[(1, 1), (2, 2)]])
        est = EqualityPartition.from_groups(2, [[(1, 2), (2, 1)]])
        assert purity(truth, est) == pytest.approx(0.75)

    def test_singletons_score_one(self):
        assert purity(exact_partition(SIMULATION_TRUTH), EqualityPartition.singletons(3)) == 1.0

    def test_one_class_estimate(self):
        # a single estimated class only gets credit for the largest true class
        one = EqualityPartition.from_labels(3, np.zeros(9, dtype=int))
        assert purity(exact_partition(SIMULATION_TRUTH), one) == pytest.approx(3 / 9)

    def test_mismatch(self):
        with pytest.raises(MismatchError):
            purity(EqualityPartition.singletons(2), EqualityPartition.singletons(3))

    @settings(max_examples=40, deadline=None)
    @given(a=st.lists(st.integers(0, 3), min_size=9, max_size=9),
           b=st.lists(st.integers(0, 3), min_size=9, max_size=9),
           perm=st.permutations([1, 2, 3]))
    def test_relabeling_invariance(self, a, b, perm):
        pa = EqualityPartition.from_labels(3, np.array(a))
        pb = EqualityPartition.from_labels(3, np.array(b))
        got = purity(pa, pb)
        assert 0 < got <= 1
        assert got == pytest.approx(purity(relabel_partition(pa, perm), relabel_partition(pb, perm)))


class TestFrobenius:
    def test_zero(self):
        assert frobenius_distance(SIMULATION_TRUTH, SIMULATION_TRUTH) == 0.0

    def test_hand_value(self):
        A = validate_matrix([[0.6, 0.4], [0.4, 0.6]])
        B = validate_matrix([[0.5, 0.5], [0.5, 0.5]])
        assert frobenius_distance(A, B) == pytest.approx(0.2, abs=1e-15)

    def test_shape(self):
        with pytest.raises(ShapeError):
            frobenius_distance(SIMULATION_TRUTH, validate_matrix([[0.5, 0.5], [0.5, 0.5]]))

    @settings(max_examples=50, deadline=None)
    @given(A=ergodic_matrices(3, 3), B=ergodic_matrices(3, 3), C=ergodic_matrices(3, 3))
    def test_norm_properties(self, A, B, C):
        assert frobenius_distance(A, B) == frobenius_distance(B, A)
        assert frobenius_distance(A, C) <= frobenius_distance(A, B) + frobenius_distance(B, C) + 1e-15


class TestSelectionAccuracy:
    def test_truth_equal_pairs(self):
        # the study truth has exactly four tied pairs
        truth_equal = fused_mask(SIMULATION_TRUTH, PAIRS3)
        assert truth_equal.sum() == 4

    def test_perfect(self):
        assert selection_accuracy(SIMULATION_TRUTH, exact_partition(SIMULATION_TRUTH), PAIRS3) == 1.0

    def test_never_fuse(self):
        acc = selection_accuracy(SIMULATION_TRUTH, EqualityPartition.singletons(3), PAIRS3)
        assert acc == pytest.approx(32 / 36)

    def test_fuse_everything(self):
        one = EqualityPartition.from_labels(3, np.zeros(9, dtype=int))
        assert selection_accuracy(SIMULATION_TRUTH, one, PAIRS3) == pytest.approx(4 / 36)

    def test_fit_input(self):
        c = count_transitions(simulate_sequence(SIMULATION_TRUTH, 2000, 0))
        huge = fit(c, 1e6, "mclasso")
        assert selection_accuracy(SIMULATION_TRUTH, huge, PAIRS3) == pytest.approx(4 / 36)
        assert selection_accuracy(SIMULATION_TRUTH, mle(c), PAIRS3) == pytest.approx(32 / 36)

    def test_shape(self):
        with pytest.raises(ShapeError):
            selection_accuracy(SIMULATION_TRUTH, EqualityPartition.singletons(2), pair_set(2))

    @settings(max_examples=30, deadline=None)
    @given(labels=st.lists(st.integers(0, 4), min_size=9, max_size=9), perm=st.permutations([1, 2, 3]))
    def test_relabeling_invariance(self, labels, perm):
        est = EqualityPartition.from_labels(3, np.array(labels))
        a = selection_accuracy(SIMULATION_TRUTH, est, PAIRS3)
        b = selection_accuracy(relabel_matrix(SIMULATION_TRUTH, perm), relabel_partition(est, perm), PAIRS3)
        assert a == pytest.approx(b)


class TestCovariance:
    def test_uniform_example(self):
        cov = asymptotic_covariance(validate_matrix([[0.5, 0.5], [0.5, 0.5]]))
        assert np.allclose(cov.pi.pi, [0.5, 0.5])
        for Z in cov.blocks:
            assert np.allclose(Z, [[0.25, -0.25], [-0.25, 0.25]])
        expected = np.kron(np.eye(2), [[0.5, -0.5], [-0.5, 0.5]])
        assert np.allclose(cov.assembled, expected)

    def test_read_only(self):
        cov = asymptotic_covariance(SIMULATION_TRUTH)
        with pytest.raises(ValueError):
            cov.assembled[0, 0] = 1.0

    @settings(max_examples=100, deadline=None)
    @given(P=ergodic_matrices(2, 5))
    def test_block_invariants(self, P):
        cov = asymptotic_covariance(P)
        for i, Z in enumerate(cov.blocks):
            p = P.entries[i]
            assert np.allclose(np.diag(Z), p * (1 - p), atol=1e-15)
            assert np.max(np.abs(Z.sum(axis=1))) < 1e-14
        S = cov.assembled
        assert np.array_equal(S, S.T)
        assert np.linalg.eigvalsh(S).min() >= -1e-10

    def test_difference_variance_formula(self):
        P = SIMULATION_TRUTH
        pi = stationary_distribution(P).pi
        p12, p32 = P[(1, 2)], P[(3, 2)]
        # different rows, so the cross term vanishes
        expected = (p12 * (1 - p12) / pi[0] + p32 * (1 - p32) / pi[2]) / 10_000
        assert difference_variance(P, (1, 2), (3, 2), 10_000) == pytest.approx(expected, rel=1e-12)

    def test_same_row_difference(self):
        P = SIMULATION_TRUTH
        pi = stationary_distribution(P).pi
        a, b = P[(1, 1)], P[(1, 2)]
        expected = (a * (1 - a) + b * (1 - b) + 2 * a * b) / pi[0]
        assert difference_variance(P, (1, 1), (1, 2), 1) == pytest.approx(expected, rel=1e-12)

    def test_scaled_residuals_stay_bounded(self):
        # (p_hat - p) n_i / (sqrt(N) p) should not grow with N
        P = SIMULATION_TRUTH.entries
        sds = []
        for N in (1_000, 10_000, 100_000):
            res = []
            for seed in range(50):
                c = count_transitions(simulate_sequence(SIMULATION_TRUTH, N, seed))
                n_i = c.row_sums[:, None]
                phat = c.counts / n_i
                res.append(((phat - P) * n_i / (np.sqrt(N) * P)).ravel())
            sds.append(np.std(np.concatenate(res)))
        sds = np.array(sds)
        assert np.all(sds < 5)
        assert sds.max() / sds.min() < 1.5
