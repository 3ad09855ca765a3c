import itertools
import math

import numpy as np
import pytest

from tempheno import (
    RankMismatch,
    RankTooSmall,
    ShapeMismatch,
    ZeroNormGroundTruth,
    diversity,
    fit,
    fit_p,
    fit_report,
    fit_w,
    linear_assignment,
    match_phenotypes,
    phenotype_cosine,
)


def brute_force_assignment(cost):
    best_cost = math.inf
    best_perm = None
    size = cost.shape[0]
    for perm in itertools.permutations(range(size)):
        total = sum(cost[i, perm[i]] for i in range(size))
        if total < best_cost:
            best_cost = total
            best_perm = perm
    return best_perm, best_cost


# --- fit ----------------------------------------------------------------------

def test_fit_perfect_reconstruction():
    X = [np.array([[1.0, 0.0], [0.0, 1.0]])]
    assert fit(X, [X[0].copy()]) == 1.0


def test_fit_zero_reconstruction():
    X = [np.array([[1.0, 0.0], [0.0, 1.0]])]
    assert fit(X, [np.zeros((2, 2))]) == 0.0


def test_fit_hand_computed():
    X = [np.array([[1.0, 0.0], [0.0, 1.0]])]
    Xh = [np.array([[1.0, 0.0], [0.0, 0.0]])]
    assert fit(X, Xh) == pytest.approx(1.0 - 1.0 / math.sqrt(2.0), rel=1e-12)


def test_fit_zero_norm_truth():
    with pytest.raises(ZeroNormGroundTruth):
        fit([np.zeros((2, 2))], [np.zeros((2, 2))])


def test_fit_is_scale_sensitive():
    X = [np.eye(3)]
    scaled = [0.5 * np.eye(3)]
    assert fit(X, scaled) == pytest.approx(0.5)


def test_fit_can_be_negative():
    X = [np.array([[1.0]])]
    assert fit(X, [np.array([[3.0]])]) == pytest.approx(-1.0)


# --- cosine -------------------------------------------------------------------

def test_cosine_of_identical_nonzero_phenotype_is_one():
    rng = np.random.default_rng(0)
    a = rng.random((4, 3)) + 0.1
    assert phenotype_cosine(a, a) == pytest.approx(1.0, rel=1e-12)


def test_cosine_orthogonal_supports_is_zero():
    a = np.zeros((4, 2))
    b = np.zeros((4, 2))
    a[0, :] = 1.0
    b[1, :] = 1.0
    assert phenotype_cosine(a, b) == 0.0


def test_cosine_zero_column_conventions():
    # Column 0 identical and nonzero; column 1 zero on both sides -> mean(1, 1) = 1.
    a = np.array([[1.0, 0.0], [0.0, 0.0]])
    assert phenotype_cosine(a, a.copy()) == 1.0
    # Column 1 zero on one side only -> mean(1, 0) = 0.5.
    b = np.array([[1.0, 1.0], [0.0, 0.0]])
    assert phenotype_cosine(a, b) == 0.5


def test_cosine_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        phenotype_cosine(np.zeros((2, 2)), np.zeros((2, 3)))


# --- matching -------------------------------------------------------------------

def test_linear_assignment_hand_example():
    matching = linear_assignment(np.array([[1.0, 2.0], [3.0, 1.0]]))
    assert matching.pairs == [(0, 0), (1, 1)]
    assert matching.cost == pytest.approx(2.0)


def test_match_recovers_row_permutation():
    rng = np.random.default_rng(5)
    set_a = rng.random((4, 5, 3))
    perm = [2, 0, 3, 1]
    set_b = set_a[perm]
    matching, similarity = match_phenotypes(set_a, set_b)
    assert similarity == pytest.approx(1.0, rel=1e-12)
    # pair (i, j) means a-phenotype i matches b-phenotype j = position of i in perm
    for i, j in matching.pairs:
        assert perm[j] == i


def test_match_similarity_equals_bruteforce_max_mean_cosine():
    rng = np.random.default_rng(6)
    set_a = rng.random((4, 3, 2))
    set_b = rng.random((4, 3, 2))
    _, similarity = match_phenotypes(set_a, set_b)
    best = -math.inf
    for perm in itertools.permutations(range(4)):
        mean = np.mean([phenotype_cosine(set_a[i], set_b[perm[i]]) for i in range(4)])
        best = max(best, mean)
    assert similarity == pytest.approx(best, rel=1e-12)


def test_match_similarity_symmetric():
    rng = np.random.default_rng(7)
    set_a = rng.random((5, 4, 2))
    set_b = rng.random((5, 4, 2))
    _, ab = match_phenotypes(set_a, set_b)
    _, ba = match_phenotypes(set_b, set_a)
    assert ab == pytest.approx(ba, abs=1e-12)


def test_match_rank_mismatch():
    with pytest.raises(RankMismatch):
        match_phenotypes(np.zeros((2, 3, 2)), np.zeros((3, 3, 2)))


@pytest.mark.parametrize("seed", range(10))
def test_hungarian_equals_bruteforce_on_random_costs(seed):
    rng = np.random.default_rng(seed)
    size = int(rng.integers(2, 7))
    cost = rng.random((size, size))
    matching = linear_assignment(cost)
    _, best_cost = brute_force_assignment(cost)
    assert matching.cost == pytest.approx(best_cost, rel=1e-12)


# --- diversity ---------------------------------------------------------------

def test_diversity_identical_set_is_zero():
    a = np.random.default_rng(1).random((1, 4, 2)) + 0.1
    set_a = np.repeat(a, 3, axis=0)
    assert diversity(set_a) == pytest.approx(0.0, abs=1e-12)


def test_diversity_columnwise_orthogonal_pair_is_one():
    set_a = np.zeros((2, 4, 2))
    set_a[0, 0, :] = 1.0
    set_a[1, 1, :] = 1.0
    assert diversity(set_a) == 1.0


def test_diversity_mixed_equals_pairwise_mean():
    rng = np.random.default_rng(9)
    set_a = rng.random((3, 4, 2))
    expected = np.mean([
        1.0 - phenotype_cosine(set_a[i], set_a[j])
        for i, j in [(0, 1), (0, 2), (1, 2)]
    ])
    assert diversity(set_a) == pytest.approx(expected, rel=1e-12)


def test_diversity_bounds_and_permutation_invariance():
    rng = np.random.default_rng(10)
    set_a = rng.random((5, 3, 2))
    value = diversity(set_a)
    assert 0.0 <= value <= 1.0
    assert diversity(set_a[rng.permutation(5)]) == pytest.approx(value, rel=1e-12)


def test_diversity_rank_too_small():
    with pytest.raises(RankTooSmall):
        diversity(np.zeros((1, 3, 2)))


# --- fit_p / fit_w --------------------------------------------------------------

def orthogonal_equal_norm_set():
    # Four phenotypes with disjoint single-feature support and equal norms.
    set_a = np.zeros((4, 8, 3))
    for r in range(4):
        set_a[r, 2 * r, :] = 1.0
    return set_a


def test_fit_p_identity_and_permutation():
    truth = orthogonal_equal_norm_set()
    assert fit_p(truth, truth.copy()) == pytest.approx(1.0)
    assert fit_p(truth, truth[[3, 1, 0, 2]]) == pytest.approx(1.0)


def test_fit_p_one_zeroed_phenotype_equal_norms():
    truth = orthogonal_equal_norm_set()
    learned = truth.copy()
    learned[2] = 0.0
    # Aligned error is the zeroed phenotype's full norm out of four equal norms.
    assert fit_p(truth, learned) == pytest.approx(0.75)


def test_fit_w_permutation_is_absorbed_via_phenotype_matching():
    rng = np.random.default_rng(12)
    truth_p = orthogonal_equal_norm_set()
    perm = [1, 3, 2, 0]
    learned_p = truth_p[perm]
    truth_w = [rng.random((4, 6)) for _ in range(3)]
    learned_w = [w[perm] for w in truth_w]
    matching, _ = match_phenotypes(truth_p, learned_p)
    assert fit_w(truth_w, learned_w, matching) == pytest.approx(1.0)


def test_fit_report_bundles_everything():
    rng = np.random.default_rng(13)
    truth_p = orthogonal_equal_norm_set()
    truth_w = [(rng.random((4, 6)) < 0.3).astype(float) for _ in range(2)]
    X = [rng.random((8, 8)) for _ in range(2)]
    report = fit_report(
        X, [x.copy() for x in X],
        truth_phenotypes=truth_p, learned_phenotypes=truth_p[[1, 0, 2, 3]],
        truth_pathways=truth_w, learned_pathways=[w[[1, 0, 2, 3]] for w in truth_w],
    )
    assert report.fit_x == 1.0
    assert report.fit_p == pytest.approx(1.0)
    assert report.fit_w == pytest.approx(1.0)
    assert sorted(report.matching) == [0, 1, 2, 3]
    assert len(report.per_individual_frobenius) == 2
