import math

import numpy as np
import pytest

from tempheno import (
    HyperParams,
    IrregularTensor,
    ShapeMismatch,
    bernoulli_loss,
    gradients,
    nonsuccession_term,
    sparsity_term,
    total_loss,
)
from tempheno.loss import _stacked_breakdown, _stacked_gradients


def micro_instance(seed, n_ind=2, n=3, rank=2, window=2, horizon_max=5, low=0.05, high=0.95):
    rng = np.random.default_rng(seed)
    mats = []
    for _ in range(n_ind):
        duration = int(rng.integers(window, window + horizon_max))
        mats.append((rng.random((n, duration)) < 0.4).astype(float))
    X = IrregularTensor(mats)
    P = rng.uniform(low, high, (rank, n, window))
    W = [rng.uniform(low, high, (rank, T - window + 1)) for T in X.durations]
    return X, P, W


# --- bernoulli loss ----------------------------------------------------------

def test_bernoulli_zero_data_zero_reconstruction():
    X = [np.zeros((2, 3))]
    assert bernoulli_loss([np.zeros((2, 3))], X) == 0.0


def test_bernoulli_single_cell_values():
    # x=1, x_hat=0.5: log(1.5) - log(0.5) = log 3
    x = [np.array([[1.0]])]
    assert bernoulli_loss([np.array([[0.5]])], x) == pytest.approx(math.log(3.0), rel=1e-12)
    # x=1, x_hat=1: log 2
    assert bernoulli_loss([np.array([[1.0]])], x) == pytest.approx(math.log(2.0), rel=1e-12)


def test_bernoulli_finite_at_zero_reconstruction_of_one():
    x = [np.array([[1.0]])]
    value = bernoulli_loss([np.array([[0.0]])], x, eps=1e-8)
    assert np.isfinite(value)
    assert value == pytest.approx(-math.log(1e-8))


def test_bernoulli_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        bernoulli_loss([np.zeros((2, 2))], [np.zeros((2, 3))])


def test_bernoulli_per_cell_minimum_sits_at_x():
    # For x in {0, 1} the per-cell term over x_hat in [0,1] is minimized at x_hat=x.
    grid = np.linspace(0.0, 1.0, 101)
    for x in (0.0, 1.0):
        vals = [bernoulli_loss([np.array([[v]])], [np.array([[x]])]) for v in grid]
        assert np.argmin(vals) in (0 if x == 0.0 else len(grid) - 1,)
    assert bernoulli_loss([np.zeros((1, 1))], [np.zeros((1, 1))]) == 0.0


# --- sparsity ----------------------------------------------------------------

def test_sparsity_values():
    assert sparsity_term(np.zeros((2, 3, 2))) == 0.0
    single = np.zeros((1, 2, 2))
    single[0, 1, 0] = 1.0
    assert sparsity_term(single) == 1.0
    assert sparsity_term(np.full((2, 2, 2), 0.25)) == pytest.approx(2.0)


# --- non-succession ------------------------------------------------------------

def test_nonsuccession_isolated_occurrence_is_free():
    assert nonsuccession_term(np.array([[0.0, 1.0, 0.0, 0.0]]), window=1) == 0.0


def test_nonsuccession_adjacent_pair():
    value = nonsuccession_term(np.array([[1.0, 1.0]]), window=1)
    assert value == pytest.approx(2.0 * math.log(2.0), rel=1e-12)


def test_nonsuccession_zero_row():
    assert nonsuccession_term(np.zeros((3, 5)), window=2) == 0.0


def test_nonsuccession_row_permutation_invariant():
    rng = np.random.default_rng(2)
    w = rng.random((4, 7))
    perm = rng.permutation(4)
    assert nonsuccession_term(w, 3) == pytest.approx(nonsuccession_term(w[perm], 3), rel=1e-12)


def test_nonsuccession_window_clamps_at_boundaries():
    # Occurrences further apart than the window do not interact.
    w = np.zeros((1, 9))
    w[0, 0] = 1.0
    w[0, 8] = 1.0
    assert nonsuccession_term(w, 3) == 0.0


# --- total loss -----------------------------------------------------------------

def test_total_loss_weights_zero_leaves_reconstruction_only():
    X, P, W = micro_instance(1)
    hp = HyperParams(rank=2, window=2, sparsity_weight=0.0, nonsuccession_weight=0.0)
    breakdown = total_loss(P, W, X, hp)
    assert breakdown.total == pytest.approx(breakdown.reconstruction)


def test_total_loss_zero_everything():
    X = IrregularTensor([np.zeros((2, 3))])
    hp = HyperParams(rank=1, window=2)
    breakdown = total_loss(np.zeros((1, 2, 2)), [np.zeros((1, 2))], X, hp)
    assert breakdown.total == 0.0


def test_total_loss_composes_the_three_terms():
    X, P, W = micro_instance(4)
    hp = HyperParams(rank=2, window=2, sparsity_weight=1.3, nonsuccession_weight=0.7)
    breakdown = total_loss(P, W, X, hp)
    from tempheno import reconstruct_all

    recon = bernoulli_loss(reconstruct_all(P, W), X, hp.log_epsilon)
    sparse = sparsity_term(P)
    nonsucc = sum(nonsuccession_term(w, 2, hp.log_epsilon) for w in W)
    assert breakdown.reconstruction == pytest.approx(recon, rel=1e-12)
    assert breakdown.sparsity == pytest.approx(sparse, rel=1e-12)
    assert breakdown.nonsuccession == pytest.approx(nonsucc, rel=1e-12)
    assert breakdown.total == pytest.approx(
        recon + 1.3 * sparse + 0.7 * nonsucc, rel=1e-9
    )


@pytest.mark.parametrize("seed", range(5))
def test_total_increases_strictly_with_sparsity_weight(seed):
    X, P, W = micro_instance(seed)
    lo = total_loss(P, W, X, HyperParams(rank=2, window=2, sparsity_weight=0.5)).total
    hi = total_loss(P, W, X, HyperParams(rank=2, window=2, sparsity_weight=1.5)).total
    assert hi > lo


# --- gradients -------------------------------------------------------------------

def central_differences(P, W, X, hp, h=1e-5):
    def value(Pa, Wa):
        return total_loss(Pa, Wa, X, hp).total

    grad_p = np.zeros_like(P)
    for idx in np.ndindex(P.shape):
        plus = P.copy(); plus[idx] += h
        minus = P.copy(); minus[idx] -= h
        grad_p[idx] = (value(plus, W) - value(minus, W)) / (2 * h)
    grad_w = [np.zeros_like(w) for w in W]
    for k in range(len(W)):
        for idx in np.ndindex(W[k].shape):
            plus = [w.copy() for w in W]; plus[k][idx] += h
            minus = [w.copy() for w in W]; minus[k][idx] -= h
            grad_w[k][idx] = (value(P, plus) - value(P, minus)) / (2 * h)
    return grad_p, grad_w


def near_kink_mask(w, window, eps, h):
    """Pathway coordinates whose +-h perturbation can cross a hinge of the
    non-succession term (the max(0,.) argument of any window neighbor too
    close to zero)."""
    from tempheno.loss import _windowed_sum

    sig = _windowed_sum(w, window)
    logsig = np.log(np.maximum(sig, eps))
    margin = np.abs(w * logsig)
    sensitivity = np.abs(logsig) + w / np.maximum(sig, eps) + 1.0
    fragile = margin < 20 * h * sensitivity
    # a coordinate is near a kink if any same-row neighbor within the window
    # (including itself) is fragile
    hits = _windowed_sum(fragile.astype(float), window)
    return hits > 0


def relerr(a, b):
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)


@pytest.mark.parametrize("seed", range(6))
def test_gradients_match_central_differences(seed):
    X, P, W = micro_instance(seed, n_ind=2, n=3, rank=2, window=2)
    hp = HyperParams(rank=2, window=2, sparsity_weight=0.8, nonsuccession_weight=0.9)
    got = gradients(P, W, X, hp)
    fd_p, fd_w = central_differences(P, W, X, hp)
    assert np.max(relerr(got.grad_phenotypes, fd_p)) < 1e-5
    for k in range(len(W)):
        keep = ~near_kink_mask(W[k], 2, hp.log_epsilon, 1e-5)
        assert np.max(relerr(got.grad_pathways[k], fd_w[k])[keep]) < 1e-5


def test_gradient_of_pure_sparsity_is_constant_alpha():
    # No data support and a zero reconstruction: only the L1 term touches P.
    X = IrregularTensor([np.zeros((2, 4))])
    P = np.zeros((2, 2, 2))
    W = [np.zeros((2, 3))]
    hp = HyperParams(rank=2, window=2, sparsity_weight=0.6, nonsuccession_weight=0.0)
    got = gradients(P, W, X, hp)
    # reconstruction part: d/dP of sum log(x_hat+1) at x_hat=0 through W=0 is 0
    assert np.allclose(got.grad_phenotypes, 0.6)


def test_gradients_wrt_selector():
    X, P, W = micro_instance(9)
    hp = HyperParams(rank=2, window=2)
    only_p = gradients(P, W, X, hp, wrt="phenotypes")
    assert only_p.grad_pathways is None
    only_w = gradients(P, W, X, hp, wrt="pathways")
    assert only_w.grad_phenotypes is None
    with pytest.raises(ValueError):
        gradients(P, W, X, hp, wrt="everything")


def test_gradients_fixed_subset_restricts_data_terms():
    X, P, W = micro_instance(10, n_ind=3)
    hp = HyperParams(rank=2, window=2, sparsity_weight=0.4)
    sub = gradients(P, W, X, hp, fixed_subset=[1])
    assert np.allclose(sub.grad_pathways[0], 0.0)
    assert np.allclose(sub.grad_pathways[2], 0.0)
    assert not np.allclose(sub.grad_pathways[1], 0.0)
    # phenotype gradient equals single-individual data term plus alpha
    only_k1 = gradients(P, [W[1]], X.subset([1]), hp)
    assert np.allclose(sub.grad_phenotypes, only_k1.grad_phenotypes)


# --- stacked kernels mirror the list path ----------------------------------------

def test_stacked_kernels_match_list_path():
    rng = np.random.default_rng(21)
    n_ind, n, rank, window, duration = 4, 5, 3, 2, 7
    X = IrregularTensor([(rng.random((n, duration)) < 0.4).astype(float) for _ in range(n_ind)])
    P = rng.uniform(0.05, 0.95, (rank, n, window))
    W = [rng.uniform(0.05, 0.95, (rank, duration - window + 1)) for _ in range(n_ind)]
    hp = HyperParams(rank=rank, window=window, sparsity_weight=0.7, nonsuccession_weight=0.3)

    stacked = _stacked_breakdown(P, np.stack(W), np.stack(X.matrices), hp)
    listed = total_loss(P, W, X, hp)
    assert stacked.total == pytest.approx(listed.total, rel=1e-12)

    gp_s, gw_s = _stacked_gradients(P, np.stack(W), np.stack(X.matrices), hp)
    listed_g = gradients(P, W, X, hp)
    assert np.allclose(gp_s, listed_g.grad_phenotypes, rtol=1e-9, atol=1e-12)
    for k in range(n_ind):
        assert np.allclose(gw_s[k], listed_g.grad_pathways[k], rtol=1e-9, atol=1e-12)
