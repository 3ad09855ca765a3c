"""Training objective: Bernoulli reconstruction loss plus two regularizers.

The composite loss is

    total = reconstruction + sparsity_weight * ||P||_1
          + nonsuccession_weight * sum_k S(W_k)

where the reconstruction term treats each binary cell as a Bernoulli
observation of the convolutional reconstruction, and S penalizes restarting
the same phenotype within one window of a previous start. All logarithms
clamp their argument at log_epsilon; the clamp and the max(0, .) hinge
contribute zero gradient on their flat sides.

Gradients are analytical adjoints (transposed convolutions); a
finite-difference suite in the tests pins them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch
from .tensor import (
    HyperParams,
    IrregularTensor,
    _pathway_matrices,
    _phenotype_array,
    reconstruct,
    reconstruct_batched_regular,
)

DEFAULT_EPS = 1e-8


@dataclass(frozen=True)
class LossBreakdown:
    """Loss terms before weighting, their weights, and the weighted total."""

    reconstruction: float
    sparsity: float
    nonsuccession: float
    sparsity_weight: float
    nonsuccession_weight: float
    total: float


@dataclass
class Gradients:
    """Partial derivatives of the composite loss.

    grad_phenotypes has the phenotype array shape (R, n, window);
    grad_pathways matches the pathway matrix shapes. A part not requested
    via ``wrt`` is None.
    """

    grad_phenotypes: np.ndarray | None
    grad_pathways: list[np.ndarray] | None


def _matrices_of(X) -> list[np.ndarray]:
    if isinstance(X, IrregularTensor):
        return X.matrices
    return [np.asarray(m, dtype=np.float64) for m in X]


def _check_shapes(X_hat: list[np.ndarray], X: list[np.ndarray]) -> None:
    if len(X_hat) != len(X):
        raise ShapeMismatch(f"{len(X_hat)} reconstructions for {len(X)} individuals")
    for k, (a, b) in enumerate(zip(X_hat, X)):
        if a.shape != b.shape:
            raise ShapeMismatch(
                f"individual {k}: reconstruction {a.shape} vs data {b.shape}"
            )


def bernoulli_loss(X_hat, X, eps: float = DEFAULT_EPS) -> float:
    """Negative Bernoulli log-likelihood style reconstruction error.

    Per cell: log(x_hat + 1) - x * log(max(x_hat, eps)), summed over all
    individuals, features and time steps. Finite for any x_hat >= 0.
    """
    xh = _matrices_of(X_hat)
    xs = _matrices_of(X)
    _check_shapes(xh, xs)
    total = 0.0
    for a, b in zip(xh, xs):
        total += float(np.sum(np.log1p(a) - b * np.log(np.maximum(a, eps))))
    return total


def sparsity_term(phenotypes) -> float:
    """L1 norm of the phenotype tensor (plain sum: entries are nonnegative)."""
    return float(np.sum(np.abs(_phenotype_array(phenotypes))))


def _windowed_sum(a: np.ndarray, radius: int) -> np.ndarray:
    """Sum of a over [t - radius, t + radius] along the last axis, edges clamped."""
    horizon = a.shape[-1]
    padded = np.zeros(a.shape[:-1] + (horizon + 2 * radius,))
    padded[..., radius:radius + horizon] = a
    cs = np.cumsum(padded, axis=-1)
    left = np.concatenate(
        [np.zeros(a.shape[:-1] + (1,)), cs[..., :horizon - 1]], axis=-1
    )
    return cs[..., 2 * radius:] - left


def nonsuccession_term(pathway, window: int, eps: float = DEFAULT_EPS) -> float:
    """Penalty for restarting a phenotype within ``window`` steps of a start.

    For each (r, t): max(0, w[r,t] * log(sum of w[r, t-window .. t+window])),
    the window clamped to valid columns and the log argument clamped at eps.
    Zero when every occurrence is isolated.
    """
    w = np.asarray(pathway, dtype=np.float64)
    sig = _windowed_sum(w, window)
    term = w * np.log(np.maximum(sig, eps))
    return float(np.sum(np.maximum(term, 0.0)))


def _nonsuccession_grad(w: np.ndarray, window: int, eps: float) -> np.ndarray:
    """Subgradient of the non-succession penalty, zero on flat sides."""
    sig = _windowed_sum(w, window)
    logsig = np.log(np.maximum(sig, eps))
    active = (w * logsig) > 0.0
    direct = np.where(active, logsig, 0.0)
    through_sum = np.where(active & (sig > eps), w / np.maximum(sig, eps), 0.0)
    return direct + _windowed_sum(through_sum, window)


def _cell_derivative(x_hat: np.ndarray, x: np.ndarray, eps: float) -> np.ndarray:
    """d/dx_hat of the per-cell reconstruction loss; clamp is flat below eps."""
    direct = 1.0 / (x_hat + 1.0)
    log_part = np.where(x_hat >= eps, x / np.maximum(x_hat, eps), 0.0)
    return direct - log_part


def total_loss(phenotypes, pathways, X, hp: HyperParams) -> LossBreakdown:
    """Composite objective over the whole dataset, with its term breakdown."""
    P = _phenotype_array(phenotypes)
    mats = _pathway_matrices(pathways)
    xs = _matrices_of(X)
    x_hat = [reconstruct(P, w) for w in mats]
    recon = bernoulli_loss(x_hat, xs, hp.log_epsilon)
    sparse = sparsity_term(P)
    nonsucc = sum(nonsuccession_term(w, hp.window, hp.log_epsilon) for w in mats)
    total = (
        recon
        + hp.sparsity_weight * sparse
        + hp.nonsuccession_weight * nonsucc
    )
    return LossBreakdown(
        reconstruction=recon,
        sparsity=sparse,
        nonsuccession=float(nonsucc),
        sparsity_weight=hp.sparsity_weight,
        nonsuccession_weight=hp.nonsuccession_weight,
        total=float(total),
    )


def gradients(
    phenotypes,
    pathways,
    X,
    hp: HyperParams,
    wrt: str = "both",
    fixed_subset=None,
) -> Gradients:
    """Analytical gradients of the composite loss.

    wrt selects "phenotypes", "pathways" or "both". fixed_subset restricts
    the data-dependent terms to the given individual indices (a mini-batch);
    pathway gradients outside the subset are zero. The sparsity term always
    contributes its weight to every phenotype gradient entry.
    """
    if wrt not in ("phenotypes", "pathways", "both"):
        raise ValueError(f"wrt must be 'phenotypes', 'pathways' or 'both', got {wrt!r}")
    P = _phenotype_array(phenotypes)
    mats = _pathway_matrices(pathways)
    xs = _matrices_of(X)
    if len(mats) != len(xs):
        raise ShapeMismatch(f"{len(mats)} pathways for {len(xs)} individuals")
    window = P.shape[2]
    eps = hp.log_epsilon
    subset = range(len(xs)) if fixed_subset is None else fixed_subset

    want_p = wrt in ("phenotypes", "both")
    want_w = wrt in ("pathways", "both")
    grad_p = np.zeros_like(P) if want_p else None
    grad_w = [np.zeros_like(w) for w in mats] if want_w else None

    for k in subset:
        w = mats[k]
        x = xs[k]
        x_hat = reconstruct(P, w)
        if x_hat.shape != x.shape:
            raise ShapeMismatch(
                f"individual {k}: reconstruction {x_hat.shape} vs data {x.shape}"
            )
        d = _cell_derivative(x_hat, x, eps)
        horizon = w.shape[1]
        if want_p:
            for tau in range(window):
                grad_p[:, :, tau] += w @ d[:, tau:tau + horizon].T
        if want_w:
            gw = np.zeros_like(w)
            for tau in range(window):
                gw += P[:, :, tau] @ d[:, tau:tau + horizon]
            if hp.nonsuccession_weight > 0:
                gw += hp.nonsuccession_weight * _nonsuccession_grad(w, window, eps)
            grad_w[k] = gw
    if want_p:
        grad_p += hp.sparsity_weight
    return Gradients(grad_phenotypes=grad_p, grad_pathways=grad_w)


# --- stacked kernels for the regular-tensor fast path -----------------------
# Same arithmetic as the list-based operations above, on (K, ., .) stacks;
# pinned to them by tests.

def _stacked_breakdown(
    P: np.ndarray, w_stack: np.ndarray, x_stack: np.ndarray, hp: HyperParams
) -> LossBreakdown:
    x_hat = reconstruct_batched_regular(P, w_stack)
    recon = float(np.sum(np.log1p(x_hat) - x_stack * np.log(np.maximum(x_hat, hp.log_epsilon))))
    sparse = float(np.sum(np.abs(P)))
    sig = _windowed_sum(w_stack, hp.window)
    term = w_stack * np.log(np.maximum(sig, hp.log_epsilon))
    nonsucc = float(np.sum(np.maximum(term, 0.0)))
    total = recon + hp.sparsity_weight * sparse + hp.nonsuccession_weight * nonsucc
    return LossBreakdown(
        reconstruction=recon,
        sparsity=sparse,
        nonsuccession=nonsucc,
        sparsity_weight=hp.sparsity_weight,
        nonsuccession_weight=hp.nonsuccession_weight,
        total=total,
    )


def _stacked_gradients(
    P: np.ndarray,
    w_stack: np.ndarray,
    x_stack: np.ndarray,
    hp: HyperParams,
    wrt: str = "both",
) -> tuple[np.ndarray | None, np.ndarray | None]:
    window = P.shape[2]
    eps = hp.log_epsilon
    x_hat = reconstruct_batched_regular(P, w_stack)
    d = _cell_derivative(x_hat, x_stack, eps)
    horizon = w_stack.shape[2]
    grad_p = None
    grad_w = None
    if wrt in ("phenotypes", "both"):
        grad_p = np.zeros_like(P)
        for tau in range(window):
            grad_p[:, :, tau] = np.einsum(
                "krt,knt->rn", w_stack, d[:, :, tau:tau + horizon]
            )
        grad_p += hp.sparsity_weight
    if wrt in ("pathways", "both"):
        grad_w = np.zeros_like(w_stack)
        for tau in range(window):
            grad_w += np.einsum("rn,knt->krt", P[:, :, tau], d[:, :, tau:tau + horizon])
        if hp.nonsuccession_weight > 0:
            grad_w += hp.nonsuccession_weight * _nonsuccession_grad(w_stack, window, eps)
    return grad_p, grad_w
