"""Alternating projected gradient descent for the decomposition.

Each epoch walks mini-batches of individuals: one Adam step on the
phenotypes against the batch objective, clip to [0, 1], then one Adam step
per batch member's pathway, clip to [0, 1]. Epoch count is fixed (no early
stopping). Adam moment state is kept separately for the phenotypes and for
every pathway and is never reset by clipping.

When all individuals share one duration, training runs on stacked arrays
(same arithmetic, markedly faster); the per-individual path handles
irregular durations.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    FeatureMismatch,
    NonFiniteLoss,
    TooFewIndividuals,
    WindowTooLarge,
)
from .loss import (
    LossBreakdown,
    _stacked_breakdown,
    _stacked_gradients,
    gradients,
    total_loss,
)
from .tensor import (
    HyperParams,
    IrregularTensor,
    PathwayCollection,
    PhenotypeTensor,
    validate_tensor,
)


@dataclass(frozen=True)
class TrainConfig:
    """HyperParams plus optimizer knobs.

    descent_steps is the length of the inner descent each alternating update
    runs: per mini-batch, that many Adam steps on the phenotypes (clipping
    after each), then that many on each batch member's pathway. One step per
    update is too slow to polarize U(0,1)-initialized pathways within the
    usual epoch budgets (an Adam step moves an entry by about one learning
    rate), so the default runs a short descent instead.
    """

    hp: HyperParams
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    shuffle: bool = True
    record_loss_every: int = 1
    descent_steps: int = 5

    def __post_init__(self):
        if not (0.0 < self.adam_beta1 < 1.0 and 0.0 < self.adam_beta2 < 1.0):
            raise ValueError("adam betas must lie in (0, 1)")
        if self.adam_eps <= 0:
            raise ValueError("adam_eps must be > 0")
        if self.record_loss_every < 1:
            raise ValueError("record_loss_every must be >= 1")
        if self.descent_steps < 1:
            raise ValueError("descent_steps must be >= 1")


@dataclass
class TrainedModel:
    """Phenotypes are the model; train-set pathways are kept for diagnostics."""

    phenotypes: PhenotypeTensor
    pathways: PathwayCollection
    config: TrainConfig
    loss_history: list[tuple[int, LossBreakdown]] = field(default_factory=list)
    rng_seed: int = 0


def _rng_of(rng, seed: int) -> np.random.Generator:
    if rng is None:
        return np.random.default_rng(seed)
    if isinstance(rng, (int, np.integer)):
        return np.random.default_rng(int(rng))
    return rng


def _check_window(window: int, X: IrregularTensor) -> None:
    shortest = min(X.durations)
    if window > shortest:
        raise WindowTooLarge(
            f"window {window} exceeds the shortest duration {shortest}"
        )


def init(hp: HyperParams, X: IrregularTensor, rng) -> tuple[PhenotypeTensor, PathwayCollection]:
    """Uniform U(0,1) initialization of phenotypes and pathways."""
    _check_window(hp.window, X)
    rng = _rng_of(rng, hp.rng_seed)
    P = rng.random((hp.rank, X.n_features, hp.window))
    Ws = [rng.random((hp.rank, T - hp.window + 1)) for T in X.durations]
    return (
        PhenotypeTensor(P, feature_names=list(X.feature_names)),
        PathwayCollection(Ws, individual_ids=list(X.individual_ids)),
    )


class _Adam:
    """Adam state for one array variable."""

    def __init__(self, shape, cfg: TrainConfig):
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0
        self.b1, self.b2, self.eps = cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps

    def step(self, x: np.ndarray, g: np.ndarray, lr: float) -> np.ndarray:
        self.t += 1
        self.m = self.b1 * self.m + (1.0 - self.b1) * g
        self.v = self.b2 * self.v + (1.0 - self.b2) * (g * g)
        m_hat = self.m / (1.0 - self.b1 ** self.t)
        v_hat = self.v / (1.0 - self.b2 ** self.t)
        return x - lr * m_hat / (np.sqrt(v_hat) + self.eps)


class _StackedAdam:
    """Per-individual Adam states stored as one (K, R, T') stack."""

    def __init__(self, shape, cfg: TrainConfig):
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = np.zeros(shape[0], dtype=np.int64)
        self.b1, self.b2, self.eps = cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps

    def step_rows(self, x: np.ndarray, rows: np.ndarray, g: np.ndarray, lr: float) -> None:
        self.t[rows] += 1
        self.m[rows] = self.b1 * self.m[rows] + (1.0 - self.b1) * g
        self.v[rows] = self.b2 * self.v[rows] + (1.0 - self.b2) * (g * g)
        corr1 = (1.0 - self.b1 ** self.t[rows])[:, None, None]
        corr2 = (1.0 - self.b2 ** self.t[rows])[:, None, None]
        m_hat = self.m[rows] / corr1
        v_hat = self.v[rows] / corr2
        x[rows] = np.clip(x[rows] - lr * m_hat / (np.sqrt(v_hat) + self.eps), 0.0, 1.0)


def _epoch_loss(P, w_mats_or_stack, x_stack, X, hp, regular: bool) -> LossBreakdown:
    if regular:
        return _stacked_breakdown(P, w_mats_or_stack, x_stack, hp)
    return total_loss(P, w_mats_or_stack, X, hp)


def _batches(order: np.ndarray, batch_size: int):
    for start in range(0, len(order), batch_size):
        yield order[start:start + batch_size]


def train(X: IrregularTensor, cfg: TrainConfig, rng=None) -> TrainedModel:
    """Run Adam-based alternating projected gradient descent on X.

    Returns the trained model with its loss history; entry 0 is the loss at
    initialization, later entries land every cfg.record_loss_every epochs and
    at the final epoch. Raises NonFiniteLoss as soon as a recorded loss stops
    being finite.
    """
    validate_tensor(X)
    hp = cfg.hp
    rng = _rng_of(rng, hp.rng_seed)
    P0, W0 = init(hp, X, rng)
    P = P0.data.copy()
    w_mats = [w.copy() for w in W0.matrices]
    n_ind = X.n_individuals
    regular = len(set(X.durations)) == 1

    if regular:
        x_state = np.stack(X.matrices)
        w_state = np.stack(w_mats)
        adam_w = _StackedAdam(w_state.shape, cfg)
    else:
        x_state = None
        w_state = w_mats
        adam_w = [_Adam(w.shape, cfg) for w in w_mats]
    adam_p = _Adam(P.shape, cfg)

    history: list[tuple[int, LossBreakdown]] = []
    last_finite: tuple[int, LossBreakdown] | None = None

    def record(epoch: int) -> None:
        nonlocal last_finite
        breakdown = _epoch_loss(P, w_state, x_state, X, hp, regular)
        if not np.isfinite(breakdown.total):
            raise NonFiniteLoss(
                last_finite[0] if last_finite else -1,
                last_finite[1] if last_finite else None,
            )
        last_finite = (epoch, breakdown)
        history.append((epoch, breakdown))

    record(0)
    lr = hp.learning_rate
    for epoch in range(1, hp.epochs + 1):
        order = rng.permutation(n_ind) if cfg.shuffle else np.arange(n_ind)
        for batch in _batches(order, hp.batch_size):
            if regular:
                for _ in range(cfg.descent_steps):
                    g_p, _ = _stacked_gradients(P, w_state[batch], x_state[batch], hp, "phenotypes")
                    P = np.clip(adam_p.step(P, g_p, lr), 0.0, 1.0)
                for _ in range(cfg.descent_steps):
                    _, g_w = _stacked_gradients(P, w_state[batch], x_state[batch], hp, "pathways")
                    adam_w.step_rows(w_state, batch, g_w, lr)
            else:
                for _ in range(cfg.descent_steps):
                    g_p = gradients(P, w_state, X, hp, "phenotypes", batch).grad_phenotypes
                    P = np.clip(adam_p.step(P, g_p, lr), 0.0, 1.0)
                for k in batch:
                    for _ in range(cfg.descent_steps):
                        _, g_wk = _stacked_gradients(
                            P, w_state[k][None], X.matrices[k][None], hp, "pathways"
                        )
                        w_state[k] = np.clip(
                            adam_w[k].step(w_state[k], g_wk[0], lr), 0.0, 1.0
                        )
        assert float(P.min()) >= 0.0 and float(P.max()) <= 1.0
        if regular:
            assert float(w_state.min()) >= 0.0 and float(w_state.max()) <= 1.0
        else:
            assert all(w.min() >= 0.0 and w.max() <= 1.0 for w in w_state)
        if epoch % cfg.record_loss_every == 0 or epoch == hp.epochs:
            record(epoch)

    final_mats = [w_state[k] for k in range(n_ind)] if regular else w_state
    return TrainedModel(
        phenotypes=PhenotypeTensor(P, feature_names=list(X.feature_names)),
        pathways=PathwayCollection(
            [np.array(w) for w in final_mats],
            individual_ids=list(X.individual_ids),
        ),
        config=cfg,
        loss_history=history,
        rng_seed=hp.rng_seed,
    )


def project(
    model, X_test: IrregularTensor, cfg: TrainConfig | None = None, rng=None
) -> PathwayCollection:
    """Optimal pathways for new individuals with the phenotypes frozen.

    Minimizes the reconstruction term plus the non-succession penalty over
    the test pathways (the sparsity term involves only the fixed phenotypes
    and is dropped). Same optimizer settings as training unless cfg overrides
    them. ``model`` may be a TrainedModel or a bare PhenotypeTensor (then cfg
    is required).
    """
    if isinstance(model, PhenotypeTensor):
        if cfg is None:
            raise ValueError("cfg is required when projecting bare phenotypes")
        phenotypes = model
    else:
        phenotypes = model.phenotypes
        cfg = model.config if cfg is None else cfg
    hp = cfg.hp
    if hp.rank != phenotypes.rank or hp.window != phenotypes.window:
        # the frozen phenotypes own the decomposition shape
        hp = replace(hp, rank=phenotypes.rank, window=phenotypes.window)
    validate_tensor(X_test)
    P = phenotypes.data
    if X_test.n_features != phenotypes.n_features:
        raise FeatureMismatch(
            f"test tensor has {X_test.n_features} features, model has "
            f"{phenotypes.n_features}"
        )
    _check_window(hp.window, X_test)
    rng = _rng_of(rng, hp.rng_seed)
    n_ind = X_test.n_individuals
    w_mats = [
        rng.random((hp.rank, T - hp.window + 1)) for T in X_test.durations
    ]
    regular = len(set(X_test.durations)) == 1
    if regular:
        x_stack = np.stack(X_test.matrices)
        w_state = np.stack(w_mats)
        adam_w = _StackedAdam(w_state.shape, cfg)
    else:
        w_state = w_mats
        adam_w = [_Adam(w.shape, cfg) for w in w_mats]

    for _ in range(hp.epochs):
        order = rng.permutation(n_ind) if cfg.shuffle else np.arange(n_ind)
        for batch in _batches(order, hp.batch_size):
            if regular:
                for _ in range(cfg.descent_steps):
                    _, g_w = _stacked_gradients(P, w_state[batch], x_stack[batch], hp, "pathways")
                    adam_w.step_rows(w_state, batch, g_w, lr=hp.learning_rate)
            else:
                for k in batch:
                    for _ in range(cfg.descent_steps):
                        _, g_wk = _stacked_gradients(
                            P, w_state[k][None], X_test.matrices[k][None], hp, "pathways"
                        )
                        w_state[k] = np.clip(
                            adam_w[k].step(w_state[k], g_wk[0], hp.learning_rate), 0.0, 1.0
                        )

    final = [w_state[k] for k in range(n_ind)] if regular else w_state
    return PathwayCollection(
        [np.array(w) for w in final], individual_ids=list(X_test.individual_ids)
    )


def split(
    X: IrregularTensor, test_fraction: float, rng=None
) -> tuple[IrregularTensor, IrregularTensor]:
    """Uniform disjoint train/test split of individuals, matrices kept intact.

    Test size is round(K * test_fraction), clamped so both sides keep at
    least one individual. Deterministic under a fixed generator.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie strictly between 0 and 1")
    n_ind = X.n_individuals
    if n_ind < 2:
        raise TooFewIndividuals(f"cannot split {n_ind} individual(s)")
    rng = _rng_of(rng, 0)
    n_test = int(round(n_ind * test_fraction))
    n_test = max(1, min(n_ind - 1, n_test))
    perm = rng.permutation(n_ind)
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])
    return X.subset(train_idx), X.subset(test_idx)
