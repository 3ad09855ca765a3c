"""Data model for irregular binary tensors, temporal phenotypes and pathways.

An input dataset is a collection of K binary matrices (features x time) with
per-individual durations. A model is a set of R phenotype matrices
(features x window) plus, per individual, an assignment matrix (pathway)
whose entry (r, t) weights the start of phenotype r at time t. The
reconstruction operator superposes phenotype occurrences shifted by their
start times, so occurrences may overlap and reconstructed values may
exceed 1; no clamping is applied here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyTensor,
    NonBinaryValue,
    RaggedFeatureDim,
    RankMismatch,
    UnequalLengths,
)


def _as_float_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {a.shape}")
    return a


@dataclass
class IrregularTensor:
    """Collection of K dense feature x time matrices with individual durations.

    Entries are expected to be exactly 0.0 or 1.0; this is checked by
    :func:`validate_tensor`, not assumed by the type.
    """

    matrices: list[np.ndarray]
    feature_names: list[str] = field(default=None)
    individual_ids: list[str] = field(default=None)

    def __post_init__(self):
        self.matrices = [_as_float_matrix(m) for m in self.matrices]
        n = self.matrices[0].shape[0] if self.matrices else 0
        if self.feature_names is None:
            self.feature_names = [f"f{i}" for i in range(n)]
        if self.individual_ids is None:
            self.individual_ids = [f"ind{k}" for k in range(len(self.matrices))]

    @property
    def n_individuals(self) -> int:
        return len(self.matrices)

    @property
    def n_features(self) -> int:
        return self.matrices[0].shape[0] if self.matrices else 0

    @property
    def durations(self) -> list[int]:
        return [m.shape[1] for m in self.matrices]

    def subset(self, indices) -> "IrregularTensor":
        """New tensor restricted to the given individual indices (order kept)."""
        return IrregularTensor(
            [self.matrices[k].copy() for k in indices],
            feature_names=list(self.feature_names),
            individual_ids=[self.individual_ids[k] for k in indices],
        )


@dataclass
class PhenotypeTensor:
    """R temporal phenotypes stacked as an array of shape (R, n, window).

    Every entry must lie in [0, 1]: a phenotype cell is the probability of a
    feature occurring at a relative day of the window.
    """

    data: np.ndarray
    feature_names: list[str] = field(default=None)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 3:
            raise ValueError(f"phenotype data must be (R, n, window), got {self.data.shape}")
        if self.data.size and (self.data.min() < 0.0 or self.data.max() > 1.0):
            raise ValueError("phenotype entries must lie in [0, 1]")
        if min(self.data.shape) < 1:
            raise ValueError("phenotype dimensions must all be >= 1")
        if self.feature_names is None:
            self.feature_names = [f"f{i}" for i in range(self.data.shape[1])]

    @property
    def rank(self) -> int:
        return self.data.shape[0]

    @property
    def n_features(self) -> int:
        return self.data.shape[1]

    @property
    def window(self) -> int:
        return self.data.shape[2]


@dataclass
class PathwayCollection:
    """K assignment matrices of shape (R, T'_k), entries in [0, 1].

    T'_k = T_k - window + 1 relative to the tensor the pathways reconstruct.
    """

    matrices: list[np.ndarray]
    individual_ids: list[str] = field(default=None)

    def __post_init__(self):
        self.matrices = [_as_float_matrix(m) for m in self.matrices]
        ranks = {m.shape[0] for m in self.matrices}
        if len(ranks) > 1:
            raise ValueError(f"pathway matrices disagree on rank: {sorted(ranks)}")
        for k, m in enumerate(self.matrices):
            if m.size and (m.min() < 0.0 or m.max() > 1.0):
                raise ValueError(f"pathway {k} has entries outside [0, 1]")
        if self.individual_ids is None:
            self.individual_ids = [f"ind{k}" for k in range(len(self.matrices))]

    @property
    def n_individuals(self) -> int:
        return len(self.matrices)

    @property
    def rank(self) -> int:
        return self.matrices[0].shape[0] if self.matrices else 0


@dataclass(frozen=True)
class HyperParams:
    """Model and optimizer settings.

    rank and window size the phenotype tensor; sparsity_weight and
    nonsuccession_weight scale the two regularization terms of the training
    objective; log_epsilon clamps the argument of every logarithm.
    """

    rank: int
    window: int
    sparsity_weight: float = 1.0
    nonsuccession_weight: float = 0.5
    learning_rate: float = 1e-3
    batch_size: int = 50
    epochs: int = 200
    rng_seed: int = 0
    log_epsilon: float = 1e-8

    def __post_init__(self):
        if self.rank < 1 or self.window < 1:
            raise ValueError("rank and window must be >= 1")
        if self.sparsity_weight < 0 or self.nonsuccession_weight < 0:
            raise ValueError("regularization weights must be >= 0")
        if self.learning_rate <= 0 or self.log_epsilon <= 0:
            raise ValueError("learning_rate and log_epsilon must be > 0")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")


def validate_tensor(X: IrregularTensor) -> None:
    """Check every IrregularTensor invariant, raising on the first violation.

    Raises:
        EmptyTensor: no individuals, no features, or a zero-length stay.
        RaggedFeatureDim: matrices disagree on the feature row count.
        NonBinaryValue: an entry is not exactly 0.0 or 1.0; the exception
            carries the first offending (individual, feature, time) position.
    """
    if X.n_individuals == 0:
        raise EmptyTensor("tensor has no individuals")
    n = X.matrices[0].shape[0]
    if n == 0:
        raise EmptyTensor("tensor has no features")
    for k, m in enumerate(X.matrices):
        if m.shape[0] != n:
            raise RaggedFeatureDim(
                f"individual {k} has {m.shape[0]} feature rows, expected {n}"
            )
        if m.shape[1] == 0:
            raise EmptyTensor(f"individual {k} has zero duration")
        bad = (m != 0.0) & (m != 1.0)
        if bad.any():
            i, t = map(int, np.argwhere(bad)[0])
            raise NonBinaryValue(k, i, t, float(m[i, t]))


def _phenotype_array(phenotypes) -> np.ndarray:
    if isinstance(phenotypes, PhenotypeTensor):
        return phenotypes.data
    a = np.asarray(phenotypes, dtype=np.float64)
    if a.ndim != 3:
        raise ValueError(f"phenotypes must be (R, n, window), got shape {a.shape}")
    return a


def _pathway_matrices(pathways) -> list[np.ndarray]:
    if isinstance(pathways, PathwayCollection):
        return pathways.matrices
    return [_as_float_matrix(m) for m in pathways]


def reconstruct(phenotypes, pathway) -> np.ndarray:
    """Reconstruct one individual matrix from phenotypes and a pathway.

    The output column at time t mixes the day-tau columns of every phenotype
    whose occurrence started tau steps earlier:

        out[i, t] = sum_r sum_{tau=0..min(window-1, t)} pathway[r, t-tau] * P[r, i, tau]

    Output shape is (n, T) with T = T' + window - 1. Values are >= 0 and may
    exceed 1 where occurrences overlap.
    """
    P = _phenotype_array(phenotypes)
    W = _as_float_matrix(pathway)
    if P.shape[0] != W.shape[0]:
        raise RankMismatch(
            f"phenotypes have rank {P.shape[0]}, pathway has rank {W.shape[0]}"
        )
    _, n, window = P.shape
    horizon = W.shape[1]
    out = np.zeros((n, horizon + window - 1))
    for tau in range(window):
        out[:, tau:tau + horizon] += P[:, :, tau].T @ W
    return out


def reconstruct_all(phenotypes, pathways) -> list[np.ndarray]:
    """Apply :func:`reconstruct` to every individual, order preserved."""
    P = _phenotype_array(phenotypes)
    return [reconstruct(P, W) for W in _pathway_matrices(pathways)]


def reconstruct_batched_regular(phenotypes, pathways) -> np.ndarray:
    """Stacked reconstruction for pathways sharing one temporal length.

    Equivalent to :func:`reconstruct_all` on regular data but returns a single
    (K, n, T) array computed with stacked products, which is markedly faster
    for many same-length individuals.

    Raises:
        UnequalLengths: the pathways do not all share T'.
        RankMismatch: phenotype and pathway ranks differ.
    """
    P = _phenotype_array(phenotypes)
    if isinstance(pathways, np.ndarray) and pathways.ndim == 3:
        stack = np.asarray(pathways, dtype=np.float64)
    else:
        mats = _pathway_matrices(pathways)
        if not mats:
            raise EmptyTensor("no pathways to reconstruct")
        lengths = {m.shape[1] for m in mats}
        if len(lengths) > 1:
            raise UnequalLengths(f"pathway lengths differ: {sorted(lengths)}")
        stack = np.stack(mats)
    if P.shape[0] != stack.shape[1]:
        raise RankMismatch(
            f"phenotypes have rank {P.shape[0]}, pathways have rank {stack.shape[1]}"
        )
    n_ind, _, horizon = stack.shape
    _, n, window = P.shape
    out = np.zeros((n_ind, n, horizon + window - 1))
    for tau in range(window):
        out[:, :, tau:tau + horizon] += np.einsum("rn,krt->knt", P[:, :, tau], stack)
    return out
