"""Reconstruction and phenotype-quality metrics.

FIT is 1 minus the ratio of summed per-individual Frobenius errors to summed
ground-truth norms: 1 is perfect, 0 matches an all-zero reconstruction of a
nonzero truth, and values can go negative. Phenotype sets are compared after
an optimal one-to-one matching (minimum total cosine dissimilarity), so all
set-level scores are invariant to phenotype ordering.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import RankMismatch, RankTooSmall, ShapeMismatch, ZeroNormGroundTruth
from .tensor import IrregularTensor, PathwayCollection, PhenotypeTensor, _phenotype_array


@dataclass(frozen=True)
class Matching:
    """Perfect matching between two phenotype sets and its total cost."""

    pairs: list[tuple[int, int]]
    cost: float

    def permutation(self) -> list[int]:
        """perm[i] = j: index in the second set matched to i in the first."""
        perm = [0] * len(self.pairs)
        for i, j in self.pairs:
            perm[i] = j
        return perm


@dataclass
class FitReport:
    """FIT scores with the matching that aligned the phenotype sets."""

    fit_x: float
    fit_p: float | None = None
    fit_w: float | None = None
    matching: list[int] | None = None
    per_individual_frobenius: list[tuple[float, float]] | None = None


def _matrices_of(X) -> list[np.ndarray]:
    if isinstance(X, (IrregularTensor, PathwayCollection)):
        return X.matrices
    if isinstance(X, np.ndarray) and X.ndim == 3:
        return list(X)
    return [np.asarray(m, dtype=np.float64) for m in X]


def frobenius_errors(X, X_hat) -> list[tuple[float, float]]:
    """Per individual: (||X_k - X_hat_k||_F, ||X_k||_F)."""
    xs = _matrices_of(X)
    hs = _matrices_of(X_hat)
    if len(xs) != len(hs):
        raise ShapeMismatch(f"{len(xs)} truth matrices vs {len(hs)} reconstructions")
    out = []
    for k, (a, b) in enumerate(zip(xs, hs)):
        if a.shape != b.shape:
            raise ShapeMismatch(f"individual {k}: {a.shape} vs {b.shape}")
        out.append((float(np.linalg.norm(a - b)), float(np.linalg.norm(a))))
    return out


def fit(X, X_hat) -> float:
    """FIT of a reconstruction: 1 - sum of errors / sum of truth norms."""
    errs = frobenius_errors(X, X_hat)
    denom = sum(norm for _, norm in errs)
    if denom == 0.0:
        raise ZeroNormGroundTruth("ground truth has zero total Frobenius norm")
    return 1.0 - sum(err for err, _ in errs) / denom


def _column_cosine(a: np.ndarray, b: np.ndarray) -> float:
    # Identical columns (including both zero) score exactly 1; a single-sided
    # zero column scores 0.
    if np.array_equal(a, b):
        return 1.0
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(a @ b) / (na * nb)


def phenotype_cosine(a, b) -> float:
    """Mean cosine similarity between matching time slices of two phenotypes."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatch(f"phenotype shapes differ: {a.shape} vs {b.shape}")
    window = a.shape[1]
    return sum(_column_cosine(a[:, t], b[:, t]) for t in range(window)) / window


def linear_assignment(cost) -> Matching:
    """Minimum-cost perfect matching of a square cost matrix."""
    cost = np.asarray(cost, dtype=np.float64)
    rows, cols = linear_sum_assignment(cost)
    pairs = [(int(i), int(j)) for i, j in zip(rows, cols)]
    return Matching(pairs=pairs, cost=float(cost[rows, cols].sum()))


def _cosine_matrix(set_a: np.ndarray, set_b: np.ndarray) -> np.ndarray:
    ra, rb = set_a.shape[0], set_b.shape[0]
    out = np.empty((ra, rb))
    for i in range(ra):
        for j in range(rb):
            out[i, j] = phenotype_cosine(set_a[i], set_b[j])
    return out


def match_phenotypes(set_a, set_b) -> tuple[Matching, float]:
    """Optimal pairing of two phenotype sets and the mean matched cosine.

    The matching minimizes the total cosine dissimilarity (1 - cosine);
    similarity is the mean cosine over the R matched pairs, so a set matched
    against itself scores exactly 1.
    """
    a = _phenotype_array(set_a)
    b = _phenotype_array(set_b)
    if a.shape[0] != b.shape[0]:
        raise RankMismatch(f"sets have {a.shape[0]} and {b.shape[0]} phenotypes")
    cosines = _cosine_matrix(a, b)
    matching = linear_assignment(1.0 - cosines)
    similarity = float(np.mean([cosines[i, j] for i, j in matching.pairs]))
    return matching, similarity


def diversity(set_a) -> float:
    """Mean pairwise cosine dissimilarity inside one phenotype set, in [0, 1]."""
    a = _phenotype_array(set_a)
    rank = a.shape[0]
    if rank < 2:
        raise RankTooSmall("diversity needs at least two phenotypes")
    dissim = [
        1.0 - phenotype_cosine(a[i], a[j])
        for i in range(rank)
        for j in range(i + 1, rank)
    ]
    return float(np.mean(dissim))


def fit_p(truth, learned) -> float:
    """FIT of learned phenotypes against planted ones, after optimal alignment."""
    t = _phenotype_array(truth)
    l = _phenotype_array(learned)
    matching, _ = match_phenotypes(t, l)
    aligned = l[np.array(matching.permutation())]
    return fit(list(t), list(aligned))


def fit_w(truth, learned, matching: Matching) -> float:
    """FIT of learned pathways against planted ones.

    Rows of learned pathways are permuted by the phenotype matching (rows of
    W are only identifiable through P, so the alignment is reused rather than
    recomputed).
    """
    ts = _matrices_of(truth)
    ls = _matrices_of(learned)
    if len(ts) != len(ls):
        raise ShapeMismatch(f"{len(ts)} truth pathways vs {len(ls)} learned")
    perm = np.array(matching.permutation())
    rank = len(perm)
    for k, (a, b) in enumerate(zip(ts, ls)):
        if a.shape[0] != rank or b.shape[0] != rank:
            raise RankMismatch(f"pathway {k} rank differs from matching size {rank}")
    aligned = [b[perm] for b in ls]
    return fit(ts, aligned)


def fit_report(
    X,
    X_hat,
    truth_phenotypes=None,
    learned_phenotypes=None,
    truth_pathways=None,
    learned_pathways=None,
) -> FitReport:
    """Bundle FIT_X with FIT_P / FIT_W when ground-truth factors are known."""
    errs = frobenius_errors(X, X_hat)
    denom = sum(norm for _, norm in errs)
    if denom == 0.0:
        raise ZeroNormGroundTruth("ground truth has zero total Frobenius norm")
    fx = 1.0 - sum(err for err, _ in errs) / denom
    report = FitReport(fit_x=fx, per_individual_frobenius=errs)
    if truth_phenotypes is not None and learned_phenotypes is not None:
        t = _phenotype_array(truth_phenotypes)
        l = _phenotype_array(learned_phenotypes)
        matching, _ = match_phenotypes(t, l)
        report.matching = matching.permutation()
        aligned = l[np.array(report.matching)]
        report.fit_p = fit(list(t), list(aligned))
        if truth_pathways is not None and learned_pathways is not None:
            report.fit_w = fit_w(truth_pathways, learned_pathways, matching)
    return report
