"""Synthetic datasets with planted phenotypes, plus noise injection.

Generation is the reverse of the decomposition: draw binary phenotypes, draw
binary pathways whose starts of one phenotype stay strictly more than one
window apart, reconstruct, then binarize (nonzero -> 1). Noise either adds
spurious events (Poisson count per individual, placed on free cells) or
deletes true events (independent Bernoulli per event).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleConfig
from .tensor import (
    IrregularTensor,
    PathwayCollection,
    PhenotypeTensor,
    reconstruct,
)


@dataclass(frozen=True)
class GenConfig:
    """Planted-dataset shape and densities."""

    individuals: int = 500
    features: int = 20
    rank: int = 4
    window: int = 3
    duration: int = 10
    occurrence_p: float = 0.3
    feature_density: float = 0.08
    rng_seed: int = 0
    duration_range: tuple[int, int] | None = None

    def __post_init__(self):
        if min(self.individuals, self.features, self.rank, self.window, self.duration) < 1:
            raise InfeasibleConfig("all dimensions must be >= 1")
        if not 0.0 <= self.occurrence_p < 1.0:
            raise InfeasibleConfig("occurrence_p must lie in [0, 1)")
        if not 0.0 <= self.feature_density <= 1.0:
            raise InfeasibleConfig("feature_density must lie in [0, 1]")


@dataclass(frozen=True)
class NoiseSpec:
    """Additive noise adds events (Poisson mean per individual); destructive
    noise deletes each existing event with a fixed probability."""

    kind: str
    additive_lambda: float = 0.0
    destructive_p: float = 0.0

    def __post_init__(self):
        if self.kind not in ("additive", "destructive"):
            raise ValueError(f"kind must be 'additive' or 'destructive', got {self.kind!r}")
        if self.additive_lambda < 0:
            raise ValueError("additive_lambda must be >= 0")
        if not 0.0 <= self.destructive_p < 1.0:
            raise ValueError("destructive_p must lie in [0, 1)")


def _rng_of(rng, seed: int) -> np.random.Generator:
    if rng is None:
        return np.random.default_rng(seed)
    if isinstance(rng, (int, np.integer)):
        return np.random.default_rng(int(rng))
    return rng


def _feature_names(n: int) -> list[str]:
    width = len(str(max(n - 1, 0)))
    return [f"f{i:0{width}d}" for i in range(n)]


def _individual_ids(count: int) -> list[str]:
    width = len(str(max(count - 1, 0)))
    return [f"p{k:0{width}d}" for k in range(count)]


def _durations(cfg: GenConfig, rng: np.random.Generator) -> list[int]:
    if cfg.duration_range is None:
        return [cfg.duration] * cfg.individuals
    lo, hi = cfg.duration_range
    if lo < cfg.window or hi < lo:
        raise InfeasibleConfig(f"duration_range {cfg.duration_range} incompatible with window {cfg.window}")
    return [int(t) for t in rng.integers(lo, hi + 1, size=cfg.individuals)]


def _planted_pathways(cfg: GenConfig, durations: list[int], rng: np.random.Generator) -> list[np.ndarray]:
    # Two starts of the same phenotype stay strictly more than one window
    # apart: occurrences never run back to back, and the planted pathways sit
    # exactly on the zero set of the non-succession penalty.
    gap = cfg.window + 1
    mats = []
    for duration in durations:
        horizon = duration - cfg.window + 1
        w = np.zeros((cfg.rank, horizon))
        draws = rng.random((cfg.rank, horizon)) < cfg.occurrence_p
        for r in range(cfg.rank):
            last = -gap
            for t in range(horizon):
                if draws[r, t] and t - last >= gap:
                    w[r, t] = 1.0
                    last = t
        mats.append(w)
    return mats


def _assemble(cfg: GenConfig, phen: np.ndarray, rng: np.random.Generator):
    durations = _durations(cfg, rng)
    w_mats = _planted_pathways(cfg, durations, rng)
    names = _feature_names(cfg.features)
    ids = _individual_ids(cfg.individuals)
    data = [(reconstruct(phen, w) > 0).astype(np.float64) for w in w_mats]
    return (
        IrregularTensor(data, feature_names=names, individual_ids=ids),
        PhenotypeTensor(phen, feature_names=names),
        PathwayCollection(w_mats, individual_ids=ids),
    )


def _random_phenotypes(cfg: GenConfig, rng: np.random.Generator) -> np.ndarray:
    # Bernoulli cells, then every instant of every phenotype is guaranteed a
    # nonempty event subset so no phenotype day is degenerate.
    phen = (rng.random((cfg.rank, cfg.features, cfg.window)) < cfg.feature_density).astype(np.float64)
    for r in range(cfg.rank):
        for tau in range(cfg.window):
            if not phen[r, :, tau].any():
                phen[r, rng.integers(cfg.features), tau] = 1.0
    return phen


def generate(cfg: GenConfig, rng=None):
    """Planted dataset: returns (X, true phenotypes, true pathways).

    Binarization guarantees binarize(reconstruct(P, W)) == X exactly.
    """
    if cfg.window > cfg.duration:
        raise InfeasibleConfig(f"window {cfg.window} exceeds duration {cfg.duration}")
    rng = _rng_of(rng, cfg.rng_seed)
    return _assemble(cfg, _random_phenotypes(cfg, rng), rng)


def generate_repeated_event_phenotypes(cfg: GenConfig, rng=None, repeated: int = 6):
    """Planted dataset where the last ``repeated`` phenotypes repeat one
    feature at every slice of the window (successions of similar events);
    the remaining phenotypes are random as in :func:`generate`."""
    if cfg.window > cfg.duration:
        raise InfeasibleConfig(f"window {cfg.window} exceeds duration {cfg.duration}")
    if not 0 <= repeated <= cfg.rank:
        raise InfeasibleConfig(f"repeated count {repeated} outside [0, rank={cfg.rank}]")
    if repeated > cfg.features:
        raise InfeasibleConfig(f"need {repeated} distinct features, have {cfg.features}")
    rng = _rng_of(rng, cfg.rng_seed)
    phen = _random_phenotypes(cfg, rng)
    chosen = rng.choice(cfg.features, size=repeated, replace=False)
    for idx, feature in enumerate(chosen):
        r = cfg.rank - repeated + idx
        phen[r] = 0.0
        phen[r, feature, :] = 1.0
    return _assemble(cfg, phen, rng)


def add_noise(X: IrregularTensor, spec: NoiseSpec, rng=None):
    """Disturbed copy of X plus the flip count normalized by X's event count.

    Additive noise only sets zero cells to 1 (collisions resampled, count
    saturates when an individual runs out of free cells); destructive noise
    only clears 1 cells. The output stays binary.
    """
    rng = _rng_of(rng, 0)
    total_ones = int(sum(m.sum() for m in X.matrices))
    flipped = 0
    noisy = []
    for m in X.matrices:
        m = m.copy()
        if spec.kind == "additive":
            count = int(rng.poisson(spec.additive_lambda))
            free = np.argwhere(m == 0.0)
            count = min(count, len(free))
            if count > 0:
                picks = rng.choice(len(free), size=count, replace=False)
                rows, cols = free[picks].T
                m[rows, cols] = 1.0
                flipped += count
        else:
            ones = m == 1.0
            drop = ones & (rng.random(m.shape) < spec.destructive_p)
            flipped += int(drop.sum())
            m[drop] = 0.0
        noisy.append(m)
    level = flipped / total_ones if total_ones else 0.0
    return (
        IrregularTensor(
            noisy,
            feature_names=list(X.feature_names),
            individual_ids=list(X.individual_ids),
        ),
        float(level),
    )
