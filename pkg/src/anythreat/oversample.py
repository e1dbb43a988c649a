"""Minority oversampling: AMOTRE (trapper removal + per-feature shielded
sampling) and the SMOTE baseline with optional random undersampling."""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .datamodel import Instance, as_matrix
from .lof import peculiarity_table

log = logging.getLogger(__name__)

# per-feature neighbourhood cases
ONLY_POS, BOTH, ONLY_NEG = 0, 1, 2


@dataclass(frozen=True)
class AmotreConfig:
    perc_over: int = 200
    tau: float = 10
    prob_plus_only_pos: float = 0.2
    prob_plus_both: float = 0.5
    prob_plus_only_neg: float = 0.8
    lambda_toward: float = 0.3
    lambda_away: float = 1.0
    max_rounds: int = 1000
    remove_trappers: bool = True  # False gives the AMO-na variant
    seed: Optional[int] = None

    def __post_init__(self):
        for name in ("prob_plus_only_pos", "prob_plus_both", "prob_plus_only_neg"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        for name in ("lambda_toward", "lambda_away"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ValueError(f"{name} must lie in (0, 1], got {v}")
        if not 0 <= self.tau <= 100:
            raise ValueError(f"tau must lie in [0, 100], got {self.tau}")
        if self.perc_over < 0 or self.max_rounds < 1:
            raise ValueError("perc_over must be >= 0 and max_rounds >= 1")


@dataclass(frozen=True)
class SmoteConfig:
    perc_over: int = 200
    k_smote: int = 5
    perc_under: Optional[int] = None
    seed: Optional[int] = None

    def __post_init__(self):
        if self.k_smote < 1:
            raise ValueError("k_smote must be >= 1")
        if self.perc_over < 0:
            raise ValueError("perc_over must be >= 0")


def _rng(rng, seed):
    return rng if rng is not None else np.random.default_rng(seed)


def synthetic_copy(parent: Instance, x) -> Instance:
    return replace(parent, x=tuple(x), subclass=None, synthetic=True)


def peculiarity(minority: Sequence[Instance], majority: Sequence[Instance], tau: float,
                remove_trappers: bool = True):
    """Score the minority instances and drop trappers (perc_majority < tau).

    Returns the table (aligned with ``minority``) and the surviving instances.
    """
    if len(minority) < 2 or len(majority) < 1:
        raise ValueError("need >= 2 minority and >= 1 majority instances")
    table = peculiarity_table(minority, majority, tau, remove_trappers)
    survivors = table.survivors(minority)
    if not survivors:
        raise ValueError("all minority instances are trappers")
    return table, survivors


class FeatureNeighbors:
    """Sorted majority columns for nearest-value lookups along each feature."""

    def __init__(self, majority_matrix: np.ndarray):
        M = np.asarray(majority_matrix, dtype=np.float64)
        if M.shape[0] == 0:
            raise ValueError("majority class is empty")
        self.cols = np.sort(M, axis=0).T.copy()
        self.n = M.shape[0]

    def lookup(self, a: np.ndarray):
        """Distances to the nearest majority value at or above / strictly
        below each ``a[f]``; NaN where that side is empty."""
        m = self.cols.shape[0]
        pos = np.full(m, np.nan)
        neg = np.full(m, np.nan)
        for f in range(m):
            col = self.cols[f]
            j = np.searchsorted(col, a[f], side="left")
            if j < self.n:
                pos[f] = col[j] - a[f]
            if j > 0:
                neg[f] = a[f] - col[j - 1]
        return pos, neg


def per_feature_neighbors(a_f: float, majority: Sequence[Instance], f: int):
    """(pos, neg) distances from ``a_f`` to the nearest majority values of
    feature ``f`` on each side; ties count as the positive side. A missing
    side is ``None``."""
    if not majority:
        raise ValueError("majority class is empty")
    col = np.sort(np.array([inst.x[f] for inst in majority], dtype=np.float64))
    j = int(np.searchsorted(col, a_f, side="left"))
    pos = float(col[j] - a_f) if j < col.size else None
    neg = float(a_f - col[j - 1]) if j > 0 else None
    return pos, neg


@dataclass
class FeatureDraw:
    """Trace of one generated vector: per-feature case, direction, lambda and
    neighbour distance used."""

    value: np.ndarray
    case: np.ndarray
    direction: np.ndarray
    lam: np.ndarray
    dist: np.ndarray
    clamped: np.ndarray


def draw_features(a: np.ndarray, neighbors: FeatureNeighbors, min_f: np.ndarray,
                  cfg: AmotreConfig, rng) -> FeatureDraw:
    a = np.asarray(a, dtype=np.float64)
    pos, neg = neighbors.lookup(a)
    has_pos = ~np.isnan(pos)
    has_neg = ~np.isnan(neg)
    case = np.where(has_pos & has_neg, BOTH, np.where(has_pos, ONLY_POS, ONLY_NEG))
    prob_plus = np.choose(case, [cfg.prob_plus_only_pos, cfg.prob_plus_both,
                                 cfg.prob_plus_only_neg])

    u_dir = rng.random(a.size)
    u_mag = rng.random(a.size)
    direction = np.where(u_dir < prob_plus, 1, -1)

    toward_pos = direction == 1
    dist = np.where(case == BOTH, np.where(toward_pos, pos, neg),
                    np.where(case == ONLY_POS, pos, neg))
    # moving toward the only neighbour is shortened; moving away may span the
    # whole gap
    toward = np.where(case == BOTH, True,
                      np.where(case == ONLY_POS, toward_pos, ~toward_pos))
    lam = np.where(toward, cfg.lambda_toward, cfg.lambda_away)

    s = a + direction * (u_mag * (lam * dist))
    clamped = s < 0
    s = np.where(clamped, min_f, s)
    return FeatureDraw(s, case, direction, lam, dist, clamped)


def generate_sample(A: Instance, majority: Sequence[Instance], cfg: AmotreConfig,
                    rng=None, min_f=None, neighbors: Optional[FeatureNeighbors] = None
                    ) -> Instance:
    """One artificial minority instance around ``A``, feature by feature.

    ``min_f`` replaces negative values; it defaults to 0 (the floor of
    normalised data). ``neighbors`` may be passed to reuse the sorted
    majority columns.
    """
    rng = _rng(rng, cfg.seed)
    if neighbors is None:
        neighbors = FeatureNeighbors(as_matrix(majority))
    a = np.asarray(A.x, dtype=np.float64)
    if min_f is None:
        min_f = np.zeros_like(a)
    draw = draw_features(a, neighbors, np.asarray(min_f, dtype=np.float64), cfg, rng)
    return synthetic_copy(A, draw.value.tolist())


def draw_candidates(p: np.ndarray, rng) -> np.ndarray:
    """Indices selected in one round: independent Bernoulli(p_t) trials."""
    return np.nonzero(rng.random(p.size) < p)[0]


def selection_schedule(p: np.ndarray, n_target: int, rng, max_rounds: int = 1000):
    """Order in which instances are sampled, and the number of rounds used.

    Rounds of Bernoulli selection run until ``n_target`` picks, dropping the
    overflow of the last round. Past ``max_rounds`` the remainder is drawn
    proportionally to ``p`` (uniformly if every ``p`` is zero).
    """
    p = np.asarray(p, dtype=np.float64)
    picks: list = []
    rounds = 0
    while len(picks) < n_target and rounds < max_rounds:
        picks.extend(draw_candidates(p, rng).tolist())
        rounds += 1
    del picks[n_target:]
    if len(picks) < n_target:
        total = p.sum()
        log.warning("selection hit max_rounds=%d with %d/%d picks; drawing the rest "
                    "proportionally to peculiarity", max_rounds, len(picks), n_target)
        weights = p / total if total > 0 else None
        picks.extend(rng.choice(p.size, size=n_target - len(picks), p=weights).tolist())
    return picks, rounds


def amotre(minority: Sequence[Instance], majority: Sequence[Instance],
           cfg: AmotreConfig = AmotreConfig(), rng=None):
    """AMOTRE oversampling.

    Returns (synthetic instances, peculiarity table). The minority set to train
    on is ``table.survivors(minority) + synthetic``.
    """
    rng = _rng(rng, cfg.seed)
    table, survivors = peculiarity(minority, majority, cfg.tau, cfg.remove_trappers)
    n_target = (cfg.perc_over * len(survivors)) // 100
    picks, _ = selection_schedule(table.p_survivors, n_target, rng, cfg.max_rounds)

    neighbors = FeatureNeighbors(as_matrix(majority))
    # negative draws fall back to the smallest minority value of the feature
    min_f = as_matrix(minority).min(axis=0)
    X_r = as_matrix(survivors)
    out = []
    for i in picks:
        draw = draw_features(X_r[i], neighbors, min_f, cfg, rng)
        out.append(synthetic_copy(survivors[i], draw.value.tolist()))
    return out, table


def smote(minority: Sequence[Instance], cfg: SmoteConfig = SmoteConfig(), rng=None):
    """SMOTE: interpolate each minority instance toward random members of its
    ``k_smote`` nearest minority neighbours."""
    rng = _rng(rng, cfg.seed)
    n = len(minority)
    if n <= cfg.k_smote:
        raise ValueError(f"SMOTE needs more than k_smote={cfg.k_smote} minority "
                         f"instances, got {n}")
    X = as_matrix(minority)
    _, nn = kernels.kneighbors(X, X, cfg.k_smote, exclude=np.arange(n))

    per = np.full(n, cfg.perc_over // 100, dtype=int)
    extra = (cfg.perc_over % 100) * n // 100
    if extra:
        per[rng.choice(n, size=extra, replace=False)] += 1

    out = []
    for i in range(n):
        for _ in range(per[i]):
            j = nn[i, rng.integers(cfg.k_smote)]
            gap = rng.random()
            out.append(synthetic_copy(minority[i], (X[i] + gap * (X[j] - X[i])).tolist()))
    return out


def smote_undersample(majority: Sequence[Instance], n_added: int, perc_under: float,
                      rng=None):
    """Keep a uniform random subset of ``perc_under/100 * n_added`` majority
    instances (original order preserved)."""
    rng = _rng(rng, None)
    size = int(perc_under * n_added // 100)
    if size > len(majority):
        raise ValueError(f"undersampling asks for {size} of {len(majority)} majority instances")
    keep = np.sort(rng.choice(len(majority), size=size, replace=False))
    return [majority[i] for i in keep]
