"""Local Outlier Factor and the two minority-instance outlierness scores.

Minority instances are scored twice: against the majority class only and
against the other minority instances only. Each score is turned into a
percentile rank against a reference population scored with the same ``k``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .datamodel import Instance, as_matrix

# reachability distances of 0 (duplicate points) are floored before inverting
REACH_FLOOR = 1e-12


def k_lof(radicand: int) -> int:
    """Square-root thumb rule for the neighbourhood size, rounded half up."""
    return int(math.floor(math.sqrt(radicand) + 0.5))


def _lrd(dist, idx, kdist_ref):
    reach = np.maximum(kdist_ref[idx], dist)
    reach = np.maximum(reach, REACH_FLOOR)
    return 1.0 / reach.mean(axis=1)


def _reference_density(R, k):
    n = R.shape[0]
    d, i = kernels.kneighbors(R, R, k, exclude=np.arange(n))
    kdist = d[:, -1].copy()
    lrd = _lrd(d, i, kdist)
    return d, i, kdist, lrd


def _check_k(k, n_ref):
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    # every reference point needs k neighbours other than itself
    if k > n_ref - 1:
        raise ValueError(f"k={k} too large for a reference set of {n_ref} points")


def lof_scores(reference, queries, k: int, self_exclude: bool = False) -> np.ndarray:
    """Standard LOF of each query relative to ``reference`` (Euclidean).

    With ``self_exclude`` the queries are the reference points themselves, in
    the same order, and query ``i`` never counts reference point ``i`` as its
    neighbour.
    """
    R = np.atleast_2d(np.asarray(reference, dtype=np.float64))
    Q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    _check_k(k, R.shape[0])
    if Q.shape[1] != R.shape[1]:
        raise ValueError("queries and reference differ in dimension")
    rd, ri, kdist, lrd_ref = _reference_density(R, k)
    if self_exclude:
        if Q.shape[0] != R.shape[0]:
            raise ValueError("self_exclude requires queries to be the reference points")
        return lrd_ref[ri].mean(axis=1) / lrd_ref
    qd, qi = kernels.kneighbors(R, Q, k)
    lrd_q = _lrd(qd, qi, kdist)
    return lrd_ref[qi].mean(axis=1) / lrd_q


def _lof_with_reference(R, Q, k):
    """Scores for queries plus the self-excluded scores of the reference set."""
    _check_k(k, R.shape[0])
    rd, ri, kdist, lrd_ref = _reference_density(R, k)
    ref_scores = lrd_ref[ri].mean(axis=1) / lrd_ref
    qd, qi = kernels.kneighbors(R, Q, k)
    q_scores = lrd_ref[qi].mean(axis=1) / _lrd(qd, qi, kdist)
    return q_scores, ref_scores


def lof_majority(minority: Sequence[Instance], majority: Sequence[Instance],
                 return_reference: bool = False):
    """LOF of each minority instance using majority instances as neighbours.

    ``k`` follows sqrt(1 + |M|): the scored instance plus the whole majority.
    With ``return_reference`` also returns every majority instance's LOF
    within the majority class, the population for the percentile rank.
    """
    if not majority:
        raise ValueError("majority class is empty")
    M = as_matrix(majority)
    I = as_matrix(minority, M.shape[1])
    k = k_lof(1 + len(majority))
    q, ref = _lof_with_reference(M, I, k)
    return (q, ref) if return_reference else q


def lof_minority(minority: Sequence[Instance]) -> np.ndarray:
    """LOF of each minority instance against the remaining minority instances."""
    if len(minority) < 2:
        raise ValueError("need at least two minority instances")
    I = as_matrix(minority)
    return lof_scores(I, I, k_lof(len(minority)), self_exclude=True)


def percentile_rank(score: float, reference_scores) -> int:
    """Percent of reference scores strictly below ``score``, rounded half up."""
    ref = np.asarray(reference_scores, dtype=np.float64)
    if ref.size == 0:
        raise ValueError("reference scores are empty")
    below = int(np.count_nonzero(ref < score))
    return int(math.floor(100.0 * below / ref.size + 0.5))


def _percentiles(scores, reference, exclude_self=False):
    ref = np.sort(np.asarray(reference, dtype=np.float64))
    below = np.searchsorted(ref, scores, side="left")
    n = ref.size - (1 if exclude_self else 0)
    # a score never sits strictly below itself, so self-exclusion only
    # changes the denominator
    return np.floor(100.0 * below / n + 0.5).astype(int)


@dataclass(frozen=True)
class PeculiarityTable:
    """Per-minority-instance outlierness, aligned with the input order."""

    lof_majority: np.ndarray
    lof_minority: np.ndarray
    perc_majority: np.ndarray
    perc_minority: np.ndarray
    p: np.ndarray
    trapper: np.ndarray
    tau: float

    def __len__(self):
        return len(self.trapper)

    def survivors(self, minority):
        return [a for a, t in zip(minority, self.trapper) if not t]

    @property
    def p_survivors(self) -> np.ndarray:
        return self.p[~self.trapper]

    def to_dict(self):
        return {
            "lof_majority": self.lof_majority.tolist(),
            "lof_minority": self.lof_minority.tolist(),
            "perc_majority": self.perc_majority.tolist(),
            "perc_minority": self.perc_minority.tolist(),
            "p": [None if math.isnan(v) else v for v in self.p.tolist()],
            "trapper": self.trapper.tolist(),
            "tau": self.tau,
        }


def peculiarity_probability(perc_majority, perc_minority):
    """Selection probability in [0, 1]: product of the two percentile ranks."""
    return (np.ceil(perc_majority) * np.ceil(perc_minority)) / 1e4


def peculiarity_table(minority, majority, tau: float, remove_trappers: bool = True
                      ) -> PeculiarityTable:
    """Scores, ranks and probabilities per minority instance.

    Trappers (majority-side rank below ``tau``) get ``p = NaN``. With
    ``remove_trappers=False`` no instance is flagged.
    """
    lm, lm_ref = lof_majority(minority, majority, return_reference=True)
    li = lof_minority(minority)
    pm = _percentiles(lm, lm_ref)
    pi = _percentiles(li, li, exclude_self=True)
    trapper = (pm < tau) if remove_trappers else np.zeros(pm.size, dtype=bool)
    p = np.where(trapper, np.nan, peculiarity_probability(pm, pi))
    return PeculiarityTable(lm, li, pm, pi, p, trapper, tau)
