"""k-means clustering and class decomposition into subclass labels."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .datamodel import Instance, Label, as_matrix


@dataclass(frozen=True)
class Decomposition:
    k: int
    assignments: np.ndarray
    centroids: np.ndarray
    inertia: float
    n_iter: int
    inertia_history: tuple = field(default=())


def _sq_dists(X, C):
    d = np.zeros((X.shape[0], C.shape[0]))
    for f in range(X.shape[1]):
        diff = X[:, f, None] - C[None, :, f]
        d += diff * diff
    return d


def _plus_plus(X, k, rng):
    n = X.shape[0]
    centers = [int(rng.integers(n))]
    d2 = _sq_dists(X, X[centers]).min(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:
            nxt = int(rng.integers(n))
        centers.append(nxt)
        d2 = np.minimum(d2, _sq_dists(X, X[[nxt]])[:, 0])
    return X[centers].copy()


def kmeans(points, k: int, seed=None, max_iter: int = 100, tol: float = 1e-6) -> Decomposition:
    """Lloyd's algorithm from k-means++ seeds.

    An empty cluster is re-seeded at the point farthest from its current
    centroid. Stops once no centroid moves by ``tol`` or more.
    """
    X = np.atleast_2d(np.asarray(points, dtype=np.float64))
    n = X.shape[0]
    if n == 0:
        raise ValueError("no points to cluster")
    if not 1 <= k <= n:
        raise ValueError(f"k={k} outside [1, {n}]")
    rng = np.random.default_rng(seed)
    C = _plus_plus(X, k, rng)
    history = []
    it = 0
    for it in range(1, max_iter + 1):
        d = _sq_dists(X, C)
        assign = d.argmin(axis=1)
        best = d[np.arange(n), assign]
        history.append(float(best.sum()))
        new_C = C.copy()
        for c in range(k):
            members = assign == c
            if members.any():
                new_C[c] = X[members].mean(axis=0)
            else:
                far = int(best.argmax())
                new_C[c] = X[far]
                best[far] = 0.0
        shift = np.sqrt(((new_C - C) ** 2).sum(axis=1)).max()
        C = new_C
        if shift < tol:
            break
    d = _sq_dists(X, C)
    assign = d.argmin(axis=1)
    inertia = float(d[np.arange(n), assign].sum())
    history.append(inertia)
    return Decomposition(k, assign, C, inertia, it, tuple(history))


def effective_label(inst: Instance) -> str:
    """Training label: the class, or ``class/subclass`` after decomposition."""
    if inst.subclass is None:
        return inst.label.value
    return f"{inst.label.value}/{inst.subclass}"


def fold_label(label: str) -> Label:
    """Map a (sub)class label back to its binary class."""
    return Label(label.split("/", 1)[0])


def label_map(labels: Sequence[str]) -> dict:
    return {lab: fold_label(lab) for lab in labels}


def _decompose(instances, target: Label, k, seed):
    idx = [i for i, inst in enumerate(instances) if inst.label is target]
    if len(idx) < k:
        raise ValueError(f"cannot split {len(idx)} {target.value} instances into {k} clusters")
    dec = kmeans(as_matrix([instances[i] for i in idx]), k, seed=seed)
    out = list(instances)
    for j, i in enumerate(idx):
        out[i] = replace(instances[i], subclass=int(dec.assignments[j]))
    return out, dec


def decompose_majority(instances: Sequence[Instance], k: int, seed=None):
    """Relabel Normal instances with k-means subclasses; others untouched.

    Returns (relabelled instances, decomposition).
    """
    return _decompose(instances, Label.NORMAL, k, seed)


def decompose_minority(instances: Sequence[Instance], k: int, seed=None):
    """Relabel (already oversampled) Anomalous instances with k-means subclasses."""
    return _decompose(instances, Label.ANOMALOUS, k, seed)
