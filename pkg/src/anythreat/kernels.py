"""Backend selection for the hot loops.

The compiled extension is used when it imports; set ``ANYTHREAT_PURE=1`` to
force the numpy fallback. ``BACKEND`` names the active one.
"""
import os

import numpy as np

from . import _pykernels

try:
    if os.environ.get("ANYTHREAT_PURE") == "1":
        raise ImportError("pure backend requested")
    from . import _ckernels as _impl

    BACKEND = "cython"
except ImportError:
    _impl = _pykernels
    BACKEND = "python"


def kneighbors(ref, queries, k, exclude=None):
    """Exact Euclidean k-NN of each query within ``ref``.

    Neighbours are ordered by (distance, reference index). ``exclude[i]`` is a
    reference index that query ``i`` may not use (-1 for none).
    """
    ref = np.ascontiguousarray(ref, dtype=np.float64)
    queries = np.ascontiguousarray(queries, dtype=np.float64)
    n = ref.shape[0] - (0 if exclude is None else 1)
    if k < 1 or k > n:
        raise ValueError(f"k={k} outside [1, {n}]")
    if exclude is not None:
        exclude = np.ascontiguousarray(exclude, dtype=np.intp)
    return _impl.kneighbors(ref, queries, int(k), exclude)


def best_split(X, y, idx, features, n_classes):
    return _impl.best_split(
        X,
        np.ascontiguousarray(y, dtype=np.intp),
        np.ascontiguousarray(idx, dtype=np.intp),
        np.ascontiguousarray(features, dtype=np.intp),
        int(n_classes),
    )


def tree_apply(feature, threshold, left, right, X):
    return _impl.tree_apply(feature, threshold, left, right,
                            np.ascontiguousarray(X, dtype=np.float64))


def backends():
    """Both kernel modules keyed by name, for comparison and benchmarking."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels

        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
