# cython: language_level=3
"""Compiled hot loops: exact k-nearest-neighbour search, Gini split search and
tree traversal. Results are bit-identical to ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt
from libc.stdlib cimport malloc, free, qsort

cnp.import_array()


ctypedef struct Pair:
    double v
    Py_ssize_t y


cdef int _cmp_pair(const void* a, const void* b) noexcept nogil:
    cdef double va = (<Pair*>a).v
    cdef double vb = (<Pair*>b).v
    if va < vb:
        return -1
    if va > vb:
        return 1
    return 0


def kneighbors(double[:, ::1] ref, double[:, ::1] queries, Py_ssize_t k,
               Py_ssize_t[::1] exclude=None):
    cdef Py_ssize_t n = ref.shape[0]
    cdef Py_ssize_t q = queries.shape[0]
    cdef Py_ssize_t m = ref.shape[1]
    cdef Py_ssize_t i, j, f, pos, skip, filled
    cdef double d2, diff, d

    out_d = np.empty((q, k), dtype=np.float64)
    out_i = np.empty((q, k), dtype=np.intp)
    cdef double[:, ::1] od = out_d
    cdef Py_ssize_t[:, ::1] oi = out_i

    with nogil:
        for i in range(q):
            skip = -1
            if exclude is not None:
                skip = exclude[i]
            filled = 0
            for j in range(n):
                if j == skip:
                    continue
                d2 = 0.0
                for f in range(m):
                    diff = queries[i, f] - ref[j, f]
                    d2 = d2 + diff * diff
                d = sqrt(d2)
                if filled == k and d >= od[i, k - 1]:
                    continue
                # insertion keeps (distance, index) order; equal distances stay
                # behind earlier indices
                if filled < k:
                    pos = filled
                    filled = filled + 1
                else:
                    pos = k - 1
                while pos > 0 and od[i, pos - 1] > d:
                    od[i, pos] = od[i, pos - 1]
                    oi[i, pos] = oi[i, pos - 1]
                    pos = pos - 1
                od[i, pos] = d
                oi[i, pos] = j
    return out_d, out_i


def best_split(double[:, ::1] X, Py_ssize_t[::1] y, Py_ssize_t[::1] idx,
               Py_ssize_t[::1] features, Py_ssize_t n_classes):
    """Return (feature, threshold, score); feature is -1 when no split exists.

    score = sum_c L_c^2 / n_L + sum_c R_c^2 / n_R, maximised.
    """
    cdef Py_ssize_t n = idx.shape[0]
    cdef Py_ssize_t nf = features.shape[0]
    cdef Py_ssize_t a, b, c, fi, f
    cdef double sl, sr, score, thr
    cdef double best_score = -1.0
    cdef double best_thr = 0.0
    cdef Py_ssize_t best_f = -1

    cdef Pair* pairs = <Pair*>malloc(n * sizeof(Pair))
    cdef double* left = <double*>malloc(n_classes * sizeof(double))
    cdef double* total = <double*>malloc(n_classes * sizeof(double))
    if pairs == NULL or left == NULL or total == NULL:
        free(pairs); free(left); free(total)
        raise MemoryError()

    try:
        with nogil:
            for c in range(n_classes):
                total[c] = 0.0
            for a in range(n):
                total[y[idx[a]]] += 1.0

            for fi in range(nf):
                f = features[fi]
                for a in range(n):
                    pairs[a].v = X[idx[a], f]
                    pairs[a].y = y[idx[a]]
                qsort(pairs, n, sizeof(Pair), _cmp_pair)
                for c in range(n_classes):
                    left[c] = 0.0
                for a in range(n - 1):
                    left[pairs[a].y] += 1.0
                    if not (pairs[a].v < pairs[a + 1].v):
                        continue
                    sl = 0.0
                    sr = 0.0
                    for c in range(n_classes):
                        sl = sl + left[c] * left[c]
                        sr = sr + (total[c] - left[c]) * (total[c] - left[c])
                    score = sl / (a + 1) + sr / (n - a - 1)
                    if score > best_score:
                        best_score = score
                        best_f = f
                        thr = 0.5 * (pairs[a].v + pairs[a + 1].v)
                        if thr >= pairs[a + 1].v:
                            thr = pairs[a].v
                        best_thr = thr
    finally:
        free(pairs)
        free(left)
        free(total)
    return best_f, best_thr, best_score


def tree_apply(Py_ssize_t[::1] feature, double[::1] threshold,
               Py_ssize_t[::1] left, Py_ssize_t[::1] right, double[:, ::1] X):
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t i, node
    out = np.empty(n, dtype=np.intp)
    cdef Py_ssize_t[::1] o = out
    with nogil:
        for i in range(n):
            node = 0
            while feature[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            o[i] = node
    return out
