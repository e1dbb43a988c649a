"""Pure numpy versions of the compiled kernels in ``_ckernels.pyx``.

Arithmetic is ordered exactly as in the compiled loops so both backends return
bit-identical results.
"""
import numpy as np

_CHUNK = 256


def kneighbors(ref, queries, k, exclude=None):
    ref = np.ascontiguousarray(ref, dtype=np.float64)
    queries = np.ascontiguousarray(queries, dtype=np.float64)
    n, m = ref.shape
    q = queries.shape[0]
    out_d = np.empty((q, k), dtype=np.float64)
    out_i = np.empty((q, k), dtype=np.intp)
    for lo in range(0, q, _CHUNK):
        hi = min(lo + _CHUNK, q)
        block = queries[lo:hi]
        d2 = np.zeros((hi - lo, n))
        for f in range(m):
            diff = block[:, f, None] - ref[None, :, f]
            d2 += diff * diff
        d = np.sqrt(d2)
        if exclude is not None:
            ex = np.asarray(exclude[lo:hi])
            rows = np.nonzero(ex >= 0)[0]
            d[rows, ex[rows]] = np.inf
        order = np.argsort(d, axis=1, kind="stable")[:, :k]
        out_i[lo:hi] = order
        out_d[lo:hi] = np.take_along_axis(d, order, axis=1)
    return out_d, out_i


def best_split(X, y, idx, features, n_classes):
    yy = y[idx]
    n = len(idx)
    total = np.bincount(yy, minlength=n_classes).astype(np.float64)
    onehot = np.zeros((n, n_classes))
    best = (-1, 0.0, -1.0)
    for f in features:
        vals = X[idx, f]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        onehot[:] = 0.0
        onehot[np.arange(n), yy[order]] = 1.0
        left = np.cumsum(onehot, axis=0)[:-1]
        valid = sv[:-1] < sv[1:]
        if not valid.any():
            continue
        right = total - left
        n_left = np.arange(1, n, dtype=np.float64)
        sl = np.zeros(n - 1)
        sr = np.zeros(n - 1)
        for c in range(n_classes):
            sl = sl + left[:, c] * left[:, c]
            sr = sr + right[:, c] * right[:, c]
        score = sl / n_left + sr / (n - n_left)
        score[~valid] = -np.inf
        a = int(np.argmax(score))
        if score[a] > best[2]:
            thr = 0.5 * (sv[a] + sv[a + 1])
            if thr >= sv[a + 1]:
                thr = sv[a]
            best = (int(f), float(thr), float(score[a]))
    return best


def tree_apply(feature, threshold, left, right, X):
    node = np.zeros(X.shape[0], dtype=np.intp)
    active = feature[node] >= 0
    while active.any():
        rows = np.nonzero(active)[0]
        cur = node[rows]
        go_left = X[rows, feature[cur]] <= threshold[cur]
        node[rows] = np.where(go_left, left[cur], right[cur])
        active[rows] = feature[node[rows]] >= 0
    return node
