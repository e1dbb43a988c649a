"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Inputs are shaped like one community fold: a few thousand 18-feature
instances. Every timing also checks that both backends return identical
results.
"""
import argparse
import time

import numpy as np

from anythreat.kernels import backends


def _best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    if isinstance(a, np.ndarray):
        return a.tobytes() == b.tobytes()
    return a == b


def cases(rng):
    R = rng.uniform(size=(3000, 18))
    Q = rng.uniform(size=(600, 18))
    exclude = np.arange(R.shape[0], dtype=np.intp)
    yield "kneighbors 600x3000 k=55", lambda m: m.kneighbors(R, Q, 55, None)
    yield "kneighbors self 3000 k=55", lambda m: m.kneighbors(R, R, 55, exclude)

    X = np.round(rng.uniform(size=(4000, 18)), 3)
    y = rng.integers(0, 4, size=4000).astype(np.intp)
    idx = rng.integers(0, 4000, size=4000).astype(np.intp)
    feats = np.arange(4, dtype=np.intp)
    yield "best_split n=4000 mtry=4", lambda m: m.best_split(X, y, idx, feats, 4)

    depth = 12
    n_nodes = 2 ** (depth + 1) - 1
    internal = 2 ** depth - 1
    feature = np.full(n_nodes, -1, dtype=np.intp)
    feature[:internal] = rng.integers(0, 18, size=internal)
    threshold = rng.uniform(size=n_nodes)
    left = np.full(n_nodes, -1, dtype=np.intp)
    right = np.full(n_nodes, -1, dtype=np.intp)
    left[:internal] = 2 * np.arange(internal) + 1
    right[:internal] = 2 * np.arange(internal) + 2
    Xa = rng.uniform(size=(20000, 18))
    yield "tree_apply depth=12 n=20000", lambda m: m.tree_apply(feature, threshold, left, right, Xa)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    mods = backends()
    if "cython" not in mods:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation`")
    print(f"{'kernel':30s} {'python [s]':>11s} {'cython [s]':>11s} {'speedup':>8s}  identical")
    for name, fn in cases(np.random.default_rng(args.seed)):
        tp, out_p = _best_of(lambda: fn(mods["python"]), args.repeat)
        tc, out_c = _best_of(lambda: fn(mods["cython"]), args.repeat)
        print(f"{name:30s} {tp:11.4f} {tc:11.4f} {tp / tc:7.1f}x  {_same(out_p, out_c)}")


if __name__ == "__main__":
    main()
