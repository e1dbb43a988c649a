"""Pluggable multi-class base classifiers: k-NN, Gini random forest and a
one-vs-rest logistic model.

Every classifier indexes its labels in sorted order; ties in votes or scores
go to the lowest index.
"""
from __future__ import annotations

import io
import json
import math
import struct
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .datamodel import FeatureSchema, Instance, as_matrix
from .decompose import effective_label

KINDS = ("knn", "random_forest", "linear")

DEFAULTS = {
    "knn": {"k": 5},
    "random_forest": {"n_trees": 100, "max_depth": None, "features_per_split": None, "seed": 0},
    "linear": {"learning_rate": 0.1, "epochs": 200, "l2": 1e-4},
}


class SchemaMismatch(ValueError):
    pass


@dataclass(frozen=True)
class ClassifierSpec:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown classifier kind {self.kind!r}; expected one of {KINDS}")
        unknown = set(self.params) - set(DEFAULTS[self.kind])
        if unknown:
            raise ValueError(f"unknown {self.kind} parameters: {sorted(unknown)}")
        merged = {**DEFAULTS[self.kind], **self.params}
        for key, v in merged.items():
            if v is None or key == "seed":
                continue
            if v <= 0:
                raise ValueError(f"{self.kind}.{key} must be positive, got {v}")
        object.__setattr__(self, "params", merged)

    @property
    def name(self) -> str:
        return self.kind

    def to_dict(self):
        return {"kind": self.kind, **self.params}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        return cls(d.pop("kind"), d)


@dataclass
class Model:
    kind: str
    labels: list
    fingerprint: str
    params: dict
    arrays: dict
    info: dict = field(default_factory=dict)

    def check_schema(self, schema: FeatureSchema):
        if schema.fingerprint != self.fingerprint:
            raise SchemaMismatch(
                f"model trained on schema {self.fingerprint}, got {schema.fingerprint}")

    # --- serialization -------------------------------------------------
    MAGIC = b"ANYTHREAT-MODEL\x00"
    VERSION = 1

    def to_bytes(self) -> bytes:
        header = json.dumps({
            "kind": self.kind, "labels": self.labels, "fingerprint": self.fingerprint,
            "params": self.params, "info": self.info,
        }, sort_keys=True).encode()
        buf = io.BytesIO()
        np.savez(buf, **self.arrays)
        payload = buf.getvalue()
        return (self.MAGIC + struct.pack("<II", self.VERSION, len(header))
                + header + payload)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "Model":
        if not blob.startswith(cls.MAGIC):
            raise ValueError("not an anythreat model blob")
        off = len(cls.MAGIC)
        version, hlen = struct.unpack_from("<II", blob, off)
        if version != cls.VERSION:
            raise ValueError(f"unsupported model format version {version}")
        off += 8
        header = json.loads(blob[off:off + hlen])
        with np.load(io.BytesIO(blob[off + hlen:])) as npz:
            arrays = {k: npz[k] for k in npz.files}
        return cls(header["kind"], header["labels"], header["fingerprint"],
                   header["params"], arrays, header["info"])


def _argmax_lowest(votes: np.ndarray) -> np.ndarray:
    # np.argmax returns the first maximum, i.e. the lowest label index
    return np.argmax(votes, axis=1)


# --- k-NN ----------------------------------------------------------------

def _train_knn(X, y, n_classes, params):
    if params["k"] > X.shape[0]:
        raise ValueError(f"knn k={params['k']} exceeds {X.shape[0]} training points")
    return {"X": X, "y": y}, {}


def _predict_knn(model, Q):
    X, y = model.arrays["X"], model.arrays["y"]
    _, nn = kernels.kneighbors(X, Q, model.params["k"])
    votes = np.zeros((Q.shape[0], len(model.labels)))
    np.add.at(votes, (np.arange(Q.shape[0])[:, None], y[nn]), 1.0)
    return _argmax_lowest(votes)


# --- random forest ---------------------------------------------------------

def _build_tree(X, y, n_classes, rng, mtry, max_depth, counters):
    n, m = X.shape
    boot = rng.integers(0, n, size=n)
    counters["bootstrap_sizes"].append(int(boot.size))
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(-1)
        return len(feature) - 1

    stack = [(new_node(), boot, 0)]
    while stack:
        node, idx, depth = stack.pop()
        counts = np.bincount(y[idx], minlength=n_classes)
        value[node] = int(np.argmax(counts))
        if np.count_nonzero(counts) <= 1 or (max_depth is not None and depth >= max_depth):
            continue
        cand = rng.choice(m, size=mtry, replace=False)
        counters["candidates"].add(int(cand.size))
        f, thr, _ = kernels.best_split(X, y, idx, cand, n_classes)
        if f < 0:
            continue
        go_left = X[idx, f] <= thr
        feature[node] = f
        threshold[node] = thr
        l, r = new_node(), new_node()
        left[node], right[node] = l, r
        stack.append((r, idx[~go_left], depth + 1))
        stack.append((l, idx[go_left], depth + 1))
    return (np.array(feature, dtype=np.intp), np.array(threshold, dtype=np.float64),
            np.array(left, dtype=np.intp), np.array(right, dtype=np.intp),
            np.array(value, dtype=np.intp))


def _train_forest(X, y, n_classes, params):
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.intp)
    m = X.shape[1]
    mtry = params["features_per_split"] or max(1, int(math.isqrt(m)))
    mtry = min(mtry, m)
    seeds = np.random.SeedSequence(params["seed"]).spawn(params["n_trees"])
    counters = {"bootstrap_sizes": [], "candidates": set()}
    arrays = {}
    for t, ss in enumerate(seeds):
        parts = _build_tree(X, y, n_classes, np.random.default_rng(ss), mtry,
                            params["max_depth"], counters)
        for name, arr in zip(("feature", "threshold", "left", "right", "value"), parts):
            arrays[f"t{t}_{name}"] = arr
    info = {"mtry": mtry, "bootstrap_sizes": counters["bootstrap_sizes"],
            "candidates_per_split": sorted(counters["candidates"])}
    return arrays, info


def _predict_forest(model, Q):
    votes = np.zeros((Q.shape[0], len(model.labels)))
    rows = np.arange(Q.shape[0])
    a = model.arrays
    for t in range(model.params["n_trees"]):
        leaf = kernels.tree_apply(a[f"t{t}_feature"], a[f"t{t}_threshold"],
                                  a[f"t{t}_left"], a[f"t{t}_right"], Q)
        votes[rows, a[f"t{t}_value"][leaf]] += 1.0
    return _argmax_lowest(votes)


# --- one-vs-rest logistic ---------------------------------------------------

def _logistic_loss(W, Xb, Y, l2):
    z = Xb @ W.T
    # log(1 + exp(-s z)) with sign s = +1 where Y is 1 and -1 where Y is 0
    margin = np.where(Y > 0, z, -z)
    loss = np.logaddexp(0.0, -margin).mean(axis=0)
    return loss + 0.5 * l2 * (W[:, 1:] ** 2).sum(axis=1)


def _standardize(X, mean, scale):
    return (X - mean) / scale


def _train_linear(X, y, n_classes, params):
    # z-scoring keeps fixed-step gradient descent well conditioned
    n = X.shape[0]
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    Xb = np.hstack([np.ones((n, 1)), _standardize(X, mean, scale)])
    Y = np.where(y[:, None] == np.arange(n_classes)[None, :], 1.0, 0.0)
    W = np.zeros((n_classes, Xb.shape[1]))
    lr, l2 = params["learning_rate"], params["l2"]
    history = [float(_logistic_loss(W, Xb, Y, l2).sum())]
    for _ in range(params["epochs"]):
        p = 1.0 / (1.0 + np.exp(-(Xb @ W.T)))
        grad = (p - Y).T @ Xb / n
        grad[:, 1:] += l2 * W[:, 1:]
        W = W - lr * grad
        history.append(float(_logistic_loss(W, Xb, Y, l2).sum()))
    return {"W": W, "mean": mean, "scale": scale}, {"loss_history": history}


def _predict_linear(model, Q):
    W = model.arrays["W"]
    Q = _standardize(Q, model.arrays["mean"], model.arrays["scale"])
    z = np.hstack([np.ones((Q.shape[0], 1)), Q]) @ W.T
    return _argmax_lowest(z)


_TRAIN = {"knn": _train_knn, "random_forest": _train_forest, "linear": _train_linear}
_PREDICT = {"knn": _predict_knn, "random_forest": _predict_forest, "linear": _predict_linear}


def train(spec: ClassifierSpec, training: Sequence[Instance], schema: FeatureSchema) -> Model:
    """Fit ``spec`` on the effective labels (subclass when decomposed)."""
    eff = [effective_label(i) for i in training]
    labels = sorted(set(eff))
    if len(labels) < 2:
        raise ValueError(f"training set has a single label: {labels}")
    index = {lab: j for j, lab in enumerate(labels)}
    X = as_matrix(training, schema.m)
    if X.shape[1] != schema.m:
        raise SchemaMismatch(f"training vectors have {X.shape[1]} features, schema has {schema.m}")
    y = np.array([index[lab] for lab in eff], dtype=np.intp)
    arrays, info = _TRAIN[spec.kind](X, y, len(labels), spec.params)
    return Model(spec.kind, labels, schema.fingerprint, dict(spec.params), arrays, info)


def predict_many(model: Model, instances: Sequence[Instance], schema: FeatureSchema) -> list:
    model.check_schema(schema)
    Q = as_matrix(instances, schema.m)
    if Q.shape[1] != schema.m:
        raise SchemaMismatch(f"instances have {Q.shape[1]} features, schema has {schema.m}")
    if Q.shape[0] == 0:
        return []
    return [model.labels[j] for j in _PREDICT[model.kind](model, Q)]


def predict(model: Model, instance: Instance, schema: FeatureSchema) -> str:
    return predict_many(model, [instance], schema)[0]
