import itertools

import numpy as np
import pytest

from anythreat.datamodel import Label
from anythreat.decompose import (decompose_majority, decompose_minority, effective_label,
                                 fold_label, kmeans, label_map)
from anythreat.evaluate import measures
from conftest import make_instances


def _blobs(seed=0, per=40):
    rng = np.random.default_rng(seed)
    centers = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]])
    X = np.vstack([c + rng.normal(scale=1.0, size=(per, 2)) for c in centers])
    return X, np.repeat(np.arange(3), per)


def test_blobs_recovered_without_confusion():
    X, truth = _blobs()
    dec = kmeans(X, 3, seed=1)
    # every true blob maps to exactly one cluster
    pairs = set(zip(truth.tolist(), dec.assignments.tolist()))
    assert len(pairs) == 3 and len({c for _, c in pairs}) == 3


def test_k_one_is_mean():
    X, _ = _blobs()
    dec = kmeans(X, 1, seed=0)
    np.testing.assert_allclose(dec.centroids[0], X.mean(axis=0))
    assert (dec.assignments == 0).all()


def test_k_equals_n_zero_inertia():
    X = np.random.default_rng(2).normal(size=(7, 3))
    assert kmeans(X, 7, seed=0).inertia == pytest.approx(0.0, abs=1e-24)


def test_inertia_history_non_increasing():
    for seed in range(10):
        X = np.random.default_rng(seed).normal(size=(200, 4))
        h = kmeans(X, 5, seed=seed).inertia_history
        assert all(b <= a + 1e-9 for a, b in zip(h, h[1:]))


def test_assignment_to_nearest_centroid():
    X = np.random.default_rng(3).normal(size=(150, 3))
    dec = kmeans(X, 4, seed=3)
    d = ((X[:, None, :] - dec.centroids[None]) ** 2).sum(axis=2)
    np.testing.assert_array_equal(dec.assignments, d.argmin(axis=1))


def test_deterministic_under_seed():
    X = np.random.default_rng(4).normal(size=(100, 2))
    a, b = kmeans(X, 3, seed=7), kmeans(X, 3, seed=7)
    np.testing.assert_array_equal(a.assignments, b.assignments)
    np.testing.assert_array_equal(a.centroids, b.centroids)


def test_empty_cluster_reseeded():
    # 3 distinct locations, heavy duplication; k-means++ still needs 3 centres
    X = np.array([[0.0, 0.0]] * 20 + [[1.0, 0.0]] * 2 + [[50.0, 50.0]])
    dec = kmeans(X, 3, seed=0)
    assert len(set(dec.assignments.tolist())) == 3


def test_kmeans_errors():
    with pytest.raises(ValueError):
        kmeans(np.zeros((2, 2)), 3)
    with pytest.raises(ValueError):
        kmeans(np.zeros((0, 2)), 1)


def _training(seed=0):
    X, _ = _blobs(seed)
    maj = make_instances(X)
    mino = make_instances(np.random.default_rng(seed).normal(size=(12, 2)) + 30, True)
    return maj + mino


def test_decompose_majority_labels():
    inst = _training()
    out, dec = decompose_majority(inst, 3, seed=0)
    labels = sorted({effective_label(i) for i in out})
    assert labels == ["Anomalous", "Normal/0", "Normal/1", "Normal/2"]
    assert all(o.subclass is None for o in out if o.label is Label.ANOMALOUS)


def test_decompose_majority_k_one_only_renames():
    inst = _training()
    out, _ = decompose_majority(inst, 1, seed=0)
    assert [fold_label(effective_label(o)) for o in out] == [i.label for i in inst]
    assert [o.x for o in out] == [i.x for i in inst]


def test_decompose_majority_k_two_three_classes():
    out, _ = decompose_majority(_training(), 2, seed=0)
    assert len({effective_label(i) for i in out}) == 3


def test_decompose_both_gives_four_labels():
    out, _ = decompose_majority(_training(), 2, seed=0)
    out, _ = decompose_minority(out, 2, seed=0)
    assert sorted({effective_label(i) for i in out}) == [
        "Anomalous/0", "Anomalous/1", "Normal/0", "Normal/1"]


def test_decompose_minority_too_small():
    inst = make_instances(np.zeros((5, 2))) + make_instances(np.ones((1, 2)), True)
    with pytest.raises(ValueError):
        decompose_minority(inst, 2)


def test_subclasses_partition_class():
    inst = _training()
    out, _ = decompose_majority(inst, 3, seed=1)
    members = {c: {i for i, o in enumerate(out) if o.subclass == c and o.label is Label.NORMAL}
               for c in range(3)}
    normals = {i for i, o in enumerate(inst) if o.label is Label.NORMAL}
    assert set().union(*members.values()) == normals
    assert all(not (members[a] & members[b]) for a, b in itertools.combinations(range(3), 2))


@pytest.mark.parametrize("label,binary", [("Anomalous/3", Label.ANOMALOUS), ("Normal/0", Label.NORMAL),
                                          ("Anomalous", Label.ANOMALOUS), ("Normal", Label.NORMAL)])
def test_fold_label(label, binary):
    assert fold_label(label) is binary


def test_label_map():
    assert label_map(["Anomalous/0", "Normal/1"]) == {"Anomalous/0": Label.ANOMALOUS,
                                                      "Normal/1": Label.NORMAL}


def test_measures_invariant_to_cluster_permutation():
    rng = np.random.default_rng(0)
    truth = (make_instances(rng.normal(size=(20, 2)))
             + [make_instances([[0.0, 0.0]], True, threat=f"T{i % 4}", start=100 + i)[0] for i in range(8)])
    sub = rng.integers(0, 2, size=len(truth))
    cls = rng.integers(0, 2, size=len(truth))
    names = np.array(["Normal", "Anomalous"])
    pred = [f"{names[c]}/{s}" for c, s in zip(cls, sub)]
    swapped = [f"{names[c]}/{1 - s}" for c, s in zip(cls, sub)]
    a = measures([fold_label(p) for p in pred], truth)
    b = measures([fold_label(p) for p in swapped], truth)
    assert a == b
