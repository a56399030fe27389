from collections import Counter

import numpy as np
import pytest

from floodprone.balance import balanced_weights, smote
from floodprone.model import DataError


def test_balanced_weights_examples():
    assert balanced_weights([0, 0, 1]) == {0: 0.75, 1: 1.5}
    assert balanced_weights([0, 1, 2, 0, 1, 2]) == {0: 1.0, 1: 1.0, 2: 1.0}
    assert balanced_weights([3, 3, 3]) == {3: 1.0}
    with pytest.raises(DataError):
        balanced_weights([])


def test_smote_single_synthetic_on_segment():
    X = np.array([[5.0, 5.0], [6.0, 5.0], [7.0, 5.0], [0.0, 0.0], [1.0, 1.0]])
    y = [0, 0, 0, 1, 1]
    Xs, ys = smote(X, y, k_neighbors=1, seed=3)
    assert len(Xs) == 6 and ys[-1] == 1
    t = Xs[-1]
    assert t[0] == t[1] and 0 <= t[0] <= 1


def test_smote_balanced_is_noop():
    X = np.arange(8.0).reshape(4, 2)
    Xs, ys = smote(X, [0, 1, 0, 1])
    assert np.array_equal(Xs, X) and ys.tolist() == [0, 1, 0, 1]


def test_smote_counts_and_originals_first():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(7, 3))
    y = [0] * 5 + [1] * 2
    Xs, ys = smote(X, y, seed=1)
    assert Counter(ys.tolist()) == {0: 5, 1: 5}
    assert np.array_equal(Xs[:7], X)


def test_smote_rejects_singleton_class():
    with pytest.raises(DataError, match="class 1"):
        smote(np.zeros((3, 2)), [0, 0, 1])


def test_smote_deterministic():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(30, 4))
    y = [0] * 20 + [1] * 6 + [2] * 4
    a = smote(X, y, seed=5)
    b = smote(X, y, seed=5)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_smote_origin_lies_among_k_nearest():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(40, 3))
    y = np.array([0] * 25 + [1] * 10 + [2] * 5)
    Xs, ys, origin = smote(X, y, k_neighbors=3, seed=2, return_origin=True)
    for row, (i, j, u) in zip(Xs[len(X):], origin):
        i, j = int(i), int(j)
        assert y[i] == y[j] and i != j
        same = np.flatnonzero(y == y[i])
        d = ((X[same] - X[i]) ** 2).sum(axis=1)
        rank = sorted((dd, s) for dd, s in zip(d, same) if s != i)
        assert j in [s for _, s in rank[:3]]
        assert np.allclose(row, X[i] + u * (X[j] - X[i]), atol=1e-12)
