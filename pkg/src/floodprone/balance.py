"""Class-imbalance remedies: balanced class weights and SMOTE oversampling."""

from __future__ import annotations

from collections import Counter
from typing import Sequence

import numpy as np

from .model import DataError

DEFAULT_K_NEIGHBORS = 5


def balanced_weights(labels: Sequence[int]) -> dict[int, float]:
    """weight(c) = N / (K * n_c)."""
    counts = Counter(int(v) for v in labels)
    if not counts:
        raise DataError("cannot weight an empty label list")
    n, k = sum(counts.values()), len(counts)
    return {c: n / (k * counts[c]) for c in sorted(counts)}


def _neighbours(P: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k nearest other rows of P, ties broken by lower index."""
    d2 = ((P[:, None, :] - P[None, :, :]) ** 2).sum(axis=2)
    np.fill_diagonal(d2, np.inf)
    order = np.argsort(d2, axis=1, kind="stable")
    return order[:, :k]


def smote(features, labels: Sequence[int], k_neighbors: int = DEFAULT_K_NEIGHBORS,
          seed: int = 0, return_origin: bool = False):
    """Upsample every non-majority class to the majority count.

    Each synthetic row is ``x + u * (nn - x)`` for a uniformly drawn member ``x``
    of its class, one of its ``min(k_neighbors, n_c - 1)`` nearest same-class
    neighbours ``nn`` and ``u ~ U[0, 1]``. Originals come first, unchanged.
    With ``return_origin`` a third array gives ``(x index, nn index, u)`` per
    synthetic row (indices into the input).
    """
    if k_neighbors < 1:
        raise DataError("k_neighbors must be >= 1")
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=np.intp)
    counts = Counter(y.tolist())
    if not counts:
        return (X, y, np.zeros((0, 3))) if return_origin else (X, y)
    target = max(counts.values())
    new_X, new_y, origin = [X], [y], []
    for c in sorted(counts):
        need = target - counts[c]
        if need == 0:
            continue
        if counts[c] < 2:
            raise DataError(f"class {c} has a single sample; SMOTE needs at least 2")
        members = np.flatnonzero(y == c)
        P = X[members]
        nn = _neighbours(P, min(k_neighbors, len(members) - 1))
        rng = np.random.default_rng(np.random.SeedSequence([seed, c]))
        base = rng.integers(len(members), size=need)
        pick = rng.integers(nn.shape[1], size=need)
        u = rng.random(need)
        other = nn[base, pick]
        new_X.append(P[base] + u[:, None] * (P[other] - P[base]))
        new_y.append(np.full(need, c, dtype=np.intp))
        origin.append(np.column_stack([members[base], members[other], u]))
    out = (np.vstack(new_X), np.concatenate(new_y))
    if return_origin:
        return out + (np.vstack(origin) if origin else np.zeros((0, 3)),)
    return out
