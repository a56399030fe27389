"""Exact SHAP attributions for :class:`~floodprone.forest.Forest` models.

``tree_shap`` runs the polynomial path-dependent algorithm (cover fractions are
extended and unwound along each root-to-leaf path). ``shap_brute_force``
enumerates every coalition of the same cover-conditioned value function and
serves as the oracle for it.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .forest import Forest, Tree, _as_matrix
from .model import DataError, FEATURES

MAX_BRUTE_FORCE_FEATURES = 16


@dataclass(frozen=True, eq=False)
class ShapExplanation:
    base_value: np.ndarray  # (L,)
    phi: np.ndarray  # (L, d): phi[c, f]
    instance_id: str = ""

    def prediction(self) -> np.ndarray:
        return self.base_value + self.phi.sum(axis=1)


def tree_value(tree: Tree, x, coalition: Iterable[int]) -> np.ndarray:
    """Expected tree output when only features in ``coalition`` are known.

    Unknown features send the walk down both children, weighted by cover.
    """
    S = set(coalition)
    x = np.asarray(x, dtype=float)

    def walk(node: int) -> np.ndarray:
        f = tree.feature[node]
        if f < 0:
            return tree.value[node]
        left, right = tree.left[node], tree.right[node]
        if f in S:
            return walk(left if x[f] <= tree.threshold[node] else right)
        return (tree.cover[left] * walk(left) + tree.cover[right] * walk(right)) / tree.cover[node]

    return walk(0)


def expected_value(tree: Tree) -> np.ndarray:
    return tree_value(tree, np.zeros(0), ())


def _coalition_values(tree: Tree, x: np.ndarray, masks: np.ndarray) -> np.ndarray:
    """``tree_value`` for every coalition at once; masks is (2^d, d) boolean."""

    def walk(node: int) -> np.ndarray:
        f = tree.feature[node]
        if f < 0:
            return tree.value[node][None, :]
        left, right = tree.left[node], tree.right[node]
        vl, vr = walk(left), walk(right)
        hot = vl if x[f] <= tree.threshold[node] else vr
        marg = (tree.cover[left] * vl + tree.cover[right] * vr) / tree.cover[node]
        return np.where(masks[:, f, None], hot, marg)

    return np.broadcast_to(walk(0), (len(masks), tree.n_classes))


def shap_brute_force(model: Tree | Forest, x, instance_id: str = "") -> ShapExplanation:
    """Shapley values by enumerating all 2^d coalitions (d <= 16)."""
    trees = model.trees if isinstance(model, Forest) else (model,)
    x = np.asarray(x, dtype=float)
    d = len(x)
    if d > MAX_BRUTE_FORCE_FEATURES:
        raise DataError(f"brute-force Shapley is limited to {MAX_BRUTE_FORCE_FEATURES} features, got {d}")
    codes = np.arange(1 << d)
    masks = ((codes[:, None] >> np.arange(d)) & 1).astype(bool)
    v = sum(_coalition_values(t, x, masks) for t in trees) / len(trees)
    size = masks.sum(axis=1)
    weight = np.array([math.factorial(s) * math.factorial(d - s - 1) / math.factorial(d)
                       for s in range(d)])
    phi = np.zeros((v.shape[1], d))
    for f in range(d):
        without = codes[~masks[:, f]]
        phi[:, f] = (weight[size[without]][:, None] * (v[without | (1 << f)] - v[without])).sum(axis=0)
    return ShapExplanation(v[0].copy(), phi, instance_id)


def _shap_block(forest: Forest, X: np.ndarray, depths: Sequence[int]) -> np.ndarray:
    phi = np.zeros((len(X), forest.n_features, forest.level_count))
    for tree, depth in zip(forest.trees, depths):
        _kernels.tree_shap_rows(tree.left, tree.right, tree.feature, tree.threshold,
                                tree.cover, tree.value, X, phi, depth)
    return phi / len(forest.trees)


def forest_expected_value(forest: Forest) -> np.ndarray:
    acc = np.zeros(forest.level_count)
    for tree in forest.trees:
        acc += expected_value(tree)
    return acc / len(forest.trees)


def tree_shap(forest: Forest, x, instance_ids: Sequence[str] | None = None,
              threads: int = 1, block: int = 64):
    """Path-dependent TreeSHAP for one vector (returns one explanation) or a row matrix."""
    X, single = _as_matrix(x, forest.n_features)
    X = np.ascontiguousarray(X)
    depths = [t.depth() for t in forest.trees]
    chunks = [X[i:i + block] for i in range(0, len(X), block)]
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(lambda c: _shap_block(forest, c, depths), chunks))
    else:
        parts = [_shap_block(forest, c, depths) for c in chunks]
    phi = np.concatenate(parts) if parts else np.zeros((0, forest.n_features, forest.level_count))
    base = forest_expected_value(forest)
    ids = list(instance_ids) if instance_ids is not None else [str(i) for i in range(len(X))]
    out = [ShapExplanation(base.copy(), np.ascontiguousarray(p.T), i) for p, i in zip(phi, ids)]
    return out[0] if single else out


@dataclass(frozen=True)
class ShapSummary:
    feature_names: tuple[str, ...]
    per_class: tuple[tuple[float, ...], ...]  # [c][f] mean |phi|
    overall: tuple[float, ...]
    ranking: tuple[str, ...]

    def as_dict(self) -> dict:
        return {
            "overall": dict(zip(self.feature_names, self.overall)),
            "per_class": {str(c): dict(zip(self.feature_names, row)) for c, row in enumerate(self.per_class)},
            "ranking": list(self.ranking),
        }


def shap_summary(explanations: Sequence[ShapExplanation],
                 feature_names: Sequence[str] = FEATURES) -> ShapSummary:
    """Mean |phi| per class and overall, features ranked by the overall value."""
    if not explanations:
        raise DataError("shap_summary needs at least one explanation")
    A = np.abs(np.stack([e.phi for e in explanations]))  # (n, L, d)
    n, L, d = A.shape
    per_class = tuple(tuple(math.fsum(A[:, c, f]) / n for f in range(d)) for c in range(L))
    overall = tuple(math.fsum(A[:, :, f].ravel()) / (n * L) for f in range(d))
    names = tuple(feature_names)
    order = sorted(range(d), key=lambda f: (-overall[f], f))
    return ShapSummary(names, per_class, overall, tuple(names[f] for f in order))
