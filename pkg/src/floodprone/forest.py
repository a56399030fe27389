"""Class-weighted CART trees and random forest with per-node cover.

Trees are stored as flat node arrays (preorder ids, root = 0). Class weights
act as per-sample weights, so they shape both the bootstrap sample weights and
the Gini criterion.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import _kernels
from .model import FEATURES, DataError

FORMAT_VERSION = 1
MIN_GAIN = 1e-12


class SerializationError(DataError):
    pass


def weighted_gini(class_weighted_counts: Mapping[int, float]) -> float:
    """1 - sum_c p_c^2 over already-weighted class totals."""
    values = [float(v) for v in class_weighted_counts.values()]
    total = math.fsum(values)
    if not total > 0:
        raise DataError("weighted_gini needs a positive total weight")
    return 1.0 - math.fsum((v / total) ** 2 for v in values)


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 200
    max_depth: int = 12
    min_samples_leaf: int = 2
    features_per_split: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise DataError("n_trees must be >= 1")
        if self.max_depth < 0:
            raise DataError("max_depth must be >= 0")
        if self.min_samples_leaf < 1:
            raise DataError("min_samples_leaf must be >= 1")
        if not 1 <= self.features_per_split <= len(FEATURES):
            raise DataError(f"features_per_split must be within [1, {len(FEATURES)}]")


@dataclass(frozen=True, eq=False)
class Tree:
    feature: np.ndarray  # -1 marks a leaf
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    cover: np.ndarray
    value: np.ndarray  # (n_nodes, L); leaf distributions, zeros at internal nodes

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_classes(self) -> int:
        return self.value.shape[1]

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] < 0

    def depth(self) -> int:
        best, stack = 0, [(0, 0)]
        while stack:
            node, d = stack.pop()
            best = max(best, d)
            if self.feature[node] >= 0:
                stack += [(self.left[node], d + 1), (self.right[node], d + 1)]
        return best

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf id reached by each row (``x[f] <= threshold`` goes left)."""
        node = np.zeros(len(X), dtype=np.intp)
        rows = np.arange(len(X))
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                return node
            go_left = X[rows, np.where(inner, f, 0)] <= self.threshold[node]
            node = np.where(inner, np.where(go_left, self.left[node], self.right[node]), node)

    @classmethod
    def from_nodes(cls, nodes: list[dict], n_classes: int) -> Tree:
        n = len(nodes)
        value = np.zeros((n, n_classes))
        for i, nd in enumerate(nodes):
            if nd["feature"] < 0:
                value[i] = nd["value"]
        return cls(
            feature=np.array([nd["feature"] for nd in nodes], dtype=np.intp),
            threshold=np.array([nd["threshold"] for nd in nodes], dtype=float),
            left=np.array([nd["left"] for nd in nodes], dtype=np.intp),
            right=np.array([nd["right"] for nd in nodes], dtype=np.intp),
            cover=np.array([nd["cover"] for nd in nodes], dtype=float),
            value=value,
        )


def _seq_sum(values) -> float:
    total = 0.0
    for v in values:
        total += v
    return total


def train_tree(features, labels, sample_weights, params: ForestParams, tree_seed=0,
               n_classes: int | None = None, unit_weight: float | None = None,
               rng: np.random.Generator | None = None) -> Tree:
    """Grow one greedy weighted-Gini CART tree.

    At each node ``features_per_split`` features are drawn without replacement;
    thresholds are midpoints between consecutive distinct values; ties go to
    the lower feature index, then the lower threshold. A child must carry at
    least ``min_samples_leaf * unit_weight`` weight (``unit_weight`` defaults to
    the smallest positive sample weight). Samples with zero weight are ignored.
    """
    X = np.ascontiguousarray(features, dtype=float)
    y = np.asarray(labels, dtype=np.intp)
    w = np.asarray(sample_weights, dtype=float)
    if X.ndim != 2 or len(X) != len(y) or len(y) != len(w):
        raise DataError("features, labels and weights must align")
    keep = np.flatnonzero(w > 0)
    if len(keep) == 0:
        raise DataError("train_tree needs at least one positively weighted sample")
    L = int(n_classes if n_classes is not None else y.max() + 1)
    if y.min() < 0 or y.max() >= L:
        raise DataError(f"labels must lie in [0, {L})")
    d = X.shape[1]
    fps = min(params.features_per_split, d)
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence([tree_seed]))
    if unit_weight is None:
        unit_weight = float(w[keep].min())
    min_leaf = params.min_samples_leaf * unit_weight
    nodes: list[dict] = []

    def grow(idx: np.ndarray, depth: int) -> int:
        node_id = len(nodes)
        nd = {"feature": -1, "threshold": 0.0, "left": -1, "right": -1, "cover": 0.0}
        nodes.append(nd)
        yi, wi = y[idx], w[idx]
        totals = np.bincount(yi, weights=wi, minlength=L).astype(float)
        wtot = _seq_sum(totals.tolist())
        split = None
        if depth < params.max_depth and np.count_nonzero(totals) > 1 and wtot >= 2 * min_leaf:
            split = _best(idx, totals, wtot, min_leaf)
        if split is None:
            nd["cover"] = wtot
            nd["value"] = totals / wtot
            return node_id
        f, thr = split
        go_left = X[idx, f] <= thr
        nd["feature"], nd["threshold"] = f, thr
        nd["left"] = grow(idx[go_left], depth + 1)
        nd["right"] = grow(idx[~go_left], depth + 1)
        nd["cover"] = nodes[nd["left"]]["cover"] + nodes[nd["right"]]["cover"]
        return node_id

    def _best(idx, totals, wtot, min_leaf):
        cands = np.sort(rng.choice(d, size=fps, replace=False))
        best, best_f, best_pos, best_xs = -np.inf, -1, -1, None
        for f in cands:
            col = X[idx, f]
            order = np.argsort(col, kind="stable")
            xs = np.ascontiguousarray(col[order])
            proxy, pos = _kernels.best_split(
                xs, np.ascontiguousarray(y[idx][order]), np.ascontiguousarray(w[idx][order]),
                totals, wtot, min_leaf,
            )
            if pos >= 0 and proxy > best:
                best, best_f, best_pos, best_xs = proxy, int(f), pos, xs
        if best_f < 0:
            return None
        parent = _seq_sum((totals * totals).tolist())
        gain = (best - parent / wtot) / wtot
        if not gain > MIN_GAIN:
            return None
        lo, hi = best_xs[best_pos], best_xs[best_pos + 1]
        thr = lo + (hi - lo) / 2.0
        if not lo <= thr < hi:
            thr = lo
        return best_f, float(thr)

    grow(keep, 0)
    return Tree.from_nodes(nodes, L)


def normalize_class_weights(class_weights: Mapping[int, float]) -> dict[int, float]:
    """Scale so the largest weight is 1, rounded to 12 significant digits.

    The rounding absorbs last-bit differences from the caller's scaling, so
    ``w`` and ``c * w`` train identical forests.
    """
    if not class_weights:
        return {}
    top = max(class_weights.values())
    if not top > 0 or min(class_weights.values()) <= 0:
        raise DataError("class weights must be > 0")
    return {int(c): float(f"{v / top:.12g}") for c, v in sorted(class_weights.items())}


@dataclass(frozen=True, eq=False)
class Forest:
    trees: tuple[Tree, ...]
    params: ForestParams
    level_count: int
    class_weights: dict[int, float]
    feature_names: tuple[str, ...] = FEATURES
    format_version: int = FORMAT_VERSION
    meta: dict = field(default_factory=dict)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)


def _tree_seed(seed: int, t: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, t])


def train_forest(features, labels, class_weights: Mapping[int, float] | None = None,
                 params: ForestParams = ForestParams(), level_count: int | None = None,
                 feature_names: Sequence[str] = FEATURES, threads: int = 1) -> Forest:
    """Bagged ensemble of :func:`train_tree`; tree t uses seed ``(params.seed, t)``."""
    X = np.ascontiguousarray(features, dtype=float)
    y = np.asarray(labels, dtype=np.intp)
    if len(y) == 0:
        raise DataError("train_forest needs at least one sample")
    if X.shape[1] != len(feature_names):
        raise DataError(f"expected {len(feature_names)} feature columns, got {X.shape[1]}")
    if not np.isfinite(X).all():
        raise DataError("training features must be finite")
    L = int(level_count if level_count is not None else y.max() + 1)
    present = sorted(set(y.tolist()))
    if class_weights is None:
        class_weights = {c: 1.0 for c in present}
    missing = [c for c in present if c not in class_weights]
    if missing:
        raise DataError(f"no class weight for label {missing[0]}")
    cw = normalize_class_weights({c: class_weights[c] for c in present})
    per_sample = np.array([cw[c] for c in y.tolist()])
    unit = min(cw.values())
    n = len(y)

    def grow(t: int) -> Tree:
        rng = np.random.default_rng(_tree_seed(params.seed, t))
        counts = np.bincount(rng.integers(n, size=n), minlength=n)
        return train_tree(X, y, counts * per_sample, params, n_classes=L,
                          unit_weight=unit, rng=rng)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            trees = tuple(pool.map(grow, range(params.n_trees)))
    else:
        trees = tuple(grow(t) for t in range(params.n_trees))
    return Forest(trees, params, L, cw, tuple(feature_names))


def _as_matrix(x, n_features: int) -> tuple[np.ndarray, bool]:
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != n_features:
        raise DataError(f"expected {n_features} features, got {X.shape[1]}")
    if not np.isfinite(X).all():
        raise DataError("prediction input must be finite")
    return X, single


def predict_proba(forest: Forest, x) -> np.ndarray:
    """Mean of leaf distributions over trees, for one vector or a row matrix."""
    X, single = _as_matrix(x, forest.n_features)
    acc = np.zeros((len(X), forest.level_count))
    for tree in forest.trees:
        acc += tree.value[tree.apply(X)]
    out = acc / len(forest.trees)
    return out[0] if single else out


def predict_level(forest: Forest, x):
    """Argmax of :func:`predict_proba`; ties go to the lower ordinal."""
    p = predict_proba(forest, x)
    if p.ndim == 1:
        return int(np.argmax(p))
    return np.argmax(p, axis=1)


# serialization


def _node_record(tree: Tree, i: int) -> dict:
    if tree.feature[i] < 0:
        return {"cover": float(tree.cover[i]), "distribution": tree.value[i].tolist()}
    return {
        "cover": float(tree.cover[i]),
        "feature": int(tree.feature[i]),
        "threshold": float(tree.threshold[i]),
        "left": _node_record(tree, int(tree.left[i])),
        "right": _node_record(tree, int(tree.right[i])),
    }


def forest_record(forest: Forest) -> dict:
    return {
        "format_version": forest.format_version,
        "feature_names": list(forest.feature_names),
        "level_count": forest.level_count,
        "class_weights": [[c, w] for c, w in sorted(forest.class_weights.items())],
        "params": asdict(forest.params),
        "meta": forest.meta,
        "trees": [_node_record(t, 0) for t in forest.trees],
    }


def canonical_json(obj) -> bytes:
    return (json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False) + "\n").encode()


def serialize(forest: Forest) -> bytes:
    return canonical_json(forest_record(forest))


def _req(obj, key, kind, where):
    if not isinstance(obj, dict) or key not in obj:
        raise SerializationError(f"missing field {where}.{key}".lstrip("."))
    value = obj[key]
    ok = isinstance(value, kind) and not (kind in (int, (int, float)) and isinstance(value, bool))
    if not ok:
        raise SerializationError(f"field {where}.{key} has the wrong type".replace(" .", " "))
    return value


def _read_tree(rec, L: int, d: int, where: str) -> Tree:
    nodes: list[dict] = []
    stack = [(rec, where, None, None)]
    while stack:
        nd, path, parent, side = stack.pop()
        i = len(nodes)
        if parent is not None:
            nodes[parent][side] = i
        cover = float(_req(nd, "cover", (int, float), path))
        if "distribution" in nd:
            dist = _req(nd, "distribution", list, path)
            if len(dist) != L or not all(isinstance(v, (int, float)) for v in dist):
                raise SerializationError(f"field {path}.distribution must hold {L} numbers")
            nodes.append({"feature": -1, "threshold": 0.0, "left": -1, "right": -1,
                          "cover": cover, "value": [float(v) for v in dist]})
            continue
        f = _req(nd, "feature", int, path)
        if not 0 <= f < d:
            raise SerializationError(f"field {path}.feature out of range: {f}")
        thr = float(_req(nd, "threshold", (int, float), path))
        left = _req(nd, "left", dict, path)
        right = _req(nd, "right", dict, path)
        nodes.append({"feature": f, "threshold": thr, "left": -1, "right": -1, "cover": cover})
        # preorder: left subtree first
        stack.append((right, path + ".right", i, "right"))
        stack.append((left, path + ".left", i, "left"))
    return Tree.from_nodes(nodes, L)


def deserialize(payload: bytes | str) -> Forest:
    try:
        doc = json.loads(payload)
    except (ValueError, UnicodeDecodeError) as exc:
        raise SerializationError(f"payload is not a valid model document ({exc})") from None
    version = _req(doc, "format_version", int, "")
    if version != FORMAT_VERSION:
        raise SerializationError(f"field format_version: unsupported version {version}")
    names = tuple(_req(doc, "feature_names", list, ""))
    L = _req(doc, "level_count", int, "")
    try:
        params = ForestParams(**_req(doc, "params", dict, ""))
    except TypeError as exc:
        raise SerializationError(f"field params: {exc}") from None
    weights = {}
    for pair in _req(doc, "class_weights", list, ""):
        if not (isinstance(pair, list) and len(pair) == 2):
            raise SerializationError("field class_weights must hold [class, weight] pairs")
        weights[int(pair[0])] = float(pair[1])
    meta = _req(doc, "meta", dict, "")
    trees = _req(doc, "trees", list, "")
    if not trees:
        raise SerializationError("field trees is empty")
    parsed = tuple(_read_tree(t, L, len(names), f"trees[{i}]") for i, t in enumerate(trees))
    return Forest(parsed, params, L, weights, names, version, meta)
