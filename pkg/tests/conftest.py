import numpy as np
import pytest

from floodprone.forest import Forest, ForestParams, Tree, train_forest
from floodprone.model import FEATURES


def random_tree(rng, n_features=10, n_classes=4, max_depth=4, p_split=0.8):
    """Random tree with consistent covers; features may repeat along a path."""
    nodes = []

    def grow(depth, cover):
        i = len(nodes)
        nd = {"feature": -1, "threshold": 0.0, "left": -1, "right": -1, "cover": cover}
        nodes.append(nd)
        if depth < max_depth and rng.random() < p_split:
            nd["feature"] = int(rng.integers(n_features))
            nd["threshold"] = float(rng.normal())
            frac = rng.uniform(0.05, 0.95)
            nd["left"] = grow(depth + 1, cover * frac)
            nd["right"] = grow(depth + 1, cover * (1 - frac))
            nd["cover"] = nodes[nd["left"]]["cover"] + nodes[nd["right"]]["cover"]
        else:
            v = rng.dirichlet(np.ones(n_classes))
            nd["value"] = v / v.sum()
        return i

    grow(0, float(rng.uniform(1, 100)))
    return Tree.from_nodes(nodes, n_classes)


def random_forest(rng, n_trees=None, n_features=10, n_classes=4, max_depth=4):
    n_trees = n_trees or int(rng.integers(1, 21))
    trees = tuple(random_tree(rng, n_features, n_classes, max_depth) for _ in range(n_trees))
    return Forest(trees, ForestParams(n_trees=n_trees), n_classes, {}, tuple(f"f{i}" for i in range(n_features)))


def stump(feature, threshold, left_value, right_value, left_cover=1.0, right_cover=1.0,
          n_features=10):
    nodes = [
        {"feature": feature, "threshold": threshold, "left": 1, "right": 2,
         "cover": left_cover + right_cover},
        {"feature": -1, "threshold": 0.0, "left": -1, "right": -1, "cover": left_cover,
         "value": list(left_value)},
        {"feature": -1, "threshold": 0.0, "left": -1, "right": -1, "cover": right_cover,
         "value": list(right_value)},
    ]
    tree = Tree.from_nodes(nodes, len(left_value))
    names = FEATURES if n_features == 10 else tuple(f"f{i}" for i in range(n_features))
    return Forest((tree,), ForestParams(n_trees=1), len(left_value), {}, names)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def trained():
    """A small trained forest on a planted two-feature signal."""
    r = np.random.default_rng(11)
    X = r.normal(size=(600, 10))
    s = X[:, 0] - X[:, 1] + 0.3 * r.normal(size=600)
    y = np.searchsorted(np.quantile(s, [0.25, 0.5, 0.75]), s)
    forest = train_forest(X, y, None, ForestParams(n_trees=30, max_depth=8, seed=5), level_count=4)
    return forest, X, y


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(test_acceptance.RESULTS[n])
