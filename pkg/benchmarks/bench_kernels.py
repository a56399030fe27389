"""Time the compiled and pure-Python kernels on the same inputs.

    python3 benchmarks/bench_kernels.py [--trees 50] [--rows 50] [--repeat 3]
"""

import argparse
import time

import numpy as np

from floodprone._kernels import _pykernels
from floodprone.forest import ForestParams, train_forest

try:
    from floodprone._kernels import _ckernels
except ImportError:
    _ckernels = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def split_case(rng, n=5000, L=4):
    xs = np.sort(rng.normal(size=n))
    ys = rng.integers(0, L, n).astype(np.intp)
    ws = rng.uniform(0.5, 2.0, n)
    totals = np.bincount(ys, weights=ws, minlength=L).astype(float)
    return xs, ys, ws, totals, float(ws.sum()), 2.0


def shap_case(forest, X, mod):
    def go():
        phi = np.zeros((len(X), forest.n_features, forest.level_count))
        for t in forest.trees:
            mod.tree_shap_rows(t.left, t.right, t.feature, t.threshold, t.cover, t.value, X, phi, t.depth())
        return phi
    return go


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--trees", type=int, default=50)
    ap.add_argument("--rows", type=int, default=50)
    ap.add_argument("--repeat", type=int, default=3)
    a = ap.parse_args()

    rng = np.random.default_rng(0)
    X = rng.normal(size=(3000, 10))
    y = np.searchsorted([-1.0, 0.0, 1.0], X[:, 0] - X[:, 1])
    forest = train_forest(X, y, None, ForestParams(n_trees=a.trees, seed=1), 4)
    rows = np.ascontiguousarray(X[: a.rows])
    args = split_case(rng)

    mods = [("python", _pykernels)] + ([("cython", _ckernels)] if _ckernels else [])
    print(f"{'kernel':<14}{'backend':<10}{'seconds':>10}")
    res = {}
    for name, mod in mods:
        res["best_split", name] = best_of(lambda: [mod.best_split(*args) for _ in range(20)], a.repeat)
        res["tree_shap", name] = best_of(shap_case(forest, rows, mod), a.repeat)
    for (kernel, name), t in res.items():
        print(f"{kernel:<14}{name:<10}{t:>10.4f}")
    if _ckernels:
        for kernel in ("best_split", "tree_shap"):
            print(f"{kernel} speedup: {res[kernel, 'python'] / res[kernel, 'cython']:.1f}x")
    else:
        print("compiled kernels not built; python only")


if __name__ == "__main__":
    main()
