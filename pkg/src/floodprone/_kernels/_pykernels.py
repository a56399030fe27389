"""Pure-Python / numpy fallback for the compiled kernels.

Same signatures and the same floating-point operation order as ``_ckernels``.
"""

from __future__ import annotations

import numpy as np


def best_split(xs, ys, ws, totals, wtot, min_leaf):
    n, L = len(xs), len(totals)
    if n < 2:
        return -np.inf, -1
    head, ys, ws = xs[:-1], ys[:-1], ws[:-1]
    wl = np.cumsum(ws)
    wr = wtot - wl
    sl = np.zeros(n - 1)
    sr = np.zeros(n - 1)
    for c in range(L):
        lc = np.cumsum(np.where(ys == c, ws, 0.0))
        rc = totals[c] - lc
        sl = sl + lc * lc
        sr = sr + rc * rc
    valid = (head < xs[1:]) & (wl >= min_leaf) & (wr >= min_leaf)
    if not valid.any():
        return -np.inf, -1
    with np.errstate(divide="ignore", invalid="ignore"):
        proxy = np.where(valid, sl / wl + sr / wr, -np.inf)
    pos = int(np.argmax(proxy))
    return float(proxy[pos]), pos


def _extend(path, zf, of, fi):
    depth = len(path)
    path.append([fi, zf, of, 1.0 if depth == 0 else 0.0])
    for i in range(depth - 1, -1, -1):
        path[i + 1][3] += of * path[i][3] * (i + 1) / float(depth + 1)
        path[i][3] = zf * path[i][3] * (depth - i) / float(depth + 1)


def _unwind(path, idx):
    depth = len(path) - 1
    of, zf = path[idx][2], path[idx][1]
    nxt = path[depth][3]
    for i in range(depth - 1, -1, -1):
        if of != 0:
            tmp = path[i][3]
            path[i][3] = nxt * (depth + 1) / ((i + 1) * of)
            nxt = tmp - path[i][3] * zf * (depth - i) / float(depth + 1)
        else:
            path[i][3] = (path[i][3] * (depth + 1)) / (zf * (depth - i))
    for i in range(idx, depth):
        path[i][0:3] = path[i + 1][0:3]
    del path[depth]


def _unwound_sum(path, idx):
    depth = len(path) - 1
    of, zf = path[idx][2], path[idx][1]
    nxt = path[depth][3]
    total = 0.0
    if of != 0:
        for i in range(depth - 1, -1, -1):
            tmp = nxt / ((i + 1) * of)
            total += tmp
            nxt = path[i][3] - tmp * zf * (depth - i)
    else:
        for i in range(depth - 1, -1, -1):
            total += path[i][3] / (zf * (depth - i))
    return total * (depth + 1)


def tree_shap_rows(left, right, feature, threshold, cover, values, X, phi, max_depth):
    left, right, feature = left.tolist(), right.tolist(), feature.tolist()
    threshold, cover = threshold.tolist(), cover.tolist()
    vals = values.tolist()
    L = values.shape[1]

    for r in range(X.shape[0]):
        x = X[r].tolist()
        out = phi[r].tolist()

        def recurse(node, parent, pz, po, pf):
            path = [list(e) for e in parent]
            _extend(path, pz, po, pf)
            if feature[node] < 0:
                leaf = vals[node]
                for k in range(1, len(path)):
                    w = _unwound_sum(path, k)
                    scale = w * (path[k][2] - path[k][1])
                    row = out[path[k][0]]
                    for j in range(L):
                        row[j] += scale * leaf[j]
                return
            f = feature[node]
            if x[f] <= threshold[node]:
                hot, cold = left[node], right[node]
            else:
                hot, cold = right[node], left[node]
            iz = io = 1.0
            for k, e in enumerate(path):
                if e[0] == f:
                    iz, io = e[1], e[2]
                    _unwind(path, k)
                    break
            recurse(hot, path, iz * cover[hot] / cover[node], io, f)
            recurse(cold, path, iz * cover[cold] / cover[node], 0.0, f)

        recurse(0, [], 1.0, 1.0, -1)
        phi[r] = out
