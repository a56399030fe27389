# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled split-scan and path-dependent TreeSHAP kernels.

Arithmetic order mirrors ``_pykernels`` exactly so both backends grow
bit-identical trees.
"""

from libc.stdlib cimport malloc, free, calloc

import numpy as np

cdef double NEG_INF = -float("inf")


def best_split(const double[::1] xs, const Py_ssize_t[::1] ys, const double[::1] ws,
               const double[::1] totals, double wtot, double min_leaf):
    """Best boundary in feature-sorted samples: returns (proxy, position).

    ``proxy = sum_c L_c^2 / W_L + sum_c R_c^2 / W_R``; position ``i`` splits
    between ``xs[i]`` and ``xs[i + 1]``. Returns ``(-inf, -1)`` if no boundary
    is admissible.
    """
    cdef Py_ssize_t n = xs.shape[0], L = totals.shape[0]
    cdef Py_ssize_t i, c, pos = -1
    cdef double wl = 0.0, wr, sl, sr, r, p, best = NEG_INF
    cdef double *left = <double *> calloc(L if L > 0 else 1, sizeof(double))
    if left == NULL:
        raise MemoryError()
    with nogil:
        for i in range(n - 1):
            left[ys[i]] += ws[i]
            wl += ws[i]
            if xs[i] < xs[i + 1]:
                wr = wtot - wl
                if wl >= min_leaf and wr >= min_leaf:
                    sl = 0.0
                    sr = 0.0
                    for c in range(L):
                        sl += left[c] * left[c]
                        r = totals[c] - left[c]
                        sr += r * r
                    p = sl / wl + sr / wr
                    if p > best:
                        best = p
                        pos = i
    free(left)
    return best, pos


cdef struct Path:
    int *feat
    double *zero
    double *one
    double *w


cdef inline void extend(Path p, Py_ssize_t base, int depth, double zf, double of, int fi) noexcept nogil:
    cdef int i
    p.feat[base + depth] = fi
    p.zero[base + depth] = zf
    p.one[base + depth] = of
    p.w[base + depth] = 1.0 if depth == 0 else 0.0
    for i in range(depth - 1, -1, -1):
        p.w[base + i + 1] += of * p.w[base + i] * (i + 1) / <double> (depth + 1)
        p.w[base + i] = zf * p.w[base + i] * (depth - i) / <double> (depth + 1)


cdef inline void unwind(Path p, Py_ssize_t base, int depth, int idx) noexcept nogil:
    cdef double of = p.one[base + idx], zf = p.zero[base + idx]
    cdef double nxt = p.w[base + depth], tmp
    cdef int i
    for i in range(depth - 1, -1, -1):
        if of != 0:
            tmp = p.w[base + i]
            p.w[base + i] = nxt * (depth + 1) / ((i + 1) * of)
            nxt = tmp - p.w[base + i] * zf * (depth - i) / <double> (depth + 1)
        else:
            p.w[base + i] = (p.w[base + i] * (depth + 1)) / (zf * (depth - i))
    for i in range(idx, depth):
        p.feat[base + i] = p.feat[base + i + 1]
        p.zero[base + i] = p.zero[base + i + 1]
        p.one[base + i] = p.one[base + i + 1]


cdef inline double unwound_sum(Path p, Py_ssize_t base, int depth, int idx) noexcept nogil:
    cdef double of = p.one[base + idx], zf = p.zero[base + idx]
    cdef double nxt = p.w[base + depth], tmp, total = 0.0
    cdef int i
    if of != 0:
        for i in range(depth - 1, -1, -1):
            tmp = nxt / ((i + 1) * of)
            total += tmp
            nxt = p.w[base + i] - tmp * zf * (depth - i)
    else:
        for i in range(depth - 1, -1, -1):
            total += p.w[base + i] / (zf * (depth - i))
    return total * (depth + 1)


cdef void recurse(const Py_ssize_t[::1] left, const Py_ssize_t[::1] right,
                  const Py_ssize_t[::1] feature, const double[::1] threshold,
                  const double[::1] cover, const double[:, ::1] values,
                  const double[::1] x, double[:, ::1] phi, Path p,
                  Py_ssize_t parent_base, Py_ssize_t node, int depth,
                  double pz, double po, int pf) noexcept nogil:
    cdef Py_ssize_t base = parent_base + depth
    cdef Py_ssize_t i, j, hot, cold, L = values.shape[1]
    cdef int k, f
    cdef double w, scale, iz = 1.0, io = 1.0
    for k in range(depth):
        p.feat[base + k] = p.feat[parent_base + k]
        p.zero[base + k] = p.zero[parent_base + k]
        p.one[base + k] = p.one[parent_base + k]
        p.w[base + k] = p.w[parent_base + k]
    extend(p, base, depth, pz, po, pf)

    if feature[node] < 0:
        for k in range(1, depth + 1):
            w = unwound_sum(p, base, depth, k)
            scale = w * (p.one[base + k] - p.zero[base + k])
            f = p.feat[base + k]
            for j in range(L):
                phi[f, j] += scale * values[node, j]
        return

    f = <int> feature[node]
    if x[f] <= threshold[node]:
        hot, cold = left[node], right[node]
    else:
        hot, cold = right[node], left[node]
    for k in range(depth + 1):
        if p.feat[base + k] == f:
            break
    if k <= depth and p.feat[base + k] == f:
        iz = p.zero[base + k]
        io = p.one[base + k]
        unwind(p, base, depth, k)
        depth -= 1
    recurse(left, right, feature, threshold, cover, values, x, phi, p, base, hot,
            depth + 1, iz * cover[hot] / cover[node], io, f)
    recurse(left, right, feature, threshold, cover, values, x, phi, p, base, cold,
            depth + 1, iz * cover[cold] / cover[node], 0.0, f)


def tree_shap_rows(const Py_ssize_t[::1] left, const Py_ssize_t[::1] right,
                   const Py_ssize_t[::1] feature, const double[::1] threshold,
                   const double[::1] cover, const double[:, ::1] values,
                   const double[:, ::1] X, double[:, :, ::1] phi, int max_depth):
    """Add one tree's SHAP values for every row of X into ``phi`` (n, d, L)."""
    cdef Py_ssize_t size = (max_depth + 2) * (max_depth + 3) // 2
    cdef Py_ssize_t r, n = X.shape[0]
    cdef Path p
    p.feat = <int *> malloc(size * sizeof(int))
    p.zero = <double *> malloc(size * sizeof(double))
    p.one = <double *> malloc(size * sizeof(double))
    p.w = <double *> malloc(size * sizeof(double))
    if p.feat == NULL or p.zero == NULL or p.one == NULL or p.w == NULL:
        free(p.feat); free(p.zero); free(p.one); free(p.w)
        raise MemoryError()
    with nogil:
        for r in range(n):
            recurse(left, right, feature, threshold, cover, values, X[r], phi[r], p,
                    0, 0, 0, 1.0, 1.0, -1)
    free(p.feat); free(p.zero); free(p.one); free(p.w)
