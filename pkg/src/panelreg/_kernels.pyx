# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the two inner loops (split scan, neighbour search).

Each function must return exactly what its counterpart in ``_kernels_py``
returns, bit for bit; the arithmetic below mirrors the numpy expressions.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def best_split(const double[::1] xs, const double[::1] yc, Py_ssize_t min_leaf):
    """Return ``(gain, pos)`` for the best boundary in a sorted column.

    ``yc`` must be centred on the node mean and ordered like ``xs``.
    ``pos`` is the size of the left part, or -1 when no boundary
    satisfies the leaf-size constraint.
    """
    cdef Py_ssize_t n = xs.shape[0]
    cdef Py_ssize_t i, best_pos = -1
    cdef double total = 0.0, sl = 0.0, sr, nl, nr, gain, parent
    cdef double best_gain = -np.inf

    for i in range(n):
        total += yc[i]
    parent = total * total / <double>n

    if min_leaf < 1:
        min_leaf = 1
    for i in range(1, n):
        sl += yc[i - 1]
        if i < min_leaf or n - i < min_leaf:
            continue
        if not (xs[i - 1] < xs[i]):
            continue
        nl = <double>i
        nr = <double>(n - i)
        sr = total - sl
        gain = sl * sl / nl + sr * sr / nr - parent
        if gain > best_gain:
            best_gain = gain
            best_pos = i
    return best_gain, best_pos


def knn_query(const double[:, ::1] train, const double[:, ::1] queries, Py_ssize_t k):
    """Indices of the ``k`` nearest training rows for every query row.

    Squared Euclidean distance; ties go to the lower training index.
    """
    cdef Py_ssize_t n = train.shape[0], d = train.shape[1], m = queries.shape[0]
    cdef Py_ssize_t q, i, j, pos, filled
    cdef double dist, diff
    out = np.empty((m, k), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] out_v = out
    cdef double[::1] best_d = np.empty(k, dtype=np.float64)
    cdef cnp.int64_t[::1] best_i = np.empty(k, dtype=np.int64)

    for q in range(m):
        filled = 0
        for i in range(n):
            dist = 0.0
            for j in range(d):
                diff = queries[q, j] - train[i, j]
                dist = dist + diff * diff
            if filled == k and not (dist < best_d[k - 1]):
                continue
            pos = filled if filled < k else k - 1
            # shift strictly larger entries right; equal ones keep precedence
            while pos > 0 and best_d[pos - 1] > dist:
                if pos < k:
                    best_d[pos] = best_d[pos - 1]
                    best_i[pos] = best_i[pos - 1]
                pos -= 1
            best_d[pos] = dist
            best_i[pos] = i
            if filled < k:
                filled += 1
        for j in range(k):
            out_v[q, j] = best_i[j]
    return out


cdef extern from "math.h":
    double exp(double x) nogil


def mlp_loss_grad(const double[:, ::1] X, const double[::1] y,
                  const double[:, ::1] W1, const double[::1] b1,
                  const double[::1] w2, double b2,
                  double[:, ::1] gW1, double[::1] gb1, double[::1] gw2):
    """Mean squared error and its gradient for a one-hidden-layer sigmoid net.

    Gradients are written into ``gW1``, ``gb1``, ``gw2``; returns
    ``(loss, grad_b2)``. Agrees with the numpy version to rounding.
    """
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1], H = W1.shape[1]
    cdef Py_ssize_t i, j, h
    cdef double a, out, r, dh, s, total = 0.0, gb2 = 0.0, scale
    cdef double[::1] hid = np.empty(H, dtype=np.float64)

    gW1[:, :] = 0.0
    gb1[:] = 0.0
    gw2[:] = 0.0
    for i in range(n):
        out = b2
        for h in range(H):
            a = b1[h]
            for j in range(d):
                a = a + X[i, j] * W1[j, h]
            s = 1.0 / (1.0 + exp(-a))
            hid[h] = s
            out = out + s * w2[h]
        r = out - y[i]
        total = total + r * r
        gb2 = gb2 + r
        for h in range(H):
            s = hid[h]
            gw2[h] += r * s
            dh = r * w2[h] * s * (1.0 - s)
            gb1[h] += dh
            for j in range(d):
                gW1[j, h] += dh * X[i, j]
    scale = 2.0 / <double>n
    for h in range(H):
        gw2[h] *= scale
        gb1[h] *= scale
        for j in range(d):
            gW1[j, h] *= scale
    return total / <double>n, gb2 * scale
