"""Pure numpy implementations of the hot loops.

Used when the compiled ``_kernels`` extension is unavailable. Results are
bit-identical to the compiled versions: sums are accumulated in the same
order and ties are resolved the same way.
"""
import numpy as np
from scipy.special import expit

_QUERY_CHUNK = 128


def best_split(xs, yc, min_leaf):
    """Return ``(gain, pos)`` for the best boundary in a sorted column.

    ``yc`` must be centred on the node mean and ordered like ``xs``.
    ``pos`` is the size of the left part, or -1 when no boundary
    satisfies the leaf-size constraint.
    """
    xs = np.asarray(xs, dtype=np.float64)
    yc = np.asarray(yc, dtype=np.float64)
    n = xs.shape[0]
    min_leaf = max(int(min_leaf), 1)
    if n < 2:
        return -np.inf, -1
    csum = np.cumsum(yc)
    total = csum[-1]
    parent = total * total / float(n)

    sl = csum[:-1]
    nl = np.arange(1, n, dtype=np.float64)
    nr = float(n) - nl
    sr = total - sl
    gain = sl * sl / nl + sr * sr / nr - parent

    valid = xs[:-1] < xs[1:]
    if min_leaf > 1:
        valid[: min_leaf - 1] = False
        valid[n - min_leaf:] = False
    if not valid.any():
        return -np.inf, -1
    gain = np.where(valid, gain, -np.inf)
    i = int(np.argmax(gain))
    return float(gain[i]), i + 1


def _sq_dist(train, queries):
    diff = queries[:, None, 0] - train[None, :, 0]
    dist = 0.0 + diff * diff
    for j in range(1, train.shape[1]):
        diff = queries[:, None, j] - train[None, :, j]
        dist = dist + diff * diff
    return dist


def knn_query(train, queries, k):
    """Indices of the ``k`` nearest training rows for every query row.

    Squared Euclidean distance; ties go to the lower training index.
    """
    train = np.ascontiguousarray(train, dtype=np.float64)
    queries = np.ascontiguousarray(queries, dtype=np.float64)
    n = train.shape[0]
    m = queries.shape[0]
    out = np.empty((m, k), dtype=np.int64)
    for start in range(0, m, _QUERY_CHUNK):
        stop = min(start + _QUERY_CHUNK, m)
        dist = _sq_dist(train, queries[start:stop])
        if k < n:
            kth = np.partition(dist, k - 1, axis=1)[:, k - 1: k]
        else:
            kth = dist.max(axis=1, keepdims=True)
        mask = dist <= kth
        counts = mask.sum(axis=1)

        simple = counts == k
        if simple.any():
            rows = np.flatnonzero(simple)
            cand = np.nonzero(mask[rows])[1].reshape(-1, k)
            cand_d = np.take_along_axis(dist[rows], cand, axis=1)
            order = np.argsort(cand_d, axis=1, kind="stable")
            out[start + rows] = np.take_along_axis(cand, order, axis=1)
        for r in np.flatnonzero(~simple):
            cand = np.flatnonzero(mask[r])
            order = np.argsort(dist[r, cand], kind="stable")
            out[start + r] = cand[order[:k]]
    return out


def mlp_loss_grad(X, y, W1, b1, w2, b2, gW1, gb1, gw2):
    """Mean squared error and its gradient for a one-hidden-layer sigmoid net.

    Gradients are written into ``gW1``, ``gb1``, ``gw2``; returns
    ``(loss, grad_b2)``. A diverging net yields a non-finite loss quietly;
    the trainer turns that into an error.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        return _mlp_loss_grad(X, y, W1, b1, w2, b2, gW1, gb1, gw2)


def _mlp_loss_grad(X, y, W1, b1, w2, b2, gW1, gb1, gw2):
    n = X.shape[0]
    a = X @ W1
    a += b1
    h = expit(a, out=a)
    r = h @ w2
    r += b2 - y
    loss = float(r @ r) / n
    d_out = r * (2.0 / n)
    gw2[:] = d_out @ h
    dh = h * (1.0 - h)
    dh *= d_out[:, None]
    dh *= w2
    gW1[:] = X.T @ dh
    gb1[:] = dh.sum(axis=0)
    return loss, float(d_out.sum())
