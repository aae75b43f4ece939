"""Bagging and the weighted majority-vote (MaVL) combiner."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import BagFitError, DataError, EmptyMemberSet, PanelError, PredictionOutOfBins
from .learners import Regressor


def bootstrap_indices(n: int, n_bags: int, seed: int) -> list[np.ndarray]:
    """``n_bags`` resamples of ``range(n)``, each of size ``n``, drawn uniformly with replacement."""
    rng = np.random.default_rng(seed)
    return [rng.integers(0, n, size=n) for _ in range(n_bags)]


class BaggingRegressor(Regressor):
    """Average of ``n_bags`` base learners, each fitted on a bootstrap resample.

    ``base_factory(seed)`` returns an unfitted learner; bag ``b`` gets
    ``seed + b``. ``resamples`` overrides the drawn index lists (one per bag),
    e.g. ``[np.arange(n)]`` to reproduce the base learner exactly.
    """

    name = "bagging"

    def __init__(self, base_factory: Callable[[int], Regressor], n_bags=10, seed=0,
                 resamples: Optional[Sequence[np.ndarray]] = None):
        super().__init__()
        if n_bags < 1:
            raise DataError(f"need at least one bag, got {n_bags}")
        self.base_factory = base_factory
        self.n_bags = n_bags if resamples is None else len(resamples)
        self.seed = seed
        self.resamples = resamples

    def _fit(self, X, y):
        n = X.shape[0]
        if self.resamples is None:
            self.indices_ = bootstrap_indices(n, self.n_bags, self.seed)
        else:
            self.indices_ = [np.asarray(ix, dtype=np.int64) for ix in self.resamples]
        self.models_ = []
        for b, ix in enumerate(self.indices_):
            model = self.base_factory(self.seed + b)
            try:
                model.fit(X[ix], y[ix], feature_names=self.feature_names)
            except PanelError as exc:
                raise BagFitError(b, exc) from exc
            self.models_.append(model)

    def _predict(self, X):
        return np.mean([m.predict(X) for m in self.models_], axis=0)

    def describe(self):
        base = self.models_[0].name if getattr(self, "models_", None) else "?"
        return f"B={self.n_bags}, base={base}"


# -- majority vote -------------------------------------------------------------------

def normalize_weights(weights, m):
    if m < 1:
        raise EmptyMemberSet()
    if weights is None:
        return np.full(m, 1.0 / m)
    w = np.asarray(weights, dtype=np.float64).ravel()
    if w.size != m:
        raise DataError(f"{m} members but {w.size} weights")
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise DataError("member weights must be finite and positive")
    return w / w.sum()


def mavl_vote(labels: Sequence, weights=None):
    """Class with the largest weighted vote, ``argmax_c sum_j w_j [label_j == c]``.

    Votes are summed exactly (as fractions), so ties are genuine ties; a
    tie goes to the smallest label.
    """
    labels = list(labels)
    if not labels:
        raise EmptyMemberSet()
    if weights is None:
        weights = [1.0] * len(labels)
    weights = list(weights)
    if len(weights) != len(labels):
        raise DataError(f"{len(labels)} votes but {len(weights)} weights")
    tally = {}
    for lab, w in zip(labels, weights):
        if not (np.isfinite(w) and w > 0):
            raise DataError("member weights must be finite and positive")
        tally[lab] = tally.get(lab, Fraction(0)) + Fraction(float(w))
    top = max(tally.values())
    return min(lab for lab, v in tally.items() if v == top)


def mavl_regress(predictions, weights=None):
    """Weighted mean of member predictions (weights normalized to sum 1).

    ``predictions`` is ``(members,)`` or ``(members, samples)``.
    """
    p = np.asarray(predictions, dtype=np.float64)
    if p.size == 0 or p.shape[0] == 0:
        raise EmptyMemberSet()
    w = normalize_weights(weights, p.shape[0])
    if not np.all(np.isfinite(p)):
        raise DataError("member predictions must be finite")
    if np.all(w == w[0]):
        out = np.mean(p, axis=0)
    else:
        out = np.tensordot(w, p, axes=1)
    # rounding must not push the mean outside the members' span
    out = np.clip(out, p.min(axis=0), p.max(axis=0))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class BinScheme:
    """Half-open bins ``[e_i, e_{i+1})``; the last bin also includes its upper edge."""

    edges: tuple

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=np.float64)
        if e.ndim != 1 or e.size < 2:
            raise DataError("a bin scheme needs at least two edges")
        if not np.all(np.isfinite(e)) or np.any(np.diff(e) <= 0):
            raise DataError("bin edges must be finite and strictly increasing")
        object.__setattr__(self, "edges", tuple(float(v) for v in e))

    @classmethod
    def from_quantiles(cls, values, n_bins=10):
        q = np.quantile(np.asarray(values, dtype=np.float64), np.linspace(0, 1, n_bins + 1))
        edges = np.unique(q)
        if edges.size < 2:
            v = float(edges[0])
            edges = np.array([v - 0.5, v + 0.5])
        return cls(tuple(edges))

    @property
    def n_bins(self):
        return len(self.edges) - 1

    def midpoints(self):
        e = np.asarray(self.edges)
        return 0.5 * (e[:-1] + e[1:])

    def assign(self, values):
        v = np.asarray(values, dtype=np.float64)
        lo, hi = self.edges[0], self.edges[-1]
        bad = ~((v >= lo) & (v <= hi))
        if np.any(bad):
            raise PredictionOutOfBins(float(np.ravel(v)[np.argmax(np.ravel(bad))]), lo, hi)
        idx = np.searchsorted(self.edges, v, side="right") - 1
        return np.minimum(idx, self.n_bins - 1)


def mavl_discrete_pipeline(predictions, bins: BinScheme, weights=None):
    """Bin each member's prediction, take the weighted vote, return the winning bin's midpoint.

    ``predictions`` is ``(members,)`` or ``(members, samples)``; ties go to
    the lower bin.
    """
    p = np.asarray(predictions, dtype=np.float64)
    if p.size == 0 or p.shape[0] == 0:
        raise EmptyMemberSet()
    w = normalize_weights(weights, p.shape[0])
    labels = bins.assign(p)
    mids = bins.midpoints()
    if p.ndim == 1:
        return float(mids[mavl_vote(labels.tolist(), w.tolist())])
    if np.all(w == w[0]):
        # equal weights: integer vote counts give exact ties
        tally = np.zeros((p.shape[1], bins.n_bins), dtype=np.int64)
        for row in labels:
            tally[np.arange(p.shape[1]), row] += 1
        return mids[np.argmax(tally, axis=1)]
    return np.array([mids[mavl_vote(labels[:, i].tolist(), w.tolist())] for i in range(p.shape[1])])


class MaVLRegressor(Regressor):
    """Combine fitted members by weighted mean (``mode="average"``) or by
    weighted vote over quantile bins of the training target (``mode="vote"``).

    In vote mode member predictions are clipped into the bin range first.
    """

    name = "mavl"

    def __init__(self, members: Sequence[Regressor], weights=None, mode="average", n_bins=10):
        super().__init__()
        if not members:
            raise EmptyMemberSet()
        if mode not in ("average", "vote"):
            raise DataError(f"unknown MaVL mode {mode!r}")
        self.members = list(members)
        self.weights = normalize_weights(weights, len(self.members))
        self.mode = mode
        self.n_bins = n_bins

    def _fit(self, X, y):
        for m in self.members:
            m.fit(X, y, feature_names=self.feature_names)
        if self.mode == "vote":
            self.bins_ = BinScheme.from_quantiles(y, self.n_bins)

    def combine(self, member_predictions):
        p = np.asarray(member_predictions, dtype=np.float64)
        if self.mode == "average":
            return mavl_regress(p, self.weights)
        p = np.clip(p, self.bins_.edges[0], self.bins_.edges[-1])
        return mavl_discrete_pipeline(p, self.bins_, self.weights)

    def _predict(self, X):
        return self.combine([m.predict(X) for m in self.members])

    def describe(self):
        names = ",".join(m.name for m in self.members)
        eq = "equal" if np.all(self.weights == self.weights[0]) else \
            "/".join(f"{w:.3g}" for w in self.weights)
        s = f"mode={self.mode}, members={names}, weights={eq}"
        if self.mode == "vote":
            s += f", bins={self.n_bins}"
        return s
