"""The shared regressor contract and the simple learners.

All learners take a 2-D feature array and a target vector; ``predict``
accepts either a 2-D array (returns an array) or a single feature vector
(returns a float).
"""
from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from . import kernels
from .errors import AllFeaturesConstant, DataError, InsufficientPoints, KTooLarge


def as_xy(X, y=None):
    X = np.ascontiguousarray(X, dtype=np.float64)  # reductions must not depend on memory layout
    if X.ndim != 2:
        raise DataError(f"feature matrix must be 2-D, got shape {X.shape}")
    if y is None:
        return X
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.shape[0] != X.shape[0]:
        raise DataError(f"{X.shape[0]} feature rows but {y.shape[0]} targets")
    if X.shape[0] == 0:
        raise DataError("no training records")
    return X, y


def default_names(n_features):
    return [f"x{j}" for j in range(n_features)]


class Regressor(ABC):
    """fit/predict contract shared by every learner and ensemble."""

    name = "regressor"

    def __init__(self):
        self.feature_names: Optional[list[str]] = None

    @abstractmethod
    def _fit(self, X, y):
        ...

    @abstractmethod
    def _predict(self, X) -> np.ndarray:
        ...

    def fit(self, X, y, feature_names: Optional[Sequence[str]] = None):
        X, y = as_xy(X, y)
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise DataError("training data contains non-finite values")
        self.feature_names = list(feature_names) if feature_names is not None else default_names(X.shape[1])
        self._fit(X, y)
        return self

    def fit_dataset(self, d):
        return self.fit(d.X, d.y, feature_names=d.features)

    def predict(self, X):
        arr = np.asarray(X, dtype=np.float64)
        if arr.ndim == 1:
            return float(self._predict(arr[None, :])[0])
        return self._predict(as_xy(arr))

    def describe(self) -> str:
        """Short configuration note for reports."""
        return ""


class MeanRegressor(Regressor):
    """Predicts the training-target mean everywhere."""

    name = "mean"

    def _fit(self, X, y):
        self.mean_ = float(np.mean(y))

    def _predict(self, X):
        return np.full(X.shape[0], self.mean_)


# -- simple linear regression -------------------------------------------------

@dataclass(frozen=True)
class SimpleLinearModel:
    feature: str
    feature_index: int
    slope: float
    intercept: float
    sse: float


def fit_simple_linear(X, y, feature_names=None) -> SimpleLinearModel:
    """OLS of ``y`` on each single feature; keep the one with least training SSE.

    Ties go to the earlier feature.
    """
    X, y = as_xy(X, y)
    names = list(feature_names) if feature_names is not None else default_names(X.shape[1])
    if X.shape[0] < 2:
        raise DataError("simple linear regression needs at least 2 records")
    ybar = np.mean(y)
    best = None
    for j in range(X.shape[1]):
        x = X[:, j]
        dx = x - np.mean(x)
        sxx = np.sum(dx * dx)
        if sxx == 0:
            continue
        slope = np.sum(dx * (y - ybar)) / sxx
        intercept = ybar - slope * np.mean(x)
        sse = float(np.sum((y - (intercept + slope * x)) ** 2))
        if best is None or sse < best.sse:
            best = SimpleLinearModel(names[j], j, float(slope), float(intercept), sse)
    if best is None:
        raise AllFeaturesConstant()
    return best


class SimpleLinearRegression(Regressor):
    name = "simple_linear"

    def _fit(self, X, y):
        self.model_ = fit_simple_linear(X, y, self.feature_names)

    def _predict(self, X):
        m = self.model_
        return m.intercept + m.slope * X[:, m.feature_index]

    def describe(self):
        m = self.model_
        return f"feature={m.feature}"


# -- decision stump -------------------------------------------------------------

@dataclass(frozen=True)
class StumpModel:
    split_feature: Optional[str]
    feature_index: int
    threshold: float
    left_value: float
    right_value: float

    @property
    def is_constant(self):
        return self.split_feature is None


def midpoint(lo, hi):
    """Midpoint of two consecutive sorted values, kept inside ``[lo, hi)``."""
    mid = 0.5 * (lo + hi)
    if not lo <= mid < hi:
        mid = lo
    return float(mid)


def find_best_split(X, y, min_leaf=1, sorted_idx=None):
    """Best variance-reduction split over all features.

    Returns ``(feature, threshold, gain, left_count)`` or None when no
    feature admits a split. ``gain`` is the drop in the sum of squared
    deviations. Ties go to the earlier feature, then the lower threshold.
    ``sorted_idx`` optionally supplies per-feature argsorts of ``X``.
    """
    yc = y - np.mean(y)
    best = None
    for j in range(X.shape[1]):
        order = np.argsort(X[:, j], kind="stable") if sorted_idx is None else sorted_idx[j]
        xs = np.ascontiguousarray(X[order, j])
        gain, pos = kernels.best_split(xs, np.ascontiguousarray(yc[order]), min_leaf)
        if pos < 0:
            continue
        if best is None or gain > best[2]:
            best = (j, midpoint(xs[pos - 1], xs[pos]), gain, pos)
    return best


def fit_stump(X, y, feature_names=None) -> StumpModel:
    """One-split tree maximising variance reduction over every (feature, midpoint).

    When every feature is constant the stump degrades to the global mean
    (``split_feature`` is None).
    """
    X, y = as_xy(X, y)
    names = list(feature_names) if feature_names is not None else default_names(X.shape[1])
    mean = float(np.mean(y))
    found = find_best_split(X, y, min_leaf=1) if X.shape[0] >= 2 else None
    if found is None:
        return StumpModel(None, -1, float("nan"), mean, mean)
    j, thr, _, _ = found
    left = X[:, j] <= thr
    return StumpModel(names[j], j, thr, float(np.mean(y[left])), float(np.mean(y[~left])))


class DecisionStump(Regressor):
    name = "stump"

    def _fit(self, X, y):
        self.model_ = fit_stump(X, y, self.feature_names)

    def _predict(self, X):
        m = self.model_
        if m.is_constant:
            return np.full(X.shape[0], m.left_value)
        return np.where(X[:, m.feature_index] <= m.threshold, m.left_value, m.right_value)

    def describe(self):
        m = self.model_
        if m.is_constant:
            return "constant (no valid split)"
        return f"{m.split_feature} <= {m.threshold:.6g}"


# -- k-nearest neighbours ---------------------------------------------------------

class KNNRegressor(Regressor):
    """Unweighted mean target of the ``k`` nearest training points.

    Features are z-scored with training statistics unless ``standardize``
    is False (raw analyte scales differ by three orders of magnitude).
    Distance ties go to the lower training index.
    """

    def __init__(self, k=1, standardize=True):
        super().__init__()
        if k < 1:
            raise DataError(f"k must be at least 1, got {k}")
        self.k = int(k)
        self.standardize = standardize

    @property
    def name(self):
        return f"knn{self.k}"

    def _fit(self, X, y):
        if self.k > X.shape[0]:
            raise KTooLarge(self.k, X.shape[0])
        if self.standardize:
            self.center_ = X.mean(axis=0)
            scale = X.std(axis=0)
            self.scale_ = np.where(scale > 0, scale, 1.0)
        else:
            self.center_ = np.zeros(X.shape[1])
            self.scale_ = np.ones(X.shape[1])
        self.train_ = np.ascontiguousarray(self.transform(X))
        self.y_ = y.copy()

    def transform(self, X):
        return (np.asarray(X, dtype=np.float64) - self.center_) / self.scale_

    def neighbors(self, X):
        """Indices of the ``k`` nearest training rows, nearest first."""
        Z = np.ascontiguousarray(self.transform(as_xy(np.atleast_2d(X))))
        return kernels.knn_query(self.train_, Z, self.k)

    def _predict(self, X):
        return self.y_[self.neighbors(X)].mean(axis=1)

    def describe(self):
        return f"k={self.k}, {'standardized' if self.standardize else 'raw'} euclidean"


# -- k-nearest separation score ----------------------------------------------------

def _mean_knn_distance(x, points, k, name):
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if pts.shape[0] < k:
        raise InsufficientPoints(name, pts.shape[0], k)
    d = np.sqrt(np.sum((pts - x) ** 2, axis=1))
    return float(np.mean(np.sort(d)[:k]))


def knsc(x, labeled: Mapping[str, np.ndarray], outliers, k: int) -> float:
    """Separation score of ``x`` between the outlier set and the nearest class.

    Compares the mean distance from ``x`` to its ``k`` nearest outliers with
    the smallest per-class mean distance to the ``k`` nearest class members:
    ``(d_class - d_out) / max(d_class, d_out)``. Positive values mean ``x``
    sits closer to the outliers than to any existing class. Returns 0 when
    both distances are 0.
    """
    if k < 1:
        raise DataError(f"k must be at least 1, got {k}")
    if not labeled:
        raise DataError("need at least one labeled class")
    x = np.asarray(x, dtype=np.float64).ravel()
    d_out = _mean_knn_distance(x, outliers, k, "outliers")
    d_min = min(_mean_knn_distance(x, pts, k, str(c)) for c, pts in labeled.items())
    denom = max(d_min, d_out)
    if denom == 0:
        return 0.0
    return (d_min - d_out) / denom
