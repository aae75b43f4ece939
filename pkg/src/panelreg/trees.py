"""Regression trees: REPTree-style (constant leaves, reduced-error pruning)
and M5-style model trees (linear leaves).

Both grow greedily by variance reduction over midpoint thresholds; a record
goes left when ``x[feature] <= threshold``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .errors import DatasetTooSmall, DataError
from .learners import Regressor, midpoint


@dataclass(frozen=True)
class TreeConfig:
    max_depth: Optional[int] = None
    min_leaf: int = 10
    prune: bool = True
    prune_fraction: float = 0.25
    seed: int = 0
    smoothing: bool = False
    smoothing_k: float = 15.0

    def __post_init__(self):
        if self.min_leaf < 1:
            raise DataError(f"min_leaf must be >= 1, got {self.min_leaf}")
        if not 0.0 < self.prune_fraction < 1.0:
            raise DataError(f"prune_fraction must be in (0, 1), got {self.prune_fraction}")
        if self.max_depth is not None and self.max_depth < 0:
            raise DataError(f"max_depth must be >= 0, got {self.max_depth}")


@dataclass(eq=False)
class Node:
    """Split node or leaf. Leaves predict ``value`` or, when ``coef`` is
    set, ``intercept + sum(coef * x)``."""

    n_samples: int
    variance: float
    value: float
    feature: int = -1
    threshold: float = float("nan")
    left: Optional["Node"] = None
    right: Optional["Node"] = None
    coef: Optional[np.ndarray] = None
    intercept: float = 0.0
    fallback: bool = False

    @property
    def is_leaf(self):
        return self.left is None

    def leaf_predict(self, X):
        if self.coef is None:
            return np.full(X.shape[0], self.value)
        out = np.full(X.shape[0], self.intercept)
        for j, c in enumerate(self.coef):
            out = out + c * X[:, j]
        return out

    def make_leaf(self):
        self.left = self.right = None
        self.feature = -1
        self.threshold = float("nan")

    def leaves(self):
        if self.is_leaf:
            return [self]
        return self.left.leaves() + self.right.leaves()

    def depth(self):
        if self.is_leaf:
            return 0
        return 1 + max(self.left.depth(), self.right.depth())


def predict_tree(node: Node, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    out = np.empty(X.shape[0])
    _route(node, X, np.arange(X.shape[0]), out)
    return out


def _route(node, X, idx, out):
    if node.is_leaf:
        out[idx] = node.leaf_predict(X[idx])
        return
    go_left = X[idx, node.feature] <= node.threshold
    _route(node.left, X, idx[go_left], out)
    _route(node.right, X, idx[~go_left], out)


# -- growing -------------------------------------------------------------------

def _fit_linear(Xn, yn):
    """OLS with intercept; None when the design is rank deficient."""
    n, d = Xn.shape
    if n <= d:
        return None
    A = np.column_stack([Xn, np.ones(n)])
    sol, _, rank, _ = np.linalg.lstsq(A, yn, rcond=None)
    if rank < d + 1 or not np.all(np.isfinite(sol)):
        return None
    return sol[:d].copy(), float(sol[d])


class _Grower:
    def __init__(self, X, y, cfg: TreeConfig, linear: bool):
        self.X = np.asfortranarray(X)
        self.y = np.ascontiguousarray(y)
        self.cfg = cfg
        self.linear = linear
        self._left = np.zeros(X.shape[0], dtype=bool)

    def grow(self):
        sorted_idx = [np.argsort(self.X[:, j], kind="stable") for j in range(self.X.shape[1])]
        return self._build(sorted_idx, 0)

    def _make_node(self, idx):
        yn = self.y[idx]
        mean = float(np.mean(yn))
        node = Node(n_samples=int(idx.size), variance=float(np.var(yn)), value=mean)
        if self.linear:
            fitted = _fit_linear(self.X[idx], yn)
            if fitted is None:
                node.coef = np.zeros(self.X.shape[1])
                node.intercept = mean
                node.fallback = True
            else:
                node.coef, node.intercept = fitted
        return node

    def _build(self, sorted_idx, depth):
        idx = sorted_idx[0]
        node = self._make_node(idx)
        cfg = self.cfg
        if (cfg.max_depth is not None and depth >= cfg.max_depth) \
                or idx.size < 2 * cfg.min_leaf or np.ptp(self.y[idx]) == 0.0:
            return node

        best = None
        for j, order in enumerate(sorted_idx):
            xs = self.X[order, j]
            gain, pos = kernels.best_split(xs, self.y[order] - node.value, cfg.min_leaf)
            if pos < 0:
                continue
            if best is None or gain > best[1]:
                best = (j, gain, midpoint(xs[pos - 1], xs[pos]))
        if best is None or not best[1] > 0.0:
            return node

        j, _, thr = best
        node.feature = j
        node.threshold = thr
        mask = self._left
        mask[idx] = self.X[idx, j] <= thr
        left_sorted = [s[mask[s]] for s in sorted_idx]
        right_sorted = [s[~mask[s]] for s in sorted_idx]
        mask[idx] = False
        node.left = self._build(left_sorted, depth + 1)
        node.right = self._build(right_sorted, depth + 1)
        return node


# -- reduced-error pruning --------------------------------------------------------

def _sse(node, X, y, idx):
    r = y[idx] - node.leaf_predict(X[idx])
    return float(np.sum(r * r))


def tree_sse(node: Node, X, y, idx=None) -> float:
    """Squared error of the tree on ``(X, y)``, summed leaf by leaf."""
    if idx is None:
        idx = np.arange(len(y))
    if node.is_leaf:
        return _sse(node, X, y, idx)
    go_left = X[idx, node.feature] <= node.threshold
    return tree_sse(node.left, X, y, idx[go_left]) + tree_sse(node.right, X, y, idx[~go_left])


def _prune(node, X, y, idx):
    as_leaf = _sse(node, X, y, idx)
    if node.is_leaf:
        return as_leaf
    go_left = X[idx, node.feature] <= node.threshold
    subtree = _prune(node.left, X, y, idx[go_left]) + _prune(node.right, X, y, idx[~go_left])
    if as_leaf <= subtree:
        node.make_leaf()
        return as_leaf
    return subtree


def reduced_error_prune(root: Node, X, y) -> tuple[float, float]:
    """Collapse, bottom-up, every subtree whose replacement leaf does not
    increase squared error on the prune set ``(X, y)``.

    Returns the prune-set SSE before and after; raises if it increased.
    """
    before = tree_sse(root, X, y)
    after = _prune(root, X, y, np.arange(len(y)))
    if after > before:
        raise AssertionError(f"pruning increased prune-set error: {before} -> {after}")
    return before, after


def _smooth(node, X, k, path):
    """Fold ancestor models into each leaf: p <- (n p + k q) / (n + k)."""
    if not node.is_leaf:
        _smooth(node.left, X, k, path + [node])
        _smooth(node.right, X, k, path + [node])
        return
    coef = node.coef.copy()
    icpt = node.intercept
    n = node.n_samples
    for parent in reversed(path):
        coef = (n * coef + k * parent.coef) / (n + k)
        icpt = (n * icpt + k * parent.intercept) / (n + k)
        n = parent.n_samples
    node.coef = coef
    node.intercept = icpt


def _split_grow_prune(n, cfg):
    n_prune = max(1, int(round(cfg.prune_fraction * n)))
    if n - n_prune < 1:
        raise DatasetTooSmall(n, 2)
    perm = np.random.default_rng(cfg.seed).permutation(n)
    return np.sort(perm[n_prune:]), np.sort(perm[:n_prune])


def fit_tree(X, y, cfg: TreeConfig = TreeConfig(), linear=False):
    """Grow (and optionally prune) a tree; returns ``(root, info)``.

    With pruning on, a ``prune_fraction`` share of the records, chosen by
    ``cfg.seed``, is held back to drive reduced-error pruning and the
    tree is grown on the rest.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    info = {}
    if cfg.prune:
        grow, held = _split_grow_prune(len(y), cfg)
    else:
        grow, held = np.arange(len(y)), None
    Xg, yg = X[grow], y[grow]
    root = _Grower(Xg, yg, cfg, linear).grow()
    info["grown_leaves"] = len(root.leaves())
    if held is not None:
        info["prune_sse"] = reduced_error_prune(root, X[held], y[held])
    if linear and cfg.smoothing:
        _smooth(root, Xg, cfg.smoothing_k, [])
    return root, info


def fit_reptree(X, y, cfg: TreeConfig = TreeConfig()) -> Node:
    return fit_tree(X, y, cfg, linear=False)[0]


def fit_m5(X, y, cfg: TreeConfig = TreeConfig()) -> Node:
    return fit_tree(X, y, cfg, linear=True)[0]


# -- rules and text form --------------------------------------------------------

@dataclass(frozen=True)
class Rule:
    conditions: tuple = field(default_factory=tuple)  # (feature, "<=" | ">", threshold)
    leaf: Node = None

    def applies(self, X):
        X = np.asarray(X, dtype=np.float64)
        ok = np.ones(X.shape[0], dtype=bool)
        for j, op, thr in self.conditions:
            ok &= (X[:, j] <= thr) if op == "<=" else (X[:, j] > thr)
        return ok

    def format(self, names):
        cond = " AND ".join(f"{names[j]} {op} {thr:.6g}" for j, op, thr in self.conditions)
        return f"IF {cond or 'TRUE'} THEN {format_model(self.leaf, names)}"


def extract_rules(root: Node) -> list[Rule]:
    """One rule per leaf, left to right; conditions are the path's comparisons."""
    rules = []

    def walk(node, conds):
        if node.is_leaf:
            rules.append(Rule(tuple(conds), node))
            return
        walk(node.left, conds + [(node.feature, "<=", node.threshold)])
        walk(node.right, conds + [(node.feature, ">", node.threshold)])

    walk(root, [])
    return rules


def predict_rules(rules, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    out = np.full(X.shape[0], np.nan)
    free = np.ones(X.shape[0], dtype=bool)
    for rule in rules:
        hit = rule.applies(X) & free
        out[hit] = rule.leaf.leaf_predict(X[hit])
        free &= ~hit
    return out


def format_model(node: Node, names) -> str:
    if node.coef is None:
        return f"{node.value:.6g}"
    terms = [f"{c:.6g}*{names[j]}" for j, c in enumerate(node.coef)]
    s = " + ".join(terms + [f"{node.intercept:.6g}"])
    return s.replace("+ -", "- ")


def dump_tree(root: Node, names) -> str:
    """Indented text form, one branch per line.

    ``<feature> <= <thr>`` / ``<feature> > <thr>`` open the two branches of a
    split; nested lines are prefixed with ``|   `` per level; a leaf is
    printed after `` : `` as its model followed by ``[n=<count>]``.
    """
    lines = []

    def leaf_text(node):
        tag = " (mean fallback)" if node.fallback else ""
        return f"{format_model(node, names)} [n={node.n_samples}]{tag}"

    def walk(node, indent):
        for child, op in ((node.left, "<="), (node.right, ">")):
            head = f"{indent}{names[node.feature]} {op} {node.threshold:.6g}"
            if child.is_leaf:
                lines.append(f"{head} : {leaf_text(child)}")
            else:
                lines.append(head)
                walk(child, indent + "|   ")

    if root.is_leaf:
        lines.append(f": {leaf_text(root)}")
    else:
        walk(root, "")
    return "\n".join(lines)


# -- Regressor wrappers ----------------------------------------------------------

class _TreeRegressor(Regressor):
    linear = False

    def __init__(self, config: TreeConfig = TreeConfig()):
        super().__init__()
        self.config = config

    def _fit(self, X, y):
        self.root_, self.info_ = fit_tree(X, y, self.config, linear=self.linear)

    def _predict(self, X):
        return predict_tree(self.root_, X)

    def rules(self):
        return extract_rules(self.root_)

    def dump(self):
        return dump_tree(self.root_, self.feature_names)

    def describe(self):
        return f"leaves={len(self.root_.leaves())}, depth={self.root_.depth()}" + \
            (", pruned" if self.config.prune else "")


class REPTreeRegressor(_TreeRegressor):
    name = "reptree"


class M5Regressor(_TreeRegressor):
    name = "m5p"
    linear = True

    def describe(self):
        fb = sum(leaf.fallback for leaf in self.root_.leaves())
        s = super().describe()
        if self.config.smoothing:
            s += ", smoothed"
        return s + (f", {fb} mean-fallback leaves" if fb else "")
