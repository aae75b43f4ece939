"""Cross-validated benchmark producing a per-learner PPMCC/RAE/RRSE table."""
from __future__ import annotations

import csv
import itertools
import time
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .dataset import ANALYTES, Dataset, make_folds
from .ensemble import BaggingRegressor, BinScheme, MaVLRegressor, mavl_discrete_pipeline, mavl_regress
from .errors import DataError, PanelError, UnknownLearner, ZeroVariance
from .learners import DecisionStump, KNNRegressor, Regressor, SimpleLinearRegression
from .metrics import MetricTriple, evaluate, ppmcc
from .mlp import MLPRegressor, TrainConfig
from .trees import M5Regressor, REPTreeRegressor, TreeConfig

# row order of the published comparison table
TABLE_ORDER = ["knn1", "knn3", "svm", "stump", "m5p", "reptree", "mlp",
               "simple_linear", "bagging", "mavl"]
DEFAULT_SUITE = list(TABLE_ORDER)
EXTRA_LEARNERS = ["mean", "mavl_vote"]
LABELS = {
    "knn1": "KNN, N=1",
    "knn3": "KNN, N=3",
    "svm": "SVM",
    "stump": "Decision Stump",
    "m5p": "M5P",
    "reptree": "REPTree",
    "mlp": "MLP",
    "simple_linear": "Simple Linear Regression",
    "bagging": "Bagging",
    "mavl": "MaVL",
    "mavl_vote": "MaVL (vote)",
    "mean": "Mean baseline",
}
UNSUPPORTED = {"svm": "unsupported (out of scope)"}
ALL_LEARNERS = TABLE_ORDER + EXTRA_LEARNERS


@dataclass(frozen=True)
class LearnerOptions:
    tree: TreeConfig = TreeConfig()
    mlp: TrainConfig = TrainConfig()
    knn_standardize: bool = True
    bags: int = 10
    bagging_base: str = "reptree"
    mavl_members: tuple = ("knn3", "reptree", "mlp")
    mavl_weights: Optional[tuple] = None
    mavl_mode: str = "average"
    mavl_bins: int = 10


def check_learners(names: Sequence[str], options: LearnerOptions = LearnerOptions()):
    for name in names:
        if name not in ALL_LEARNERS:
            raise UnknownLearner(name, ALL_LEARNERS)
    for m in options.mavl_members:
        if m in UNSUPPORTED or m in ("mavl", "mavl_vote", "mean") or m not in ALL_LEARNERS:
            raise UnknownLearner(m, [n for n in ALL_LEARNERS if n not in UNSUPPORTED
                                     and n not in ("mavl", "mavl_vote", "mean")])
    if options.bagging_base not in ("knn1", "knn3", "stump", "m5p", "reptree", "mlp", "simple_linear"):
        raise UnknownLearner(options.bagging_base, ["knn1", "knn3", "stump", "m5p", "reptree", "mlp",
                                                    "simple_linear"])
    if options.mavl_weights is not None and len(options.mavl_weights) != len(options.mavl_members):
        raise DataError("MaVL weights must match the member list")


def make_learner(name: str, seed: int, options: LearnerOptions = LearnerOptions()) -> Regressor:
    """Instantiate an unfitted learner by registry name."""
    if name == "knn1":
        return KNNRegressor(1, standardize=options.knn_standardize)
    if name == "knn3":
        return KNNRegressor(3, standardize=options.knn_standardize)
    if name == "stump":
        return DecisionStump()
    if name == "simple_linear":
        return SimpleLinearRegression()
    if name == "reptree":
        return REPTreeRegressor(replace(options.tree, seed=seed))
    if name == "m5p":
        return M5Regressor(replace(options.tree, seed=seed))
    if name == "mlp":
        return MLPRegressor(replace(options.mlp, seed=seed))
    if name == "bagging":
        base = options.bagging_base
        return BaggingRegressor(lambda s: make_learner(base, s, options), n_bags=options.bags, seed=seed)
    if name in ("mavl", "mavl_vote"):
        mode = "vote" if name == "mavl_vote" else options.mavl_mode
        members = [make_learner(m, seed, options) for m in options.mavl_members]
        return MaVLRegressor(members, weights=options.mavl_weights, mode=mode, n_bins=options.mavl_bins)
    if name == "mean":
        from .learners import MeanRegressor
        return MeanRegressor()
    raise UnknownLearner(name, [n for n in ALL_LEARNERS if n not in UNSUPPORTED])


@dataclass
class ReportRow:
    key: str
    label: str
    status: str  # "ok" | "unsupported" | "failed"
    metrics: Optional[MetricTriple] = None
    notes: str = ""
    seconds: float = 0.0


@dataclass
class EvaluationReport:
    rows: list
    provenance: str
    target: str
    features: list
    n_records: int
    folds: int
    seed: int
    fold_sizes: list
    protocol: str = ""
    predictions: dict = field(default_factory=dict, repr=False)

    @property
    def failed(self):
        return [r for r in self.rows if r.status == "failed"]

    def row(self, key) -> ReportRow:
        for r in self.rows:
            if r.key == key:
                return r
        raise KeyError(key)


def _summarize_notes(notes: list[str]) -> str:
    counts = Counter(notes)
    if len(counts) == 1:
        return notes[0]
    top, c = counts.most_common(1)[0]
    return f"{top} ({c}/{len(notes)} folds)"


def _order(learners):
    in_table = [n for n in TABLE_ORDER if n in learners]
    rest = [n for n in learners if n not in TABLE_ORDER]
    return in_table + list(dict.fromkeys(rest))


def run_benchmark(d: Dataset, learners: Sequence[str] = DEFAULT_SUITE, folds: int = 10, seed: int = 1,
                  options: LearnerOptions = LearnerOptions()) -> EvaluationReport:
    """Out-of-fold evaluation of each learner.

    Each learner is fitted on ``folds - 1`` folds and predicts the held-out
    one; metrics are computed once on the pooled out-of-fold vector. A
    learner that fails gets a ``failed`` row and the run continues. The
    ``mean`` row is the constant-mean reference predictor, not cross-validated.
    """
    check_learners(learners, options)
    plan = make_folds(d, folds, seed)
    X, y = d.X, d.y
    names = d.features
    fold_idx = list(plan)
    oof_cache = {}
    fold_notes = {}

    def oof(name):
        if name not in oof_cache:
            pred = np.empty(len(y))
            notes = []
            for train, test in fold_idx:
                model = make_learner(name, seed, options)
                model.fit(X[train], y[train], feature_names=names)
                pred[test] = model.predict(X[test])
                notes.append(model.describe())
            oof_cache[name] = pred
            fold_notes[name] = _summarize_notes(notes)
        return oof_cache[name]

    def mavl_oof(mode):
        member_preds = np.array([oof(m) for m in options.mavl_members])
        pred = np.empty(len(y))
        for train, test in fold_idx:
            if mode == "average":
                pred[test] = mavl_regress(member_preds[:, test], options.mavl_weights)
            else:
                bins = BinScheme.from_quantiles(y[train], options.mavl_bins)
                p = np.clip(member_preds[:, test], bins.edges[0], bins.edges[-1])
                pred[test] = mavl_discrete_pipeline(p, bins, options.mavl_weights)
        return pred

    rows = []
    predictions = {}
    for name in _order(learners):
        label = LABELS.get(name, name)
        if name in UNSUPPORTED:
            rows.append(ReportRow(name, label, "unsupported", notes=UNSUPPORTED[name]))
            continue
        t0 = time.perf_counter()
        try:
            if name == "mean":
                pred = np.full(len(y), np.mean(y))
                note = "constant target-mean reference (not cross-validated)"
            elif name in ("mavl", "mavl_vote"):
                mode = "vote" if name == "mavl_vote" else options.mavl_mode
                pred = mavl_oof(mode)
                w = "equal" if options.mavl_weights is None else "/".join(f"{v:g}" for v in options.mavl_weights)
                note = f"mode={mode}, members={','.join(options.mavl_members)}, weights={w}"
                if mode == "vote":
                    note += f", bins={options.mavl_bins}"
            else:
                pred = oof(name)
                note = fold_notes[name]
            metrics = evaluate(pred, y)
            rows.append(ReportRow(name, label, "ok", metrics, note, time.perf_counter() - t0))
            predictions[name] = pred
        except (PanelError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            rows.append(ReportRow(name, label, "failed", notes=f"error: {exc}",
                                  seconds=time.perf_counter() - t0))

    return EvaluationReport(
        rows=rows, provenance=d.provenance, target=d.target, features=names,
        n_records=len(d), folds=folds, seed=seed, fold_sizes=plan.sizes(),
        protocol=f"{folds}-fold cross-validation (seed {seed}), metrics on pooled out-of-fold predictions",
        predictions=predictions,
    )


def _fmt(v):
    return "" if v is None else repr(float(v))


def write_report_csv(report: EvaluationReport, dest) -> None:
    """Machine-readable report: ``#`` metadata lines, then one row per learner (ratios)."""
    if isinstance(dest, (str, Path)):
        with open(dest, "w", newline="", encoding="utf-8") as fh:
            write_report_csv(report, fh)
        return
    dest.write(f"# provenance: {report.provenance}\n")
    dest.write(f"# target: {report.target}; features: {','.join(report.features)}; "
               f"records: {report.n_records}\n")
    dest.write(f"# protocol: {report.protocol}\n")
    w = csv.writer(dest, lineterminator="\n")
    w.writerow(["learner", "label", "status", "ppmcc", "rae", "rrse", "notes"])
    for r in report.rows:
        m = r.metrics
        w.writerow([r.key, r.label, r.status,
                    _fmt(m.ppmcc) if m else "", _fmt(m.rae) if m else "",
                    _fmt(m.rrse) if m else "", r.notes])


# -- correlation matrix --------------------------------------------------------

@dataclass
class CorrelationMatrix:
    analytes: tuple
    values: np.ndarray  # NaN where undefined

    def get(self, a, b):
        v = self.values[self.analytes.index(a), self.analytes.index(b)]
        return None if np.isnan(v) else float(v)


def correlate(d: Dataset) -> CorrelationMatrix:
    """Pairwise PPMCC of the four analytes; NaN marks cells involving a constant column."""
    m = np.full((4, 4), np.nan)
    cols = [d.column(a) for a in ANALYTES]
    if len(d) < 2:
        return CorrelationMatrix(ANALYTES, m)
    const = [np.ptp(c) == 0 for c in cols]
    for i in range(4):
        if not const[i]:
            m[i, i] = 1.0
    for i, j in itertools.combinations(range(4), 2):
        try:
            m[i, j] = m[j, i] = ppmcc(cols[i], cols[j])
        except ZeroVariance:
            pass
    return CorrelationMatrix(ANALYTES, m)


def write_scatter(d: Dataset, outdir) -> list[Path]:
    """One ``<A>_<B>.csv`` point file per analyte pair (6 files)."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    for a, b in itertools.combinations(ANALYTES, 2):
        path = outdir / f"{a}_{b}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(f"{a},{b}\n")
            for x, y in zip(d.column(a), d.column(b)):
                fh.write(f"{x:.6g},{y:.6g}\n")
        written.append(path)
    return written
