"""Acceptance criteria 1-8, one test each, with their runtime limits.

A summary line per criterion is printed at the end of the pytest run.
"""
import csv
import io
import subprocess
import sys
import time

import numpy as np
import pytest

from oracles import brute_force_neighbors, brute_force_split, central_difference, two_pass_pearson
from panelreg.dataset import DEFAULT_CALIBRATION, analyte_index
from panelreg.ensemble import BaggingRegressor, mavl_regress, mavl_vote
from panelreg.harness import LearnerOptions, make_learner
from panelreg.learners import KNNRegressor, fit_stump
from panelreg.metrics import evaluate, ppmcc, rae, rrse
from panelreg.mlp import MlpParams, gradient, init_params, loss
from panelreg.trees import TreeConfig, extract_rules, fit_tree, predict_rules, predict_tree


class Clock:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0


@pytest.mark.criterion(1, "metric fixtures: mean baseline scores RAE = RRSE = 1, perfect fit scores 0")
def test_criterion_1_metric_fixtures():
    rng = np.random.default_rng(101)
    with Clock() as c:
        for _ in range(50):
            n = int(rng.integers(2, 500))
            t = rng.lognormal(rng.uniform(-3, 5), rng.uniform(0.1, 2), n)
            if np.ptp(t) == 0:
                continue
            base = np.full(n, t.mean())
            assert abs(rae(base, t) - 1.0) <= 1e-9
            assert abs(rrse(base, t) - 1.0) <= 1e-9
            m = evaluate(t, t)
            assert m.rae == 0.0 and m.rrse == 0.0
    assert c.seconds < 1.0


@pytest.mark.criterion(2, "PPMCC agrees with a two-pass oracle; exact +-1 on collinear pairs")
def test_criterion_2_ppmcc_oracle():
    rng = np.random.default_rng(202)
    with Clock() as c:
        for i in range(1000):
            n = int(rng.integers(2, 60))
            x = rng.standard_normal(n) * 10 ** rng.uniform(-3, 3)
            y = 0.5 * x + rng.standard_normal(n) * 10 ** rng.uniform(-3, 3)
            if np.ptp(x) == 0 or np.ptp(y) == 0:
                continue
            assert abs(ppmcc(x, y) - two_pass_pearson(x.tolist(), y.tolist())) <= 1e-10
            a = rng.uniform(0.1, 100) * (1 if i % 2 else -1)
            assert ppmcc(x, a * x + rng.uniform(-50, 50)) == (1.0 if a > 0 else -1.0)
    assert c.seconds < 1.0


@pytest.mark.criterion(3, "MLP backprop matches central differences (h = 1e-5) within 1e-4")
def test_criterion_3_gradient_check():
    rng = np.random.default_rng(303)
    worst = 0.0
    with Clock() as c:
        for seed in range(100):
            d, h = int(rng.integers(1, 5)), int(rng.integers(1, 10))
            p = init_params(d, h, seed)
            p = MlpParams.from_flat(p.flat() * rng.uniform(0.5, 4), d, h)
            X = rng.standard_normal((5, d))
            y = rng.standard_normal(5)
            analytic = gradient(p, X, y).flat()
            numeric = np.array(central_difference(
                lambda v: loss(MlpParams.from_flat(v, d, h), X, y), p.flat().tolist(), h=1e-5))
            denom = np.maximum(np.abs(analytic), np.abs(numeric))
            rel = np.abs(analytic - numeric) / np.where(denom > 0, denom, 1.0)
            worst = max(worst, float(rel.max()))
    assert worst < 1e-4, worst
    assert c.seconds < 10.0


def _tree_dataset(rng):
    n = int(rng.integers(20, 201))
    X = np.round(rng.standard_normal((n, 3)) * [10, 5, 0.2], int(rng.integers(0, 3)))
    y = np.round(np.where(X[:, 0] > 0, 2.0, 0.0) + X[:, 2] * 3 + rng.standard_normal(n), 3)
    return X, y


@pytest.mark.criterion(4, "stump and REPTree root splits match brute force; pruning monotone; rules equal tree")
def test_criterion_4_tree_oracles():
    rng = np.random.default_rng(404)
    with Clock() as c:
        for ds in range(50):
            X, y = _tree_dataset(rng)
            stump = fit_stump(X, y)
            ref = brute_force_split(X.tolist(), y.tolist(), 1)
            assert (stump.feature_index, stump.threshold) == ref[:2]

            root, _ = fit_tree(X, y, TreeConfig(prune=False, min_leaf=10))
            ref = brute_force_split(X.tolist(), y.tolist(), 10)
            if ref is None:
                assert root.is_leaf
            else:
                assert (root.feature, root.threshold) == ref[:2]

            Q = rng.standard_normal((100, 3)) * [10, 5, 0.2]
            for linear in (False, True):
                # reduced_error_prune raises if a pass raises prune-set error
                tree, info = fit_tree(X, y, TreeConfig(min_leaf=3, seed=ds), linear=linear)
                before, after = info["prune_sse"]
                assert after <= before
                for t in (tree, root):
                    assert np.array_equal(predict_rules(extract_rules(t), Q), predict_tree(t, Q))
    assert c.seconds < 30.0


def _knn_dataset(rng, i):
    n = int(rng.integers(5, 80))
    if i % 2:
        # small integer lattice: many exact distance ties
        return rng.integers(0, 4, (n, 3)).astype(float), rng.standard_normal(n), False
    return rng.standard_normal((n, 3)) * [1, 30, 0.1], rng.standard_normal(n), True


@pytest.mark.criterion(5, "KNN neighbours and predictions match an exhaustive scan, ties included")
def test_criterion_5_knn_oracle():
    rng = np.random.default_rng(505)
    with Clock() as c:
        for i in range(50):
            X, y, std = _knn_dataset(rng, i)
            k = int(rng.integers(1, min(6, len(y)) + 1))
            model = KNNRegressor(k, standardize=std).fit(X, y)
            Z = model.transform(X).tolist()
            Q = rng.integers(0, 4, (20, 3)).astype(float) if not std else \
                rng.standard_normal((20, 3)) * [1, 30, 0.1]
            got_idx = model.neighbors(Q)
            got = model.predict(Q)
            for q, idx, pred in zip(Q, got_idx, got):
                ref = brute_force_neighbors(Z, model.transform(q).tolist(), k)
                assert idx.tolist() == ref
                assert pred == pytest.approx(sum(y[j] for j in ref) / k, rel=1e-12, abs=1e-15)
    assert c.seconds < 5.0


@pytest.mark.criterion(6, "ensemble algebra: vote scaling, regress bounds and mean, identity bagging")
def test_criterion_6_ensemble_algebra():
    rng = np.random.default_rng(606)
    with Clock() as c:
        for _ in range(200):
            m = int(rng.integers(1, 7))
            labels = rng.integers(0, 3, m).tolist()
            w = rng.uniform(0.01, 1, m)
            for scale in (1e-3, 0.5, 7.0, 1e4):
                assert mavl_vote(labels, w * scale) == mavl_vote(labels, w)
            p = rng.standard_normal((m, 8)) * 10 ** rng.uniform(-2, 4)
            out = mavl_regress(p, w)
            assert np.all(out >= p.min(axis=0)) and np.all(out <= p.max(axis=0))
            eq = mavl_regress(p)
            assert np.all(np.abs(eq - p.mean(axis=0)) <= 1e-12 * max(1.0, np.abs(p).max()))
        X = rng.standard_normal((120, 3))
        y = X[:, 0] - X[:, 1] ** 2 + 0.1 * rng.standard_normal(120)
        Q = rng.standard_normal((40, 3))
        opts = LearnerOptions()
        for base in ("reptree", "knn3", "stump", "simple_linear", "m5p"):
            bag = BaggingRegressor(lambda s: make_learner(base, s, opts), seed=9,
                                   resamples=[np.arange(120)]).fit(X, y)
            single = make_learner(base, 9, opts).fit(X, y)
            assert np.array_equal(bag.predict(Q), single.predict(Q))
    assert c.seconds < 1.0


BENCH_FLAGS = ["bench", "--synth-n", "16380", "--synth-seed", "1", "--target", "BT",
               "--folds", "10", "--seed", "1"]


def _run_bench(tmp):
    tmp.mkdir(parents=True, exist_ok=True)
    cmd = [sys.executable, "-m", "panelreg"] + BENCH_FLAGS + \
        ["--csv", str(tmp / "report.csv"), "--out", str(tmp / "report.txt")]
    with Clock() as c:
        proc = subprocess.run(cmd, capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return c.seconds, proc.stdout, (tmp / "report.csv").read_bytes(), (tmp / "report.txt").read_bytes()


@pytest.fixture(scope="module")
def first_bench(tmp_path_factory):
    return _run_bench(tmp_path_factory.mktemp("bench1"))


def _ppmcc_rows(csv_bytes):
    text = "\n".join(l for l in csv_bytes.decode().splitlines() if not l.startswith("#"))
    return {r["learner"]: r for r in csv.DictReader(io.StringIO(text))}


@pytest.mark.slow
@pytest.mark.criterion(7, "default synthetic set: simple linear PPMCC >= 0.90, MaVL within 0.02 of best member, < 60 s")
def test_criterion_7_end_to_end(first_bench, record_property):
    seconds, stdout, csv_bytes, _ = first_bench
    record_property("seconds", seconds)
    assert DEFAULT_CALIBRATION.correlation[analyte_index("BD"), analyte_index("BT")] == 0.95
    rows = _ppmcc_rows(csv_bytes)
    assert len(rows) == 10
    r = {k: float(v["ppmcc"]) for k, v in rows.items() if v["status"] == "ok"}
    print(f"\n  bench: {seconds:.1f}s; " + ", ".join(f"{k}={v:.4f}" for k, v in r.items()))
    assert r["simple_linear"] >= 0.90
    assert r["mavl"] >= max(r["knn3"], r["reptree"], r["mlp"]) - 0.02
    assert seconds < 60.0


@pytest.mark.slow
@pytest.mark.criterion(8, "bench and synth outputs are byte-identical across runs, < 2x criterion 7")
def test_criterion_8_determinism(first_bench, tmp_path):
    with Clock() as c:
        _, stdout2, csv2, txt2 = _run_bench(tmp_path / "bench2")
        synth = []
        for i in range(2):
            out = tmp_path / f"synth{i}.csv"
            subprocess.run([sys.executable, "-m", "panelreg", "synth", "--n", "16380", "--seed", "1",
                            "--out", str(out)], check=True, capture_output=True)
            synth.append(out.read_bytes())
    seconds1, stdout1, csv1, txt1 = first_bench
    assert csv1 == csv2 and txt1 == txt2 and stdout1 == stdout2
    assert synth[0] == synth[1]
    assert c.seconds < 2 * seconds1
