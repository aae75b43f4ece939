import io

import numpy as np
import pytest

from panelreg.dataset import Dataset, synthesize
from panelreg.errors import UnknownLearner
from panelreg.harness import (
    DEFAULT_SUITE,
    TABLE_ORDER,
    LearnerOptions,
    correlate,
    run_benchmark,
    write_report_csv,
    write_scatter,
)
from panelreg.mlp import TrainConfig

FAST = LearnerOptions(mlp=TrainConfig(epochs=30), bags=3)


def test_mean_baseline_row(small_synth):
    row = run_benchmark(small_synth, ["mean"], folds=5).row("mean")
    assert row.metrics.ppmcc is None
    assert row.metrics.rae == pytest.approx(1.0, abs=1e-9)
    assert row.metrics.rrse == pytest.approx(1.0, abs=1e-9)


def test_simple_linear_recovers_linear_target(rng):
    v = np.column_stack([rng.lognormal(3, 0.5, 400), rng.lognormal(3, 0.5, 400),
                         rng.uniform(0.01, 1, 400), np.zeros(400)])
    v[:, 3] = 2.0 * v[:, 2] + 0.05
    m = run_benchmark(Dataset(v, "BT", "linear"), ["simple_linear"], folds=10).row("simple_linear").metrics
    assert m.ppmcc >= 0.999 and m.rae <= 0.01


def test_full_suite_structure():
    d = synthesize(400, 3)
    report = run_benchmark(d, DEFAULT_SUITE, folds=4, seed=2, options=FAST)
    assert [r.key for r in report.rows] == TABLE_ORDER
    assert len(report.rows) == 10
    for r in report.rows:
        if r.key == "svm":
            assert r.status == "unsupported" and r.metrics is None
        else:
            assert r.status == "ok"
            assert all(np.isfinite(v) for v in (r.metrics.rae, r.metrics.rrse))
    assert sum(report.fold_sizes) == 400
    for pred in report.predictions.values():
        assert pred.shape == (400,) and np.all(np.isfinite(pred))


def test_rows_follow_table_order_regardless_of_request():
    d = synthesize(200, 3)
    report = run_benchmark(d, ["mean", "stump", "knn1"], folds=3, options=FAST)
    assert [r.key for r in report.rows] == ["knn1", "stump", "mean"]


def test_failed_learner_recorded(small_synth):
    v = small_synth.values.copy()
    v[:, :3] = 1.0
    report = run_benchmark(Dataset(v, "BT", "flat"), ["stump", "simple_linear"], folds=3, options=FAST)
    assert report.row("stump").status == "ok"
    row = report.row("simple_linear")
    assert row.status == "failed" and row.metrics is None and "error" in row.notes
    assert report.failed == [row]


def test_unknown_learner():
    with pytest.raises(UnknownLearner):
        run_benchmark(synthesize(50, 1), ["svr"], folds=3)


def test_report_is_deterministic():
    d = synthesize(300, 4)
    out = []
    for _ in range(2):
        buf = io.StringIO()
        write_report_csv(run_benchmark(d, ["knn3", "reptree", "mlp", "bagging", "mavl"], folds=3,
                                       options=FAST), buf)
        out.append(buf.getvalue())
    assert out[0] == out[1]
    assert out[0].startswith("# provenance: synthetic(n=300, seed=4)")


def test_correlate_properties(small_synth):
    cm = correlate(small_synth)
    assert np.all(np.diag(cm.values) == 1.0)
    np.testing.assert_allclose(cm.values, cm.values.T, atol=1e-12)
    assert cm.get("BD", "BT") == cm.get("BT", "BD")


def test_default_synthetic_bd_bt_correlation():
    assert correlate(synthesize(16380, 1)).get("BD", "BT") >= 0.9


def test_constant_column_is_na(small_synth):
    v = small_synth.values.copy()
    v[:, 1] = 7.0
    cm = correlate(Dataset(v))
    assert cm.get("AST", "AST") is None and cm.get("ALT", "AST") is None
    assert cm.get("ALT", "ALT") == 1.0


def test_scatter_files(tmp_path, small_synth):
    files = write_scatter(small_synth, tmp_path)
    assert sorted(p.name for p in files) == sorted(
        ["ALT_AST.csv", "ALT_BD.csv", "ALT_BT.csv", "AST_BD.csv", "AST_BT.csv", "BD_BT.csv"])
    lines = (tmp_path / "BD_BT.csv").read_text().splitlines()
    assert lines[0] == "BD,BT" and len(lines) == len(small_synth) + 1
