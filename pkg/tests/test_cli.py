import numpy as np
import pytest

from oracles import mean_knn_distance
from panelreg.cli import knsc_sets, main
from panelreg.dataset import load_csv, synthesize, write_csv

FAST = ["--epochs", "20", "--bags", "2"]


@pytest.fixture(scope="module")
def panel_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "panel.csv"
    write_csv(synthesize(500, 11), path)
    return path


def test_synth_line_count_and_determinism(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["synth", "--n", "16380", "--seed", "1", "--out", str(a)]) == 0
    assert main(["synth", "--n", "16380", "--seed", "1", "--out", str(b)]) == 0
    assert len(a.read_text().splitlines()) == 16381
    assert a.read_bytes() == b.read_bytes()


def test_synth_usage_errors(capsys):
    with pytest.raises(SystemExit) as info:
        main(["synth", "--n", "0"])
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 1


def test_synth_stdout(capsys):
    assert main(["synth", "--n", "5", "--seed", "2"]) == 0
    out = capsys.readouterr()
    assert out.out.splitlines()[0] == "ALT,AST,BD,BT" and len(out.out.splitlines()) == 6


def test_bench_default_suite(panel_csv, tmp_path, capsys):
    csv = tmp_path / "r.csv"
    code = main(["bench", "--input", str(panel_csv), "--folds", "3", "--csv", str(csv)] + FAST)
    assert code == 0
    text = capsys.readouterr().out
    assert "seed 1" in text
    rows = [l for l in csv.read_text().splitlines() if not l.startswith("#")][1:]
    assert len(rows) == 10
    assert rows[2].startswith("svm,") and ",unsupported," in rows[2]
    svm_line = next(l for l in text.splitlines() if l.startswith("SVM"))
    assert svm_line.split()[1:4] == ["n/a", "n/a", "n/a"]


def test_bench_unknown_learner(panel_csv, capsys):
    assert main(["bench", "--input", str(panel_csv), "--learners", "knn3,svr"]) == 1
    err = capsys.readouterr().err
    assert "svr" in err and "reptree" in err


def test_bench_needs_one_source(panel_csv):
    assert main(["bench", "--learners", "mean"]) == 1
    assert main(["bench", "--input", str(panel_csv), "--synth-n", "50", "--learners", "mean"]) == 1


def test_bench_missing_file(tmp_path):
    assert main(["bench", "--input", str(tmp_path / "nope.csv"), "--learners", "mean"]) == 2


def test_bench_partial_failure_exit(tmp_path, capsys):
    path = tmp_path / "flat.csv"
    path.write_text("ALT,AST,BD,BT\n" + "".join(f"20,20,0.1,{0.5 + i / 10}\n" for i in range(12)))
    assert main(["bench", "--input", str(path), "--folds", "3", "--learners", "stump,simple_linear"]) == 3
    assert "simple_linear" in capsys.readouterr().err


def test_bench_simple_linear_picks_bd(tmp_path, capsys):
    csv = tmp_path / "r.csv"
    assert main(["bench", "--synth-n", "2000", "--target", "BT", "--learners", "simple_linear",
                 "--csv", str(csv)]) == 0
    row = csv.read_text().splitlines()[-1]
    assert row.startswith("simple_linear,") and "feature=BD" in row


def test_config_precedence(panel_csv, tmp_path, capsys):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[bench]\nfolds = 3\nlearners = mean,stump\n")
    assert main(["bench", "--config", str(cfg), "--input", str(panel_csv)]) == 0
    out = capsys.readouterr().out
    assert "3-fold" in out and "Decision Stump" in out
    assert main(["bench", "--config", str(cfg), "--input", str(panel_csv), "--folds", "4"]) == 0
    assert "4-fold" in capsys.readouterr().out


def test_config_unknown_key(panel_csv, tmp_path):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[bench]\nfoldz = 3\n")
    assert main(["bench", "--config", str(cfg), "--input", str(panel_csv)]) == 1


def test_config_calibration_feeds_synth(tmp_path, capsys):
    cfg = tmp_path / "cal.ini"
    cfg.write_text("[synth]\nn = 40\nseed = 3\n[BT]\nmin = 0.5\nmax = 2.0\n")
    out = tmp_path / "s.csv"
    assert main(["synth", "--config", str(cfg), "--out", str(out)]) == 0
    d = load_csv(out)
    assert len(d) == 40 and d.column("BT").min() >= 0.5 and d.column("BT").max() <= 2.0


@pytest.mark.parametrize("expected", [
    "--folds FOLDS", "(default: 10)", "--min-leaf MIN_LEAF", "(default: 0.25)", "(default: 8)",
    "(default: 500)", "(default: 0.01)", "(default: 0.9)", "(default: knn3,reptree,mlp)",
])
def test_bench_help_documents_defaults(capsys, expected):
    with pytest.raises(SystemExit) as info:
        main(["bench", "--help"])
    assert info.value.code == 0
    assert expected in " ".join(capsys.readouterr().out.split())


def test_correlate_and_scatter(panel_csv, tmp_path, capsys):
    assert main(["correlate", "--input", str(panel_csv), "--scatter", str(tmp_path / "sc")]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].split() == ["ALT", "AST", "BD", "BT"]
    cells = np.array([[float(v) for v in line.split()[1:]] for line in out[1:5]])
    np.testing.assert_array_equal(cells, cells.T)
    assert np.all(np.diag(cells) == 1.0)
    assert len(list((tmp_path / "sc").glob("*.csv"))) == 6


def test_correlate_constant_column(tmp_path, capsys):
    path = tmp_path / "c.csv"
    path.write_text("ALT,AST,BD,BT\n" + "".join(f"{10 + i},20,0.{i + 1},{i}\n" for i in range(6)))
    assert main(["correlate", "--input", str(path)]) == 0
    out = capsys.readouterr()
    assert "n/a" in out.out and "warning" in out.err


def _symmetric_toy(path):
    # query (38, 30, 0.1): two in-range class points and two outliers, each exactly 5 away
    rows = ["33,30,0.1,1.0", "38,25,0.1,1.0", "43,30,0.1,1.0", "38,35,0.1,1.0"]
    path.write_text("ALT,AST,BD,BT\n" + "\n".join(rows) + "\n")


def test_knsc_symmetric_toy(tmp_path, capsys):
    path = tmp_path / "toy.csv"
    _symmetric_toy(path)
    assert main(["knsc", "--input", str(path), "--query", "ALT=38,AST=30,BD=0.1", "--k", "2", "--raw"]) == 0
    assert "k-NSC = 0.000000" in capsys.readouterr().out


def test_knsc_k_too_large_names_class(tmp_path, capsys):
    path = tmp_path / "toy.csv"
    _symmetric_toy(path)
    with open(path, "a") as fh:
        fh.write("50,30,0.1,1.0\n")
    assert main(["knsc", "--input", str(path), "--query", "38,30,0.1", "--k", "3", "--raw"]) == 2
    assert "point set 'in' has 2 points" in capsys.readouterr().err


def test_knsc_inside_cluster_negative(capsys):
    d = synthesize(600, 5).with_target("BT")
    transform, classes, outliers = knsc_sets(d)
    inside = classes["in"]
    z = np.median(inside, axis=0)
    mu, sd = d.X.mean(axis=0), d.X.std(axis=0)
    q = z * sd + mu
    query = ",".join(repr(float(v)) for v in q)
    assert main(["knsc", "--synth-n", "600", "--synth-seed", "5", "--query", query]) == 0
    score = float(capsys.readouterr().out.split("k-NSC = ")[1])
    zq = transform(q)
    d_cls = min(mean_knn_distance(zq, pts.tolist(), 3) for pts in classes.values())
    d_out = mean_knn_distance(zq, outliers.tolist(), 3)
    assert score == pytest.approx((d_cls - d_out) / max(d_cls, d_out), abs=1e-6)
    assert score < 0


def test_inspect_dump_and_rules(panel_csv, capsys):
    assert main(["inspect", "--input", str(panel_csv), "--max-depth", "2"]) == 0
    out = capsys.readouterr()
    assert " : " in out.out and "reptree" in out.err
    assert main(["inspect", "--input", str(panel_csv), "--model", "m5p", "--rules"]) == 0
    assert all(l.startswith("IF ") for l in capsys.readouterr().out.splitlines())
    assert main(["inspect", "--input", str(panel_csv), "--model", "stump"]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 2
