"""Command-line entry point: ``panelreg {synth,bench,correlate,knsc,inspect}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 partial learner failure.
"""
from __future__ import annotations

import argparse
import configparser
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import kernels
from .dataset import (
    ANALYTES,
    DEFAULT_CALIBRATION,
    REFERENCE_RANGES,
    analyte_index,
    format_summary,
    load_calibration,
    load_csv,
    out_of_range_mask,
    summarize,
    synthesize,
    write_csv,
)
from .errors import DataError, PanelError, UnknownLearner
from .harness import (
    ALL_LEARNERS,
    DEFAULT_SUITE,
    LearnerOptions,
    check_learners,
    correlate,
    run_benchmark,
    write_report_csv,
    write_scatter,
)
from .learners import fit_stump, knsc
from .mlp import TrainConfig
from .trees import M5Regressor, REPTreeRegressor, TreeConfig

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_PARTIAL = 0, 1, 2, 3
DEFAULT_N = 16380


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _analyte(text):
    try:
        return ANALYTES[analyte_index(text)]
    except DataError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _fraction(text):
    v = float(text)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError(f"must be in (0, 1), got {v}")
    return v


def _add_config(p):
    p.add_argument("--config", type=Path, help="INI file; section [<subcommand>] sets flag defaults, "
                   "calibration sections ([ALT].., [correlation], [synth]) feed synthesis")


def _add_source(p):
    g = p.add_argument_group("data source (exactly one)")
    g.add_argument("--input", type=Path, help="panel CSV with ALT,AST,BD,BT columns")
    g.add_argument("--synth-n", type=_positive_int, help="synthesize this many records instead")
    g.add_argument("--synth-seed", type=int, default=1, help="seed for --synth-n")


def _add_tree_flags(p):
    g = p.add_argument_group("trees (REPTree, M5P)")
    g.add_argument("--min-leaf", type=_positive_int, default=10, help="minimum grow-set records per leaf")
    g.add_argument("--max-depth", type=int, default=None, help="depth limit (default unlimited)")
    g.add_argument("--no-prune", action="store_true", help="disable reduced-error pruning")
    g.add_argument("--prune-fraction", type=_fraction, default=0.25, help="share of training data held out for pruning")
    g.add_argument("--smoothing", action="store_true", help="blend M5 leaf models up the path (off by default)")


def build_parser():
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(prog="panelreg", description="Predict one liver-panel analyte from the other three and score the learners.", formatter_class=fmt)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="write a synthetic panel CSV", formatter_class=fmt)
    _add_config(p)
    p.add_argument("--n", type=_positive_int, default=DEFAULT_N, help="number of records")
    p.add_argument("--seed", type=int, default=1, help="random seed")
    p.add_argument("--out", type=Path, default=None, help="output CSV (default: stdout)")

    p = sub.add_parser("bench", help="cross-validated comparison of the learners", formatter_class=fmt)
    _add_config(p)
    _add_source(p)
    p.add_argument("--target", type=_analyte, default="BT", help="analyte to predict")
    p.add_argument("--learners", default=",".join(DEFAULT_SUITE),
                   help=f"comma-separated subset of: {', '.join(ALL_LEARNERS)}")
    p.add_argument("--folds", type=int, default=10, help="cross-validation folds")
    p.add_argument("--seed", type=int, default=1, help="fold / model seed")
    p.add_argument("--out", type=Path, help="also write the text table here")
    p.add_argument("--csv", type=Path, help="write ratio-valued CSV report here")
    p.add_argument("--timing", action="store_true", help="add wall-clock seconds per learner to the text table")
    p.add_argument("--knn-raw", action="store_true", help="KNN on raw (unstandardized) features")
    _add_tree_flags(p)
    g = p.add_argument_group("MLP")
    g.add_argument("--hidden", type=_positive_int, default=8, help="hidden units")
    g.add_argument("--epochs", type=_positive_int, default=500, help="full-batch epochs")
    g.add_argument("--lr", type=float, default=0.01, help="learning rate")
    g.add_argument("--momentum", type=float, default=0.9, help="momentum")
    g = p.add_argument_group("ensembles")
    g.add_argument("--bags", type=_positive_int, default=10, help="bagging: number of bootstrap bags")
    g.add_argument("--bagging-base", default="reptree", help="bagging: base learner")
    g.add_argument("--mavl-members", default="knn3,reptree,mlp", help="MaVL: member learners")
    g.add_argument("--mavl-weights", default=None, help="MaVL: comma-separated weights (default equal)")
    g.add_argument("--mavl-mode", choices=["average", "vote"], default="average",
                   help="MaVL: weighted mean, or weighted vote over target bins")
    g.add_argument("--mavl-bins", type=_positive_int, default=10, help="MaVL vote mode: quantile bins")

    p = sub.add_parser("correlate", help="pairwise PPMCC matrix of the four analytes", formatter_class=fmt)
    _add_config(p)
    _add_source(p)
    p.add_argument("--scatter", type=Path, help="directory for per-pair point files")

    p = sub.add_parser("knsc", help="separation score of a query record", formatter_class=fmt)
    _add_config(p)
    _add_source(p)
    p.add_argument("--query", required=True,
                   help="feature values, e.g. 'ALT=25,AST=30,BD=0.2' or '25,30,0.2' in feature order")
    p.add_argument("--target", type=_analyte, default="BT", help="analyte binned into below/in/above classes")
    p.add_argument("--k", type=_positive_int, default=3, help="neighbours per set")
    p.add_argument("--raw", action="store_true", help="distances on raw values instead of z-scores")

    p = sub.add_parser("inspect", help="fit one tree and print its text form", formatter_class=fmt)
    _add_config(p)
    _add_source(p)
    p.add_argument("--target", type=_analyte, default="BT", help="analyte to predict")
    p.add_argument("--model", choices=["reptree", "m5p", "stump"], default="reptree", help="tree type")
    p.add_argument("--seed", type=int, default=1, help="grow/prune split seed")
    p.add_argument("--rules", action="store_true", help="print the rule list instead of the tree")
    _add_tree_flags(p)
    return parser


def _config_defaults(parser, argv):
    """Read ``--config`` and push its ``[<command>]`` section into parser defaults."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("command", nargs="?")
    pre.add_argument("--config", type=Path)
    known, _ = pre.parse_known_args(argv)
    if known.config is None or known.command is None:
        return None
    cp = configparser.ConfigParser()
    try:
        with open(known.config, encoding="utf-8") as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from None
    if not cp.has_section(known.command):
        return known.config
    subparser = parser._subparsers._group_actions[0].choices[known.command]
    actions = {a.dest: a for a in subparser._actions}
    defaults = {}
    for key, raw in cp.items(known.command):
        dest = key.replace("-", "_")
        if dest not in actions:
            raise UsageError(f"config [{known.command}]: unknown option {key!r}")
        act = actions[dest]
        if isinstance(act, argparse._StoreTrueAction):
            defaults[dest] = cp.getboolean(known.command, key)
        elif act.type is not None:
            try:
                defaults[dest] = act.type(raw)
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise UsageError(f"config [{known.command}] {key}: {exc}") from None
        else:
            defaults[dest] = raw
    subparser.set_defaults(**defaults)
    return known.config


def _calibration(args):
    if getattr(args, "config", None) is None:
        return DEFAULT_CALIBRATION, {}
    return load_calibration(args.config)


def _load_data(args, target="BT"):
    if (args.input is None) == (args.synth_n is None):
        raise UsageError("give exactly one of --input or --synth-n")
    if args.input is not None:
        return load_csv(args.input, target=target)
    cal, _ = _calibration(args)
    return synthesize(args.synth_n, args.synth_seed, cal).with_target(target)


# -- rendering -----------------------------------------------------------------

def _pct(v):
    return f"{100.0 * v:.2f}"


def render_report(report, timing=False) -> str:
    """Aligned text table; RAE and RRSE as percentages with two decimals."""
    lines = [
        f"Target: {report.target} (features: {', '.join(report.features)})",
        f"Data: {report.provenance}; records: {report.n_records}",
        f"Protocol: {report.protocol}",
        f"Fold sizes: {min(report.fold_sizes)}-{max(report.fold_sizes)}",
        "",
    ]
    width = max(len("Learner"), *(len(r.label) for r in report.rows))
    head = f"{'Learner':<{width}}  {'PPMCC':>7}  {'RAE (%)':>8}  {'RRSE (%)':>8}"
    if timing:
        head += f"  {'Time (s)':>8}"
    lines.append(head + "  Notes")
    for r in report.rows:
        m = r.metrics
        if m is None:
            cells = ("n/a",) * 3 if r.status == "unsupported" else ("failed",) * 3
        else:
            cells = ("n/a" if m.ppmcc is None else f"{m.ppmcc:.4f}", _pct(m.rae), _pct(m.rrse))
        line = f"{r.label:<{width}}  {cells[0]:>7}  {cells[1]:>8}  {cells[2]:>8}"
        if timing:
            line += f"  {r.seconds:>8.2f}"
        lines.append(line + f"  {r.notes}")
    return "\n".join(lines) + "\n"


def render_matrix(cm) -> str:
    lines = ["      " + "".join(f"{a:>9}" for a in cm.analytes)]
    for i, a in enumerate(cm.analytes):
        cells = "".join("      n/a" if np.isnan(v) else f"{v:>9.4f}" for v in cm.values[i])
        lines.append(f"{a:<6}{cells}")
    return "\n".join(lines) + "\n"


# -- subcommands -------------------------------------------------------------------

def cmd_synth(args):
    cal, _ = _calibration(args)
    seed = args.seed
    d = synthesize(args.n, seed, cal)
    if args.out is None:
        write_csv(d, sys.stdout)
        print(format_summary(summarize(d)), file=sys.stderr)
    else:
        write_csv(d, args.out)
        print(f"wrote {len(d)} records to {args.out} (seed {seed})")
        print(format_summary(summarize(d)))
    return EXIT_OK


def _options(args):
    weights = None
    if args.mavl_weights:
        try:
            weights = tuple(float(w) for w in args.mavl_weights.split(","))
        except ValueError:
            raise UsageError(f"bad --mavl-weights {args.mavl_weights!r}") from None
    if not 0 <= args.momentum < 1 or args.lr <= 0:
        raise UsageError("need lr > 0 and 0 <= momentum < 1")
    return LearnerOptions(
        tree=TreeConfig(max_depth=args.max_depth, min_leaf=args.min_leaf, prune=not args.no_prune,
                        prune_fraction=args.prune_fraction, smoothing=args.smoothing),
        mlp=TrainConfig(hidden=args.hidden, epochs=args.epochs, learning_rate=args.lr, momentum=args.momentum),
        knn_standardize=not args.knn_raw,
        bags=args.bags,
        bagging_base=args.bagging_base,
        mavl_members=tuple(m.strip() for m in args.mavl_members.split(",") if m.strip()),
        mavl_weights=weights,
        mavl_mode=args.mavl_mode,
        mavl_bins=args.mavl_bins,
    )


def cmd_bench(args):
    learners = [s.strip() for s in args.learners.split(",") if s.strip()]
    if not learners:
        raise UsageError("--learners is empty")
    options = _options(args)
    try:
        check_learners(learners, options)
    except UnknownLearner as exc:
        raise UsageError(str(exc)) from None
    except DataError as exc:
        raise UsageError(str(exc)) from None
    if args.folds < 2:
        raise UsageError("--folds must be at least 2")
    d = _load_data(args, args.target)
    report = run_benchmark(d, learners, folds=args.folds, seed=args.seed, options=options)
    text = render_report(report, timing=args.timing)
    sys.stdout.write(text)
    if args.out is not None:
        args.out.write_text(text, encoding="utf-8")
    if args.csv is not None:
        write_report_csv(report, args.csv)
    if report.failed:
        print(f"{len(report.failed)} learner(s) failed: {', '.join(r.key for r in report.failed)}",
              file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_correlate(args):
    d = _load_data(args)
    cm = correlate(d)
    sys.stdout.write(render_matrix(cm))
    if np.isnan(cm.values).any():
        print("warning: constant column(s); correlation undefined (n/a)", file=sys.stderr)
    if args.scatter is not None:
        files = write_scatter(d, args.scatter)
        print(f"wrote {len(files)} scatter files to {args.scatter}")
    return EXIT_OK


def parse_query(text, features):
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if parts and all("=" in p for p in parts):
        vals = {}
        for p in parts:
            k, v = p.split("=", 1)
            vals[k.strip().upper()] = v
        missing = [f for f in features if f not in vals]
        if missing:
            raise UsageError(f"--query lacks {', '.join(missing)}")
        raw = [vals[f] for f in features]
    elif len(parts) == len(features):
        raw = parts
    else:
        raise UsageError(f"--query needs {len(features)} values ({', '.join(features)})")
    try:
        return np.array([float(v) for v in raw])
    except ValueError:
        raise UsageError(f"--query values must be numbers: {text!r}") from None


def knsc_sets(d, standardize=True):
    """Outlier set and below/in/above target classes in feature space.

    Records with any feature analyte outside its reference range are the
    outliers; the rest are classed by where the target falls relative to
    its range. Returns ``(transform, classes, outliers)``.
    """
    X = d.X
    if standardize:
        mu = X.mean(axis=0)
        sd = X.std(axis=0)
        sd = np.where(sd > 0, sd, 1.0)
    else:
        mu, sd = np.zeros(X.shape[1]), np.ones(X.shape[1])
    Z = (X - mu) / sd
    out_mask = out_of_range_mask(d, REFERENCE_RANGES, d.features).any(axis=1)
    low, high = REFERENCE_RANGES[d.target]
    y = d.y
    classes = {}
    for name, m in (("below", y < low), ("in", (y >= low) & (y <= high)), ("above", y > high)):
        pts = Z[m & ~out_mask]
        if len(pts):
            classes[name] = pts
    return (lambda q: (np.asarray(q) - mu) / sd), classes, Z[out_mask]


def cmd_knsc(args):
    d = _load_data(args, args.target)
    q = parse_query(args.query, d.features)
    transform, classes, outliers = knsc_sets(d, standardize=not args.raw)
    if not classes:
        raise DataError("no in-reference-range records to form classes")
    score = knsc(transform(q), classes, outliers, args.k)
    sizes = ", ".join(f"{c}={len(p)}" for c, p in classes.items())
    print(f"classes ({d.target} vs reference range): {sizes}; outliers={len(outliers)}; k={args.k}")
    print(f"k-NSC = {score:.6f}")
    return EXIT_OK


def cmd_inspect(args):
    d = _load_data(args, args.target)
    if args.model == "stump":
        m = fit_stump(d.X, d.y, d.features)
        if m.is_constant:
            print(f": {m.left_value:.6g} [n={len(d)}] (no valid split)")
        else:
            print(f"{m.split_feature} <= {m.threshold:.6g} : {m.left_value:.6g}")
            print(f"{m.split_feature} > {m.threshold:.6g} : {m.right_value:.6g}")
        return EXIT_OK
    cfg = TreeConfig(max_depth=args.max_depth, min_leaf=args.min_leaf, prune=not args.no_prune,
                     prune_fraction=args.prune_fraction, seed=args.seed, smoothing=args.smoothing)
    model = (M5Regressor if args.model == "m5p" else REPTreeRegressor)(cfg).fit_dataset(d)
    if args.rules:
        for rule in model.rules():
            print(rule.format(model.feature_names))
    else:
        print(model.dump())
    print(f"# {args.model}: {model.describe()}; target {d.target}; seed {args.seed}", file=sys.stderr)
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "bench": cmd_bench,
    "correlate": cmd_correlate,
    "knsc": cmd_knsc,
    "inspect": cmd_inspect,
}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        _config_defaults(parser, argv)
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"panelreg: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PanelError, OSError) as exc:
        print(f"panelreg: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
