"""Command-line front end: ``generate``, ``train``, ``evaluate``, ``benchmark``, ``stats``.

Every subcommand takes ``--seed``, ``--config`` (a JSON object whose keys are
option names with dashes or underscores), ``--out`` and ``--parallelism``.
A flag given on the command line beats the config file, which beats the
built-in default. Outputs are written to temporary files and renamed into
place only once the whole command has succeeded.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import tempfile
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .ais_detector import AisParams
from .aro_detector import DEFAULT_CUT_POINT_GRID, AroTrainParams, calibrate_cut_point
from .benchmark import (
    METRICS,
    REPORT_SCHEMA,
    BenchmarkConfig,
    compute_tests,
    evaluate_detectors,
    fit,
    run_benchmark,
    task_seed,
)
from .dataset import GeneratorConfig, REFERENCE_SPLIT_COUNTS, SplitPair, generate_splits, load_csv, write_csv
from .detectors import dump_detectors, load_detectors
from .evaluation import write_roc_csv

log = logging.getLogger("arofraud")


class CliError(Exception):
    """Fatal, user-facing error; reported without a traceback."""


class StagedOutputs:
    """Collects output files as temporaries and publishes them together.

    Used as a context manager: on normal exit every staged file is renamed
    onto its final name; on an exception all temporaries are deleted and a
    directory created by this object is removed again if left empty.
    """

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        self._created_dir = not self.out_dir.exists()
        self._staged: list[tuple[Path, Path]] = []

    def __enter__(self):
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise CliError(f"cannot create output directory {self.out_dir}: {exc}") from None
        if not os.access(self.out_dir, os.W_OK):
            raise CliError(f"output directory {self.out_dir} is not writable")
        return self

    def write_text(self, name: str, text: str) -> Path:
        final = self.out_dir / name
        fd, tmp = tempfile.mkstemp(prefix=f".{name}.", suffix=".tmp", dir=self.out_dir)
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        self._staged.append((Path(tmp), final))
        return final

    def open(self, name: str):
        final = self.out_dir / name
        fd, tmp = tempfile.mkstemp(prefix=f".{name}.", suffix=".tmp", dir=self.out_dir)
        self._staged.append((Path(tmp), final))
        return os.fdopen(fd, "w", encoding="utf-8", newline="")

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            for tmp, final in self._staged:
                os.replace(tmp, final)
            return False
        for tmp, _ in self._staged:
            tmp.unlink(missing_ok=True)
        if self._created_dir:
            try:
                self.out_dir.rmdir()
            except OSError:
                pass
        return False


def _json(obj) -> str:
    def clean(o):
        if isinstance(o, float) and not math.isfinite(o):
            return None
        if isinstance(o, dict):
            return {k: clean(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [clean(v) for v in o]
        return o

    return json.dumps(clean(obj), indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------- parsing


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _threshold(text: str):
    if text in ("roc", "cut_point", "cut-point"):
        return text.replace("-", "_")
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("threshold must be 'roc', 'cut_point' or a number") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    g.add_argument("--config", type=Path, help="JSON file with option defaults")
    g.add_argument("--out", type=Path, default=Path("."), help="output directory")
    g.add_argument("--parallelism", type=_positive_int, default=1, help="worker processes")

    data = argparse.ArgumentParser(add_help=False)
    d = data.add_argument_group("synthetic data")
    d.add_argument("--splits", type=_positive_int, default=9)
    d.add_argument("--feature-count", type=_positive_int, default=17)
    d.add_argument("--class-separation", type=float, default=2.0)
    d.add_argument("--noise-scale", type=float, default=1.0)
    d.add_argument("--train-legit", type=_positive_int, default=GeneratorConfig.train_legit)
    d.add_argument("--train-fraud", type=_positive_int, default=GeneratorConfig.train_fraud)
    d.add_argument("--test-legit", type=_positive_int, default=GeneratorConfig.test_legit)
    d.add_argument("--test-fraud", type=_positive_int, default=GeneratorConfig.test_fraud)
    d.add_argument("--reference-counts", action="store_true", help="use the per-split reference class counts")

    algo = argparse.ArgumentParser(add_help=False)
    a = algo.add_argument_group("training")
    a.add_argument("--algorithm", choices=["aro", "ais", "both"], default="both")
    a.add_argument("--cut-point", type=float, default=AroTrainParams.cut_point)
    a.add_argument("--calibrate", action="store_true", help="pick the cut point by training-cost grid search")
    a.add_argument("--max-iters", type=_positive_int, default=AroTrainParams.max_loop_iterations)
    a.add_argument("--restarts", type=_positive_int, default=1)
    a.add_argument("--ais-iterations", type=int, default=AisParams.iterations)
    a.add_argument("--ais-faithful", action="store_true", help="replace memory cells unconditionally")
    a.add_argument("--negative-selection", action="store_true")

    scoring = argparse.ArgumentParser(add_help=False)
    s = scoring.add_argument_group("scoring")
    s.add_argument("--threshold", type=_threshold, default="roc",
                   help="'roc' (training-split optimum), 'cut_point' or a number")
    s.add_argument("--score-against", choices=["raw", "detectors"], default="detectors")

    parser = argparse.ArgumentParser(prog="arofraud", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("generate", parents=[common, data], help="write synthetic train/test CSV splits")

    p = sub.add_parser("train", parents=[common, algo], help="train detectors on a CSV split")
    p.add_argument("--train", type=Path, required=False, help="training CSV")

    p = sub.add_parser("evaluate", parents=[common, scoring], help="score a test CSV with trained detectors")
    p.add_argument("--detectors", type=Path, nargs="+", required=False)
    p.add_argument("--test", type=Path, required=False, help="test CSV")
    p.add_argument("--train", type=Path, help="training CSV (needed for --threshold roc and raw scoring)")
    p.add_argument("--train-report", type=Path, help="train_report.json to copy train times from")

    p = sub.add_parser("benchmark", parents=[common, data, algo, scoring], help="repeated ARO vs AIS runs")
    p.add_argument("--data", type=Path, help="directory of split<i>_train.csv / split<i>_test.csv")
    p.add_argument("--repeats", type=_positive_int, default=3)

    p = sub.add_parser("stats", parents=[common], help="recompute tests from a benchmark report")
    p.add_argument("--report", type=Path, required=False)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if args.config is None:
        return args
    try:
        cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        parser.error(f"cannot read config {args.config}: {exc}")
    if not isinstance(cfg, dict):
        parser.error("config file must hold a JSON object")
    cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    known = set(vars(args))
    unknown = sorted(set(cfg) - known - {"config"})
    if unknown:
        parser.error(f"unknown config keys for '{args.command}': {', '.join(unknown)}")
    subparser = parser._subparsers._group_actions[0].choices[args.command]
    for key in ("out", "data", "train", "test", "report", "train_report"):
        if isinstance(cfg.get(key), str):
            cfg[key] = Path(cfg[key])
    if isinstance(cfg.get("detectors"), list):
        cfg["detectors"] = [Path(x) for x in cfg["detectors"]]
    subparser.set_defaults(**cfg)
    return parser.parse_args(argv)


# ---------------------------------------------------------------- commands


def _generator_config(args) -> GeneratorConfig:
    try:
        return GeneratorConfig(
            feature_count=args.feature_count,
            train_legit=args.train_legit,
            train_fraud=args.train_fraud,
            test_legit=args.test_legit,
            test_fraud=args.test_fraud,
            class_separation=args.class_separation,
            noise_scale=args.noise_scale,
            seed=args.seed,
        )
    except ValueError as exc:
        raise CliError(f"invalid generator config: {exc}") from None


def _make_splits(args) -> list[SplitPair]:
    if args.reference_counts and args.splits > len(REFERENCE_SPLIT_COUNTS):
        raise CliError(f"--reference-counts supports at most {len(REFERENCE_SPLIT_COUNTS)} splits")
    return generate_splits(_generator_config(args), args.splits, reference_counts=args.reference_counts)


def cmd_generate(args) -> int:
    splits = _make_splits(args)
    with StagedOutputs(args.out) as out:
        for sp in splits:
            for part, ds in (("train", sp.train), ("test", sp.test)):
                with out.open(f"split{sp.split_id}_{part}.csv") as fh:
                    write_csv(ds, fh)
    log.info("wrote %d splits to %s", len(splits), args.out)
    return 0


def _load(path, what: str):
    if path is None:
        raise CliError(f"--{what} is required")
    try:
        return load_csv(path)
    except FileNotFoundError as exc:
        raise CliError(str(exc)) from None
    except ValueError as exc:
        raise CliError(f"{path}: {exc}") from None


def _algorithms(args) -> tuple[str, ...]:
    return ("aro", "ais") if args.algorithm == "both" else (args.algorithm,)


def _bench_config(args, cut_point: float | None = None) -> BenchmarkConfig:
    try:
        return BenchmarkConfig(
            repeats=getattr(args, "repeats", 1),
            algorithms=_algorithms(args),
            aro=AroTrainParams(
                cut_point=args.cut_point if cut_point is None else cut_point,
                max_loop_iterations=args.max_iters,
                restarts=args.restarts,
            ),
            ais=AisParams(iterations=args.ais_iterations, faithful=args.ais_faithful,
                          negative_selection=args.negative_selection),
            threshold=getattr(args, "threshold", "roc"),
            score_against=getattr(args, "score_against", "detectors"),
            parallelism=args.parallelism,
            seed=args.seed,
        )
    except ValueError as exc:
        raise CliError(f"invalid configuration: {exc}") from None


def cmd_train(args) -> int:
    train_split = _load(args.train, "train")
    cut = args.cut_point
    if args.calibrate:
        cut = calibrate_cut_point(train_split, seed=args.seed, grid=DEFAULT_CUT_POINT_GRID)
        log.info("calibrated cut point %g", cut)
    config = _bench_config(args, cut)
    report = {"version": __version__, "train_file": str(args.train), "algorithms": {}}
    outputs = {}
    for alg in config.algorithms:
        try:
            seed = task_seed(args.seed, 0, 0, alg)
            ds = fit(alg, train_split, config, seed)
        except ValueError as exc:
            raise CliError(f"{alg} training failed: {exc}") from None
        outputs[f"{alg}_detectors.txt"] = dump_detectors(ds)
        st = ds.train_stats
        summary = {"detector_count": len(ds), "train_time_s": st["train_time_s"],
                   "cut_point": ds.cut_point, "params": {**asdict(config.aro if alg == "aro" else config.ais), "seed": seed}}
        if alg == "aro":
            summary.update(iterations=st["iterations"], accepted_buds=st["accepted_buds"],
                           final_fitness=st["final_fitness"], reached_cut_point=st["reached_cut_point"])
        else:
            summary.update(iterations=st["iterations"], installed=st["installed"],
                           worst_affinity_final=st["worst_affinity"][-1])
        report["algorithms"][alg] = summary
    with StagedOutputs(args.out) as out:
        for name, text in outputs.items():
            out.write_text(name, text)
        out.write_text("train_report.json", _json(report))
    return 0


def cmd_evaluate(args) -> int:
    if not args.detectors:
        raise CliError("--detectors is required")
    test = _load(args.test, "test")
    train_split = _load(args.train, "train") if args.train is not None else None
    times = {}
    if args.train_report is not None:
        try:
            times = {a: v["train_time_s"] for a, v in json.loads(args.train_report.read_text())["algorithms"].items()}
        except (OSError, ValueError, KeyError) as exc:
            raise CliError(f"cannot read train report {args.train_report}: {exc}") from None
    results = {}
    for path in args.detectors:
        try:
            ds = load_detectors(path)
        except (OSError, ValueError) as exc:
            raise CliError(str(exc)) from None
        if ds.feature_count != test.feature_count:
            raise CliError(f"{path}: detectors have {ds.feature_count} features, test data has {test.feature_count}")
        if ds.algorithm in times:
            ds.train_stats["train_time_s"] = times[ds.algorithm]
        try:
            results[ds.algorithm] = evaluate_detectors(ds, test, train_split, args.threshold, args.score_against)
        except ValueError as exc:
            raise CliError(str(exc)) from None
    with StagedOutputs(args.out) as out:
        for alg, res in results.items():
            doc = res.report.to_dict()
            doc["threshold"] = res.threshold
            doc["confusion"] = res.confusion
            out.write_text(f"{alg}_metrics.json", _json(doc))
            with out.open(f"{alg}_roc.csv") as fh:
                write_roc_csv(res.fpr, res.tpr, fh)
    return 0


def _splits_from_dir(data_dir: Path) -> list[SplitPair]:
    found = sorted(data_dir.glob("split*_train.csv"), key=lambda p: int(p.stem[5:-6]))
    if not found:
        raise CliError(f"no split*_train.csv files in {data_dir}")
    splits = []
    for tr in found:
        sid = int(tr.stem[5:-6])
        te = tr.with_name(f"split{sid}_test.csv")
        splits.append(SplitPair(_load(tr, "data"), _load(te, "data"), sid))
    return splits


def _table_csv(report: dict) -> str:
    algs = [a for a in ("aro", "ais") if a in report["averages"]]
    lines = ["split," + ",".join(f"{m}_{a}" for m in METRICS for a in algs)]

    def cell(v):
        return "" if v is None else format(v, ".9g")

    for row in report["splits"]:
        lines.append(f"{row['split_id']}," + ",".join(cell(row[a]["best"][m]) for m in METRICS for a in algs))
    lines.append("average," + ",".join(cell(report["averages"][a][m]) for m in METRICS for a in algs))
    return "\n".join(lines) + "\n"


def _tests_csv(tests: dict) -> str:
    lines = ["test,group,metric,statistic,df,p_value"]
    for m, r in tests.get("wilcoxon", {}).items():
        lines.append(f"wilcoxon,aro-ais,{m},{r.get('statistic', '')},,{r.get('p_value', '')}")
    for kind in ("kruskal_wallis", "kruskal_wallis_runs"):
        for alg, per in tests.get(kind, {}).items():
            for m, r in per.items():
                lines.append(f"{kind},{alg},{m},{r.get('statistic', '')},{r.get('df', '')},{r.get('p_value', '')}")
    return "\n".join(lines) + "\n"


def cmd_benchmark(args) -> int:
    if args.data is not None:
        splits = _splits_from_dir(args.data)
    else:
        splits = _make_splits(args)
    cut = args.cut_point
    if args.calibrate:
        cut = calibrate_cut_point(splits[0].train, seed=args.seed)
    config = _bench_config(args, cut)
    try:
        report = run_benchmark(splits, config)
    except RuntimeError as exc:
        raise CliError(str(exc)) from None
    with StagedOutputs(args.out) as out:
        out.write_text("benchmark_report.json", _json(report))
        out.write_text("benchmark_table.csv", _table_csv(report))
        out.write_text("benchmark_tests.csv", _tests_csv(report["tests"]))
    return 0


def cmd_stats(args) -> int:
    if args.report is None:
        raise CliError("--report is required")
    try:
        report = json.loads(Path(args.report).read_text(encoding="utf-8"))
        if report.get("schema") != REPORT_SCHEMA:
            raise ValueError(f"expected schema {REPORT_SCHEMA!r}")
        algs = tuple(a for a in ("aro", "ais") if a in report["averages"])
        tests = compute_tests(report["splits"], algs)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise CliError(f"malformed benchmark report {args.report}: {exc}") from None
    with StagedOutputs(args.out) as out:
        out.write_text("stats.json", _json(tests))
        out.write_text("stats.csv", _tests_csv(tests))
    return 0


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "benchmark": cmd_benchmark,
    "stats": cmd_stats,
}


def main(argv=None) -> int:
    level = os.environ.get("ARO_BENCH_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = _apply_config(parser, argv)
    try:
        return COMMANDS[args.command](args)
    except CliError as exc:
        print(f"arofraud {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
