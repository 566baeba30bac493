"""Repeated ARO vs AIS runs over a set of splits, summarised as a report.

For every split and algorithm the trainer runs ``repeats`` times with
independent seeds; the run with the lowest test cost represents that split.
The report holds those best runs, every run's metrics, per-metric averages
and the signed-rank / Kruskal-Wallis tests computed from them.
"""
from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .ais_detector import AisParams, ais_train
from .aro_detector import AroTrainParams, train
from .dataset import Dataset, SplitPair, class_partition
from .detectors import DetectorSet
from .evaluation import (
    MetricsReport,
    confusion,
    metrics,
    roc_auc,
    roc_threshold,
    score_against_rows,
    score_many,
    timed,
)
from .stats import kruskal_wallis, wilcoxon_signed_rank

__all__ = [
    "BenchmarkConfig",
    "EvalResult",
    "evaluate_detectors",
    "fit",
    "task_seed",
    "run_benchmark",
    "compute_tests",
    "REPORT_SCHEMA",
    "METRICS",
]

log = logging.getLogger(__name__)

REPORT_SCHEMA = "arofraud-benchmark v1"
METRICS = MetricsReport.FIELDS
ALGORITHMS = ("aro", "ais")


@dataclass
class BenchmarkConfig:
    repeats: int = 3
    algorithms: tuple[str, ...] = ALGORITHMS
    aro: AroTrainParams = field(default_factory=AroTrainParams)
    ais: AisParams = field(default_factory=AisParams)
    threshold: str = "roc"
    score_against: str = "detectors"
    parallelism: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        bad = set(self.algorithms) - set(ALGORITHMS)
        if bad or not self.algorithms:
            raise ValueError(f"unknown algorithms {sorted(bad)}")
        _threshold_mode(self.threshold)
        if self.score_against not in ("detectors", "raw"):
            raise ValueError("score_against must be 'detectors' or 'raw'")
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["algorithms"] = list(self.algorithms)
        return d


def _threshold_mode(value):
    if value in ("roc", "cut_point"):
        return value
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ValueError(f"threshold must be 'roc', 'cut_point' or a number, got {value!r}") from None


def task_seed(seed: int, split_id: int, run_id: int, algorithm: str) -> int:
    """Independent 63-bit seed for one (split, run, algorithm) task."""
    ss = np.random.SeedSequence([seed, split_id, run_id, ALGORITHMS.index(algorithm)])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def fit(algorithm: str, train_split: Dataset, config: BenchmarkConfig, seed: int) -> DetectorSet:
    if algorithm == "aro":
        params = AroTrainParams(**{**asdict(config.aro), "seed": seed})
        return train(train_split, params)
    params = AisParams(**{**asdict(config.ais), "seed": seed})
    return ais_train(train_split, params)


@dataclass
class EvalResult:
    report: MetricsReport
    threshold: float
    fpr: np.ndarray
    tpr: np.ndarray
    confusion: dict


def evaluate_detectors(
    detectors: DetectorSet,
    test: Dataset,
    train_split: Dataset | None = None,
    threshold="roc",
    score_against: str = "detectors",
) -> EvalResult:
    """Score the test split and compute every test-phase metric.

    ``threshold`` is a number, ``"cut_point"`` (the detector set's cut point)
    or ``"roc"`` (the training-split score threshold maximising sensitivity
    plus specificity). Detector sets without a cut point fall back to
    ``"roc"``. ``score_against="raw"`` measures distances to the training
    split's legitimate records instead of the detectors.
    """
    mode = _threshold_mode(threshold)
    if mode == "cut_point" and math.isnan(detectors.cut_point):
        mode = "roc"
    if (mode == "roc" or score_against == "raw") and train_split is None:
        raise ValueError("the training split is needed for ROC thresholds and raw scoring")

    if score_against == "raw":
        legit, _ = class_partition(train_split)
        scorer = lambda X: score_against_rows(X, legit, detectors.bounds)  # noqa: E731
    else:
        scorer = lambda X: score_many(X, detectors)  # noqa: E731

    if mode == "roc":
        thr = roc_threshold(scorer(train_split.features), train_split.labels)
    elif mode == "cut_point":
        thr = detectors.cut_point
    else:
        thr = mode

    scores, test_time = timed(scorer, test.features)
    cm = confusion(scores, test.labels, thr)
    rep = metrics(cm)
    fpr, tpr, rep.auc = roc_auc(scores, test.labels)
    rep.test_time_s = test_time
    rep.train_time_s = detectors.train_stats.get("train_time_s", math.nan)
    return EvalResult(rep, float(thr), fpr, tpr, asdict(cm))


def _run_task(args):
    split, algorithm, run_id, config = args
    seed = task_seed(config.seed, split.split_id, run_id, algorithm)
    try:
        ds = fit(algorithm, split.train, config, seed)
        res = evaluate_detectors(ds, split.test, split.train, config.threshold, config.score_against)
    except Exception as exc:
        raise RuntimeError(f"split {split.split_id} ({algorithm}, run {run_id}) failed: {exc}") from exc
    return {
        "split_id": split.split_id,
        "algorithm": algorithm,
        "run_id": run_id,
        "seed": seed,
        "metrics": res.report.to_dict(),
        "threshold": res.threshold,
        "confusion": res.confusion,
        "detector_count": len(ds),
    }


def _nanmean(values) -> float | None:
    vals = [v for v in values if v is not None and not math.isnan(v)]
    return float(np.mean(vals)) if vals else None


def compute_tests(split_rows: list[dict], algorithms=ALGORITHMS) -> dict:
    """Signed-rank tests (first vs second algorithm) and Kruskal-Wallis across splits.

    ``kruskal_wallis`` treats each split's best run as a one-value group;
    ``kruskal_wallis_runs`` uses every run of a split as its group and is only
    present when splits have more than one run.
    """
    tests: dict = {"wilcoxon": {}, "kruskal_wallis": {}, "kruskal_wallis_runs": {}}
    if len(algorithms) == 2:
        a, b = algorithms
        for m in METRICS:
            pairs = [
                (row[a]["best"][m], row[b]["best"][m])
                for row in split_rows
                if row[a]["best"][m] is not None and row[b]["best"][m] is not None
            ]
            try:
                res = wilcoxon_signed_rank([x for x, _ in pairs], [y for _, y in pairs])
                tests["wilcoxon"][m] = res.to_dict()
            except ValueError as exc:
                tests["wilcoxon"][m] = {"error": str(exc)}
    for alg in algorithms:
        tests["kruskal_wallis"][alg] = {}
        tests["kruskal_wallis_runs"][alg] = {}
        for m in METRICS:
            best = [[row[alg]["best"][m]] for row in split_rows if row[alg]["best"][m] is not None]
            runs = [
                [r[m] for r in row[alg]["runs"] if r[m] is not None]
                for row in split_rows
            ]
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                try:
                    tests["kruskal_wallis"][alg][m] = kruskal_wallis(best).to_dict()
                except ValueError as exc:
                    tests["kruskal_wallis"][alg][m] = {"error": str(exc)}
                if all(len(g) > 1 for g in runs) and len(runs) >= 2:
                    tests["kruskal_wallis_runs"][alg][m] = kruskal_wallis(runs).to_dict()
    return tests


def run_benchmark(splits: list[SplitPair], config: BenchmarkConfig) -> dict:
    """Run every split x algorithm x repeat and assemble the report dict."""
    tasks = [
        (split, alg, run_id, config)
        for split in splits
        for alg in config.algorithms
        for run_id in range(config.repeats)
    ]
    if config.parallelism > 1:
        with ProcessPoolExecutor(max_workers=config.parallelism) as pool:
            results = list(pool.map(_run_task, tasks))
    else:
        results = []
        for t in tasks:
            log.info("split %d %s run %d", t[0].split_id, t[1], t[2])
            results.append(_run_task(t))

    split_rows = []
    for split in splits:
        row = {"split_id": split.split_id}
        for alg in config.algorithms:
            runs = [r for r in results if r["split_id"] == split.split_id and r["algorithm"] == alg]
            runs.sort(key=lambda r: r["run_id"])
            best = min(runs, key=lambda r: (r["metrics"]["cost"], r["run_id"]))
            row[alg] = {
                "best": best["metrics"],
                "best_run": best["run_id"],
                "best_threshold": best["threshold"],
                "best_confusion": best["confusion"],
                "runs": [r["metrics"] for r in runs],
                "seeds": [r["seed"] for r in runs],
                "detector_counts": [r["detector_count"] for r in runs],
            }
        split_rows.append(row)

    averages = {
        alg: {m: _nanmean(row[alg]["best"][m] for row in split_rows) for m in METRICS}
        for alg in config.algorithms
    }
    return {
        "schema": REPORT_SCHEMA,
        "version": __version__,
        "config": config.to_dict(),
        "splits": split_rows,
        "averages": averages,
        "tests": compute_tests(split_rows, config.algorithms),
    }
