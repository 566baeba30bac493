"""Real-valued ARO trainer that grows a set of normal-transaction detectors.

A random parent is drawn inside the legitimate-class bounds. Each iteration
picks a window ``S..E`` of genes, resamples each window gene with
probability ``1 / (1 + ln(E - S + 1))`` and keeps the bud if its fitness
beats the parent. Every accepted bud is appended to the detector set. The
loop stops once the parent fitness reaches the cut point.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, class_partition
from .detectors import DetectorSet
from .fitness import FeatureBounds, FitnessContext, compute_bounds

__all__ = [
    "AroTrainParams",
    "mutation_probability",
    "random_parent",
    "mutate_bud",
    "train",
    "calibrate_cut_point",
    "cut_point_costs",
    "DEFAULT_CUT_POINT_GRID",
]

log = logging.getLogger(__name__)

DEFAULT_CUT_POINT_GRID = tuple(round(0.15 + 0.005 * i, 3) for i in range(11))


@dataclass(frozen=True)
class AroTrainParams:
    """Training knobs.

    ``initial_fitness`` chooses how the first parent is scored: ``"fitness"``
    (fraud minus normal distance, the same criterion as every bud) or
    ``"normal_distance"`` (the plain distance to the legitimate rows).
    ``integer_genes`` restricts genes to integers within the bounds.
    """

    cut_point: float = 0.175
    max_loop_iterations: int = 100_000
    seed: int = 0
    restarts: int = 1
    initial_fitness: str = "fitness"
    integer_genes: bool = False
    record_distances: bool = False

    def __post_init__(self):
        if self.max_loop_iterations < 1:
            raise ValueError("max_loop_iterations must be >= 1")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.initial_fitness not in ("fitness", "normal_distance"):
            raise ValueError("initial_fitness must be 'fitness' or 'normal_distance'")


def mutation_probability(start: int, end: int) -> float:
    """``1 / (1 + ln(end - start + 1))`` for a 1-based inclusive gene window."""
    if not 1 <= start <= end:
        raise ValueError(f"need 1 <= start <= end, got start={start}, end={end}")
    return 1.0 / (1.0 + math.log(end - start + 1))


def _sample_genes(lo, hi, rng: np.random.Generator, integer: bool) -> np.ndarray:
    vals = lo + (hi - lo) * rng.random(np.shape(lo))
    if integer:
        ilo, ihi = np.ceil(lo), np.floor(hi)
        ok = ilo <= ihi
        ints = np.clip(np.floor(vals), ilo, ihi)
        vals = np.where(ok, ints, vals)
    return vals


def random_parent(legal_bounds: FeatureBounds, rng: np.random.Generator, integer_genes: bool = False) -> np.ndarray:
    return _sample_genes(legal_bounds.min, legal_bounds.max, rng, integer_genes)


def mutate_bud(
    parent,
    legal_bounds: FeatureBounds,
    rng: np.random.Generator,
    integer_genes: bool = False,
    window: tuple[int, int] | None = None,
) -> np.ndarray:
    """Copy ``parent`` and resample genes inside a random window.

    Parameters
    ----------
    window : (S, E), optional
        1-based inclusive window; drawn as ``S ~ U{1..k}``, ``E ~ U{S..k}``
        when omitted.
    """
    parent = np.asarray(parent, dtype=np.float64)
    k = parent.size
    if window is None:
        s = int(rng.integers(1, k + 1))
        e = int(rng.integers(s, k + 1))
    else:
        s, e = window
    p = mutation_probability(s, e)
    bud = parent.copy()
    sl = slice(s - 1, e)
    hit = p >= rng.random(e - s + 1)
    fresh = _sample_genes(legal_bounds.min[sl], legal_bounds.max[sl], rng, integer_genes)
    bud[sl] = np.where(hit, fresh, parent[sl])
    return bud


def _grow(ctx: FitnessContext, legal: FeatureBounds, params: AroTrainParams, rng, stats: dict) -> list[np.ndarray]:
    parent = random_parent(legal, rng, params.integer_genes)
    if params.initial_fitness == "fitness":
        parent_fit = float(ctx.fitness(parent))
    else:
        parent_fit = float(ctx.normal_distance(parent))
    found = []
    trace = [parent_fit]
    it = 0
    while parent_fit < params.cut_point and it < params.max_loop_iterations:
        it += 1
        bud = mutate_bud(parent, legal, rng, params.integer_genes)
        fd = float(ctx.fraud_distance(bud))
        nd = float(ctx.normal_distance(bud))
        bud_fit = fd - nd
        if params.record_distances:
            stats["bud_fraud_distances"].append(fd)
            stats["bud_normal_distances"].append(nd)
        if bud_fit > parent_fit:
            parent, parent_fit = bud, bud_fit
            found.append(bud)
            trace.append(bud_fit)
    found.append(parent)  # the final parent closes each restart
    stats["iterations"] += it
    stats["accepted_buds"] += len(found) - 1
    stats["final_fitness"].append(parent_fit)
    stats["reached_cut_point"].append(parent_fit >= params.cut_point)
    stats["fitness_traces"].append(trace)
    return found


def train(train_split: Dataset, params: AroTrainParams = AroTrainParams()) -> DetectorSet:
    """Train ARO detectors on a labelled split.

    Returns
    -------
    DetectorSet
        Accepted buds of every restart, each restart closed by its final
        parent. ``train_stats`` carries iteration counts, the per-restart
        parent fitness trace at replacement events, whether the cut point was
        reached and the wall-clock ``train_time_s``.
    """
    t0 = time.perf_counter()
    legit, fraud = class_partition(train_split)
    if len(fraud) == 0:
        raise ValueError("training split has no fraudulent records; fitness needs both classes")
    ctx = FitnessContext(legit, fraud, compute_bounds(train_split.features))
    legal = compute_bounds(legit)
    rng = np.random.default_rng(params.seed)
    stats = {
        "iterations": 0,
        "accepted_buds": 0,
        "final_fitness": [],
        "reached_cut_point": [],
        "fitness_traces": [],
    }
    if params.record_distances:
        stats["bud_fraud_distances"] = []
        stats["bud_normal_distances"] = []
    rows = []
    for _ in range(params.restarts):
        rows.extend(_grow(ctx, legal, params, rng, stats))
    stats["train_time_s"] = time.perf_counter() - t0
    if not all(stats["reached_cut_point"]):
        log.warning("ARO hit the iteration cap before reaching cut point %g", params.cut_point)
    return DetectorSet(np.array(rows), ctx.bounds, params.cut_point, "aro", stats)


def cut_point_costs(train_split: Dataset, seed: int = 0, grid=DEFAULT_CUT_POINT_GRID, max_loop_iterations: int = 5000) -> dict[float, int]:
    """Training-split cost for each candidate cut point.

    Each candidate trains its own detectors and then classifies the training
    records using the candidate itself as the distance threshold.
    """
    from .evaluation import confusion, cost, score_many

    costs = {}
    for c in grid:
        ds = train(train_split, AroTrainParams(cut_point=c, max_loop_iterations=max_loop_iterations, seed=seed))
        cm = confusion(score_many(train_split.features, ds), train_split.labels, c)
        costs[float(c)] = cost(cm)
    return costs


def calibrate_cut_point(train_split: Dataset, seed: int = 0, grid=DEFAULT_CUT_POINT_GRID, max_loop_iterations: int = 5000) -> float:
    """Grid candidate with the lowest training cost; ties go to the smaller cut point."""
    if len(grid) == 0:
        raise ValueError("cut point grid is empty")
    costs = cut_point_costs(train_split, seed, grid, max_loop_iterations)
    return min(costs, key=lambda c: (costs[c], c))
